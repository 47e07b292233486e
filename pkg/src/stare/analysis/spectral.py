from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .matrices import PredictionMatrix


@dataclass
class ClusterAssignment:
    assignment: dict  # label -> cluster id
    k: int

    def clusters(self) -> list[list]:
        out: list[list] = [[] for _ in range(self.k)]
        for lab, c in self.assignment.items():
            out[c].append(lab)
        return out

    def to_dict(self) -> dict:
        return {"k": self.k, "assignment": {str(k): int(v) for k, v in self.assignment.items()}}


def affinity(P: PredictionMatrix) -> np.ndarray:
    """Symmetrized prediction matrix with the diagonal dropped, scaled to max 1."""
    A = (P.values + P.values.T) / 2.0
    np.fill_diagonal(A, 0.0)
    top = A.max()
    return A / top if top > 0 else A


def spectral_embedding(A: np.ndarray, k: int) -> np.ndarray:
    """Row-normalized eigenvectors of the k smallest eigenvalues of the normalized Laplacian."""
    d = A.sum(axis=1)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    L = np.eye(len(A)) - inv_sqrt[:, None] * A * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh((L + L.T) / 2.0)
    U = vecs[:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    return U / np.where(norms > 0, norms, 1.0)


def spectral_cluster(P: PredictionMatrix, k: int, seed: int = 0) -> ClusterAssignment:
    """Spectral clustering of the labels of a prediction matrix.

    Cluster ids are renumbered in order of first appearance along the labels.
    """
    n = len(P)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot form {k} clusters from {n} labels")
    U = spectral_embedding(affinity(P), k)
    raw = KMeans(n_clusters=k, n_init=10, random_state=seed).fit_predict(U)
    remap: dict[int, int] = {}
    for r in raw:
        remap.setdefault(int(r), len(remap))
    return ClusterAssignment({lab: remap[int(r)] for lab, r in zip(P.labels, raw)}, k)


def purity(assignment: ClusterAssignment, truth: dict) -> float:
    """Fraction of items whose cluster's majority true group matches their own."""
    hits = 0
    for members in assignment.clusters():
        if members:
            _, counts = np.unique([truth[m] for m in members], return_counts=True)
            hits += counts.max()
    return hits / len(assignment.assignment)
