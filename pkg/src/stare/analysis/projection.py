from __future__ import annotations

import numpy as np


def pca_2d(X: np.ndarray) -> np.ndarray:
    """First two principal-component scores.

    Each component's sign is fixed so its largest-magnitude loading is
    positive. Missing components (rank below 2) come back as zeros.
    """
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    out = np.zeros((len(X), 2))
    tol = s.max() * max(X.shape) * np.finfo(float).eps if s.size else 0.0
    for j in range(min(2, len(s))):
        if s[j] <= tol:
            break
        v = vt[j]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out[:, j] = Xc @ v
    return out


def project_2d(embeddings: np.ndarray, method: str = "pca", seed: int = 0) -> np.ndarray:
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2 or len(X) < 3:
        raise ValueError("need an (n, K) matrix with n >= 3")
    if method == "pca":
        return pca_2d(X)
    if method == "tsne":
        from sklearn.manifold import TSNE

        perplexity = min(30.0, (len(X) - 1) / 3.0)
        Y = TSNE(n_components=2, perplexity=perplexity, init="pca", random_state=seed).fit_transform(X)
        return Y - Y.mean(axis=0)
    raise ValueError(f"unknown projection method {method!r}")
