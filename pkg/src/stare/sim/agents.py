from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_DWELL_MEANS, SimConfig
from .world import SimWorld, rng_for


class InsufficientLocationsError(ValueError):
    pass


@dataclass
class AgentProfile:
    """One agent's hidden-state chain.

    ``states`` lists location indices; position 0 is always the home and
    position 1 the work place, followed by the allowed food and gym places.
    ``transition_matrix[i, j]`` is the probability of moving from
    ``states[i]`` to ``states[j]``.
    """

    agent_id: str
    subpop_id: int
    home: int
    work: int
    allowed_food: tuple[int, ...]
    allowed_gym: tuple[int, ...]
    transition_matrix: np.ndarray
    dwell_params: dict[str, tuple[float, float]]

    @property
    def states(self) -> tuple[int, ...]:
        return (self.home, self.work, *self.allowed_food, *self.allowed_gym)

    def state_category(self, i: int) -> str:
        if i == 0:
            return "home"
        if i == 1:
            return "work"
        return "food" if i < 2 + len(self.allowed_food) else "gym"

    def validate(self) -> None:
        P = self.transition_matrix
        n = len(self.states)
        if P.shape != (n, n):
            raise ValueError(f"transition matrix shape {P.shape} does not match {n} states")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("transition matrix rows must be non-negative and sum to 1")
        if len(set(self.states)) != n:
            raise ValueError("agent states must be distinct locations")

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "subpop_id": self.subpop_id,
            "home": self.home,
            "work": self.work,
            "allowed_food": list(self.allowed_food),
            "allowed_gym": list(self.allowed_gym),
            "transition_matrix": self.transition_matrix.tolist(),
            "dwell_params": {k: list(v) for k, v in self.dwell_params.items()},
        }


def subpop_sizes(n_agents: int, n_subpops: int, rng: np.random.Generator) -> list[int]:
    """Near-even split; the remainder goes to randomly chosen subpopulations."""
    base, rem = divmod(n_agents, n_subpops)
    sizes = np.full(n_subpops, base)
    sizes[rng.choice(n_subpops, size=rem, replace=False)] += 1
    return sizes.tolist()


def _lognormal_params(mean: float, sd: float) -> tuple[float, float]:
    return float(np.log(mean) - sd * sd / 2), float(sd)


def _dirichlet_rows(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    return np.stack([rng.dirichlet(a) for a in alpha])


def spawn_agents(world: SimWorld, config: SimConfig) -> list[AgentProfile]:
    """Draw subpopulations and per-agent transition matrices.

    Agents in a subpopulation share one work place, draw homes from one
    neighbourhood and pick food/gym places from a shared pool. Each row of a
    transition matrix mixes a subpopulation-level Dirichlet draw with an
    agent-level one (weight ``config.grouping``), is restricted to the agent's
    own places and renormalized. Away-from-home rows put concentration
    ``config.home_return_alpha`` on the home column (1 elsewhere), which keeps
    daily excursions short. The home row never returns to home, so every day
    contains at least one outing.
    """
    rng = rng_for(config.seed, "agents")
    works = world.by_category("work")
    foods = world.by_category("food")
    gyms = world.by_category("gym")
    if len(works) < config.n_subpops:
        raise InsufficientLocationsError(f"{len(works)} work places for {config.n_subpops} subpopulations")
    if len(world.home_clusters) < config.n_subpops:
        raise InsufficientLocationsError(
            f"{len(world.home_clusters)} home neighbourhoods for {config.n_subpops} subpopulations")
    sizes = subpop_sizes(config.n_agents, config.n_subpops, rng)
    subpop_work = rng.choice(works, size=config.n_subpops, replace=False)
    cluster_ids = rng.choice(len(world.home_clusters), size=config.n_subpops, replace=False)

    agents: list[AgentProfile] = []
    for s, size in enumerate(sizes):
        cluster = world.home_clusters[int(cluster_ids[s])]
        if len(cluster) < size:
            raise InsufficientLocationsError(
                f"subpopulation {s} needs {size} homes, neighbourhood has {len(cluster)}")
        homes = rng.choice(cluster, size=size, replace=False)
        food_pool = rng.choice(foods, size=min(config.food_pool, len(foods)), replace=False)
        gym_pool = rng.choice(gyms, size=min(config.gym_pool, len(gyms)), replace=False)
        # superset states: [home, work, pool foods..., pool gyms...]
        n_super = 2 + len(food_pool) + len(gym_pool)
        alpha = np.ones((n_super, n_super))
        alpha[1:, 0] = config.home_return_alpha
        group_rows = _dirichlet_rows(rng, alpha)
        for k in range(size):
            agent_id = f"a{len(agents):05d}"
            food_sel = np.sort(rng.choice(len(food_pool), size=min(config.foods_per_agent, len(food_pool)),
                                          replace=False))
            gym_sel = np.sort(rng.choice(len(gym_pool), size=min(config.gyms_per_agent, len(gym_pool)),
                                         replace=False))
            keep = np.r_[0, 1, 2 + food_sel, 2 + len(food_pool) + gym_sel]
            own_rows = _dirichlet_rows(rng, alpha)
            rows = config.grouping * group_rows + (1 - config.grouping) * own_rows
            P = rows[np.ix_(keep, keep)]
            P[0, 0] = 0.0
            P = P / P.sum(axis=1, keepdims=True)
            dwell = {}
            for cat, mean in DEFAULT_DWELL_MEANS.items():
                scale = float(np.exp(rng.normal(0.0, config.agent_dwell_sd)))
                dwell[cat] = _lognormal_params(mean * scale, config.dwell_log_sd)
            profile = AgentProfile(
                agent_id=agent_id,
                subpop_id=s,
                home=int(homes[k]),
                work=int(subpop_work[s]),
                allowed_food=tuple(int(food_pool[i]) for i in food_sel),
                allowed_gym=tuple(int(gym_pool[i]) for i in gym_sel),
                transition_matrix=P,
                dwell_params=dwell,
            )
            profile.validate()
            agents.append(profile)
    return agents
