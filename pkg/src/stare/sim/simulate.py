"""Hidden-Markov day itineraries interpolated along the road graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..traj.trajectory import DAY_SECONDS, RawTrajectory
from .agents import AgentProfile, spawn_agents
from .config import SimConfig
from .world import SimWorld, build_world, rng_for

log = logging.getLogger(__name__)

MIN_DWELL_S = 1200.0
MIN_EVENING_S = 3600.0
MORNING_RANGE_S = (5 * 3600.0, 10 * 3600.0)
MIN_MORNING_S = 3 * 3600.0


@dataclass
class DayPlan:
    day: int
    chain: list[int]  # state positions sampled by the chain, starting from home (0)
    stays: list[tuple[int, float, float]]  # (location, start, end), seconds since simulation start
    travel_seconds: float
    truncated: bool = False

    @property
    def dwell_seconds(self) -> float:
        return sum(e - s for _, s, e in self.stays)


@dataclass
class SimulatedAgent:
    profile: AgentProfile
    trajectory: RawTrajectory
    days: list[DayPlan] = field(default_factory=list)


def sample_excursion(P: np.ndarray, rng: np.random.Generator, max_steps: int = 10_000) -> list[int]:
    """States visited after leaving home (state 0) until the chain returns there."""
    cum = np.cumsum(P, axis=1)
    out: list[int] = []
    s = 0
    for _ in range(max_steps):
        s = int(np.searchsorted(cum[s], rng.random() * cum[s, -1], side="right"))
        s = min(s, P.shape[0] - 1)
        if s == 0:
            return out
        out.append(s)
    raise RuntimeError("excursion did not return home; is home reachable in the chain?")


def _draw_dwell(profile: AgentProfile, state: int, rng: np.random.Generator) -> float:
    mu, sd = profile.dwell_params[profile.state_category(state)]
    return float(np.exp(rng.normal(mu, sd)))


def plan_day(profile: AgentProfile, world: SimWorld, config: SimConfig, day: int,
             rng: np.random.Generator) -> DayPlan:
    """Lay out one day: overnight home stay, one chain excursion, evening at home.

    Out-of-home dwells are squeezed (never below ``MIN_DWELL_S``) so that stays
    plus travel fill exactly one day.
    """
    states = profile.states
    excursion = sample_excursion(profile.transition_matrix, rng)
    chain = [0, *excursion]

    runs: list[list] = []  # [state, dwell]; self-transitions extend the current stay
    for s in excursion:
        d = max(_draw_dwell(profile, s, rng), MIN_DWELL_S)
        if runs and runs[-1][0] == s:
            runs[-1][1] += d
        else:
            runs.append([s, d])
    mu, sd = profile.dwell_params["home"]
    morning = float(np.clip(np.exp(rng.normal(mu, sd)), *MORNING_RANGE_S))

    truncated = False
    while True:
        locs = [profile.home, *(states[s] for s, _ in runs), profile.home]
        legs = [world.route_length(a, b) / config.speed_mps for a, b in zip(locs, locs[1:])] if runs else []
        travel = float(sum(legs))
        dwells = np.array([d for _, d in runs], dtype=float)
        avail = DAY_SECONDS - morning - MIN_EVENING_S - travel
        floor = MIN_DWELL_S * len(runs)
        if dwells.sum() > avail and avail < floor:
            morning = max(MIN_MORNING_S, DAY_SECONDS - MIN_EVENING_S - travel - floor)
            avail = DAY_SECONDS - morning - MIN_EVENING_S - travel
        if avail >= floor:
            break
        runs.pop()  # pathological excursion: drop trailing stops until the day fits
        truncated = True
    if dwells.sum() > avail:
        lam = (avail - floor) / (dwells.sum() - floor)
        dwells = MIN_DWELL_S + (dwells - MIN_DWELL_S) * lam

    t0 = day * DAY_SECONDS
    stays = [(profile.home, float(t0), t0 + morning)]
    t = t0 + morning
    for (s, _), d, leg in zip(runs, dwells, legs):
        t += leg
        stays.append((states[s], t, t + float(d)))
        t += float(d)
    if runs:
        t += legs[-1]
    stays.append((profile.home, t, float(t0 + DAY_SECONDS)))
    return DayPlan(day=day, chain=chain, stays=stays, travel_seconds=travel, truncated=truncated)


def _truncated_noise(rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    """Isotropic Gaussian offsets, redrawn until within 3 sigma of the origin."""
    out = rng.normal(0.0, sigma, size=(n, 2))
    bad = np.hypot(out[:, 0], out[:, 1]) > 3 * sigma
    while bad.any():
        out[bad] = rng.normal(0.0, sigma, size=(int(bad.sum()), 2))
        bad = np.hypot(out[:, 0], out[:, 1]) > 3 * sigma
    return out


def simulate_agent_detailed(profile: AgentProfile, world: SimWorld, config: SimConfig) -> SimulatedAgent:
    profile.validate()
    rng = rng_for(config.seed, "agent", profile.agent_id)
    days = [plan_day(profile, world, config, d, rng) for d in range(config.n_days)]
    if any(p.truncated for p in days):
        log.warning("agent %s: %d day(s) truncated to fit", profile.agent_id, sum(p.truncated for p in days))

    rel_t = np.arange(0, config.n_days * DAY_SECONDS, config.sample_interval, dtype=np.int64)
    xy = np.empty((rel_t.size, 2))
    locs = world.locations
    for plan in days:
        stays = plan.stays
        for k, (loc, s, e) in enumerate(stays):
            lo, hi = np.searchsorted(rel_t, [s, e], side="left")
            xy[lo:hi] = (locs[loc].x, locs[loc].y)
            if k + 1 < len(stays):
                nxt_loc, ns, _ = stays[k + 1]
                lo, hi = np.searchsorted(rel_t, [e, ns], side="left")
                if hi > lo:
                    path = world.route(loc, nxt_loc)
                    seg = np.hypot(*np.diff(path, axis=0).T)
                    cum = np.r_[0.0, np.cumsum(seg)]
                    dist = (rel_t[lo:hi] - e) / (ns - e) * cum[-1]
                    xy[lo:hi, 0] = np.interp(dist, cum, path[:, 0])
                    xy[lo:hi, 1] = np.interp(dist, cum, path[:, 1])
    xy += _truncated_noise(rng, rel_t.size, config.gps_noise_m)
    lat, lon = world.to_latlon(xy[:, 0], xy[:, 1])
    traj = RawTrajectory(profile.agent_id, lat, lon, rel_t + config.start_epoch)
    return SimulatedAgent(profile=profile, trajectory=traj, days=days)


def simulate_agent(profile: AgentProfile, world: SimWorld, config: SimConfig) -> RawTrajectory:
    return simulate_agent_detailed(profile, world, config).trajectory


def world_for(config: SimConfig) -> SimWorld:
    return build_world(
        config.location_counts(),
        config.extent_km,
        config.seed,
        n_home_clusters=config.n_subpops,
        home_cluster_radius_m=config.home_cluster_radius_m,
    )


@dataclass
class Simulation:
    config: SimConfig
    world: SimWorld
    agents: list[SimulatedAgent]

    @property
    def trajectories(self) -> list[RawTrajectory]:
        return [a.trajectory for a in self.agents]

    @property
    def labels(self) -> dict[str, int]:
        return {a.profile.agent_id: a.profile.subpop_id for a in self.agents}


def run_simulation(config: SimConfig) -> Simulation:
    world = world_for(config)
    profiles = spawn_agents(world, config)
    return Simulation(config, world, [simulate_agent_detailed(p, world, config) for p in profiles])
