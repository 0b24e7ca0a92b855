"""Day-stepped stochastic SIR process over a dynamic contact network.

Each simulated day, every susceptible user collects the day's links whose
host is currently infectious, a removal rate is drawn per link, the link
doses are summed and one Bernoulli draw decides infection. New infections
start transmitting the next day (the one-day latency) and recover once their
assigned infectious period has elapsed. Seed users transmit from day 0.

Daily counts follow the convention that new infections are attributed to the
day of the causing exposure, and prevalence counts everyone currently
infected including that day's not-yet-transmitting new cases, so
prevalence(d) = prevalence(d-1) + new_infections(d) - new_recoveries(d).

Randomness is organised as named substreams derived from
(rng_seed, run, stream, day), so results are reproducible for any worker
count and unaffected by unrelated parameter changes.
"""

from __future__ import annotations

import os
import weakref
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from ._kernel import batch_link_exposure
from .exposure import (
    DEFAULT_GENERATION_RATE,
    DEFAULT_PROXIMITY_VOLUME,
    DEFAULT_PULMONARY_RATE,
    DEFAULT_SIGMA,
)
from .network import DynamicContactNetwork

SUSCEPTIBLE = 0
INFECTED = 1
RECOVERED = 2

_STREAM_INIT = 0
_STREAM_TAU = 1
_STREAM_REMOVAL = 2
_STREAM_INFECTION = 3

TAU_MODES = ("uniform", "mean3")


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of one Monte-Carlo simulation batch.

    ``r_t`` is the median particle removal time in minutes; per evaluated
    link the removal time is drawn from ``b_range`` with that median and the
    removal rate is its reciprocal. ``tau_mode`` selects how the infectious
    period is drawn from ``tau_range``: 'uniform' over the integer range, or
    'mean3' pinning it to the lower bound.
    """

    seeds: int = 500
    horizon_days: int = 32
    r_t: float = 60.0
    b_range: tuple[float, float] = (7.5, 300.0)
    sigma: float = DEFAULT_SIGMA
    tau_range: tuple[int, int] = (3, 5)
    tau_mode: str = "uniform"
    rng_seed: int = 0
    runs: int = 1
    g: float = DEFAULT_GENERATION_RATE
    V: float = DEFAULT_PROXIMITY_VOLUME
    p: float = DEFAULT_PULMONARY_RATE

    def __post_init__(self):
        lo, hi = self.b_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid removal-time bounds {self.b_range!r}")
        if not lo <= self.r_t <= hi:
            raise ValueError(
                f"median removal time {self.r_t} outside bounds {self.b_range}"
            )
        if self.seeds < 0:
            raise ValueError("seeds must be non-negative")
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        tlo, thi = self.tau_range
        if tlo < 1 or thi < tlo:
            raise ValueError(f"invalid infectious-period range {self.tau_range!r}")
        if self.tau_mode not in TAU_MODES:
            raise ValueError(f"tau_mode must be one of {TAU_MODES}")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        for name in ("g", "V", "p"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


class IndividualState(NamedTuple):
    """Status snapshot of one user (status, infection day, infectious period)."""

    status: int
    day_infected: int | None
    tau: int | None


@dataclass
class PopulationState:
    """Array-backed state of every user: status, infection day, period."""

    status: np.ndarray  # int8: SUSCEPTIBLE/INFECTED/RECOVERED
    day_infected: np.ndarray  # int64; -1 while never infected
    tau: np.ndarray  # int64; 0 while unset

    @classmethod
    def initial(cls, n_users: int) -> "PopulationState":
        return cls(
            status=np.zeros(n_users, dtype=np.int8),
            day_infected=np.full(n_users, -1, dtype=np.int64),
            tau=np.zeros(n_users, dtype=np.int64),
        )

    def copy(self) -> "PopulationState":
        return PopulationState(
            self.status.copy(), self.day_infected.copy(), self.tau.copy()
        )

    def individual(self, i: int) -> IndividualState:
        infected_ever = self.day_infected[i] >= 0
        return IndividualState(
            int(self.status[i]),
            int(self.day_infected[i]) if infected_ever else None,
            int(self.tau[i]) if infected_ever else None,
        )

    def counts(self) -> tuple[int, int, int]:
        return (
            int(np.count_nonzero(self.status == SUSCEPTIBLE)),
            int(np.count_nonzero(self.status == INFECTED)),
            int(np.count_nonzero(self.status == RECOVERED)),
        )


@dataclass(frozen=True)
class DailyStats:
    """One day's counts: new infections, new recoveries, prevalence."""

    day: int
    new_infections: int
    new_recoveries: int
    prevalence: int


@dataclass(frozen=True)
class DayStreams:
    """Named random substreams used within one simulated day of one run."""

    tau: np.random.Generator
    removal: np.random.Generator
    infection: np.random.Generator

    @classmethod
    def derive(cls, rng_seed: int, run: int, day: int) -> "DayStreams":
        def gen(stream: int) -> np.random.Generator:
            return np.random.default_rng(
                np.random.SeedSequence((rng_seed, run, stream, day))
            )

        return cls(
            tau=gen(_STREAM_TAU),
            removal=gen(_STREAM_REMOVAL),
            infection=gen(_STREAM_INFECTION),
        )


def removal_rate_from_time(b: float) -> float:
    """Removal rate (per minute) for a removal time of b minutes."""
    if not b > 0:
        raise ValueError(f"removal time must be positive, got {b!r}")
    return 1.0 / b


def _sample_removal_times(
    r_t: float, b_range: tuple[float, float], rng: np.random.Generator, n: int
) -> np.ndarray:
    """Draw removal times with median r_t: a fair coin picks the half-range,
    then a uniform draw within it."""
    lo, hi = b_range
    side = rng.random(n) < 0.5
    u = rng.random(n)
    return np.where(side, lo + u * (r_t - lo), r_t + u * (hi - r_t))


def sample_removal_rate(
    r_t: float, b_range: tuple[float, float], rng: np.random.Generator
) -> float:
    """Draw one removal rate (per minute) whose underlying time has median r_t."""
    lo, hi = b_range
    if not lo <= r_t <= hi:
        raise ValueError(f"median removal time {r_t} outside bounds {b_range}")
    return removal_rate_from_time(float(_sample_removal_times(r_t, b_range, rng, 1)[0]))


class _DayLinks(NamedTuple):
    host: np.ndarray
    nbr: np.ndarray
    t_s: np.ndarray
    t_l: np.ndarray
    t_s_n: np.ndarray
    t_l_n: np.ndarray


_EMPTY_DAY = _DayLinks(*(np.empty(0, dtype=np.int64) for _ in range(2)),
                       *(np.empty(0, dtype=np.float64) for _ in range(4)))

_VIEW_CACHE: "weakref.WeakKeyDictionary[DynamicContactNetwork, list[_DayLinks]]"
_VIEW_CACHE = weakref.WeakKeyDictionary()


def _day_views(net: DynamicContactNetwork) -> list[_DayLinks]:
    """Per-day link arrays with float64 timestamps, cached per network."""
    views = _VIEW_CACHE.get(net)
    if views is None:
        views = []
        for day in range(net.horizon):
            sl = net.day_slice(day)
            if sl.stop == sl.start:
                views.append(_EMPTY_DAY)
            else:
                views.append(_DayLinks(
                    net.host[sl], net.nbr[sl],
                    net.t_s[sl].astype(np.float64), net.t_l[sl].astype(np.float64),
                    net.t_s_n[sl].astype(np.float64), net.t_l_n[sl].astype(np.float64),
                ))
        _VIEW_CACHE[net] = views
    return views


def _draw_tau(rng: np.random.Generator, n: int, cfg: SimulationConfig) -> np.ndarray:
    lo, hi = cfg.tau_range
    if cfg.tau_mode == "uniform":
        return rng.integers(lo, hi + 1, size=n, dtype=np.int64)
    return np.full(n, lo, dtype=np.int64)


def _step_inplace(
    views: list[_DayLinks],
    state: PopulationState,
    day: int,
    cfg: SimulationConfig,
    streams: DayStreams,
) -> DailyStats:
    status, day_infected, tau = state.status, state.day_infected, state.tau

    # recoveries first: an individual whose period elapsed today no longer
    # transmits today
    infected = status == INFECTED
    due = infected & (day - day_infected >= tau)
    n_recovered = int(np.count_nonzero(due))
    if n_recovered:
        status[due] = RECOVERED

    n_new = 0
    links = views[day] if day < len(views) else _EMPTY_DAY
    if links.host.size:
        transmitting = (status == INFECTED) & (day_infected <= day)
        sel = transmitting[links.host] & (status[links.nbr] == SUSCEPTIBLE)
        idx = np.flatnonzero(sel)
        if idx.size:
            b = _sample_removal_times(cfg.r_t, cfg.b_range, streams.removal, idx.size)
            doses = batch_link_exposure(
                links.t_s[idx], links.t_l[idx],
                links.t_s_n[idx], links.t_l_n[idx],
                1.0 / b, cfg.g, cfg.V, cfg.p,
            )
            totals = np.bincount(links.nbr[idx], weights=doses,
                                 minlength=status.shape[0])
            exposed = np.flatnonzero(totals > 0.0)
            if exposed.size:
                p_inf = -np.expm1(-cfg.sigma * totals[exposed])
                u = streams.infection.random(exposed.size)
                newly = exposed[u < p_inf]
                if newly.size:
                    status[newly] = INFECTED
                    day_infected[newly] = day + 1  # latent until tomorrow
                    tau[newly] = _draw_tau(streams.tau, newly.size, cfg)
                    n_new = int(newly.size)

    prevalence = int(np.count_nonzero(status == INFECTED))
    return DailyStats(day, n_new, n_recovered, prevalence)


def step_day(
    net: DynamicContactNetwork,
    states: PopulationState,
    day: int,
    cfg: SimulationConfig,
    rng: DayStreams,
) -> tuple[PopulationState, DailyStats]:
    """Advance one day; returns the new state and the day's counts."""
    if day < 0 or day >= cfg.horizon_days:
        raise ValueError(f"day {day} outside [0, {cfg.horizon_days})")
    new_state = states.copy()
    stats = _step_inplace(_day_views(net), new_state, day, cfg, rng)
    return new_state, stats


def seeded_state(
    n_users: int, cfg: SimulationConfig, run: int
) -> PopulationState:
    """Initial state with seed users infectious from day 0."""
    if cfg.seeds > n_users:
        raise ValueError(f"seeds={cfg.seeds} exceeds population {n_users}")
    state = PopulationState.initial(n_users)
    if cfg.seeds:
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.rng_seed, run, _STREAM_INIT))
        )
        chosen = rng.choice(n_users, size=cfg.seeds, replace=False)
        state.status[chosen] = INFECTED
        state.day_infected[chosen] = 0
        state.tau[chosen] = _draw_tau(rng, cfg.seeds, cfg)
    return state


def _simulate_run(
    views: list[_DayLinks], n_users: int, cfg: SimulationConfig, run: int
) -> list[DailyStats]:
    state = seeded_state(n_users, cfg, run)
    out = []
    for day in range(cfg.horizon_days):
        streams = DayStreams.derive(cfg.rng_seed, run, day)
        out.append(_step_inplace(views, state, day, cfg, streams))
    return out


_POOL_STATE: dict = {}


def _pool_init(views, n_users, cfg):
    _POOL_STATE["views"] = views
    _POOL_STATE["n_users"] = n_users
    _POOL_STATE["cfg"] = cfg


def _pool_run(run: int) -> list[DailyStats]:
    return _simulate_run(
        _POOL_STATE["views"], _POOL_STATE["n_users"], _POOL_STATE["cfg"], run
    )


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else SPDT_WORKERS, else 1."""
    if workers is None:
        workers = int(os.environ.get("SPDT_WORKERS", "1"))
    if workers < 1:
        raise ValueError("worker count must be at least 1")
    return workers


def run_simulation(
    net: DynamicContactNetwork,
    cfg: SimulationConfig,
    workers: int | None = None,
) -> list[list[DailyStats]]:
    """Run the configured number of independent runs; one stats list per run.

    Outputs are fully determined by (network, config); the worker count only
    changes scheduling.
    """
    if cfg.seeds > net.n_users:
        raise ValueError(f"seeds={cfg.seeds} exceeds population {net.n_users}")
    workers = resolve_workers(workers)
    views = _day_views(net)
    if workers == 1 or cfg.runs == 1:
        return [_simulate_run(views, net.n_users, cfg, run) for run in range(cfg.runs)]
    with ProcessPoolExecutor(
        max_workers=min(workers, cfg.runs),
        initializer=_pool_init,
        initargs=(views, net.n_users, cfg),
    ) as pool:
        return list(pool.map(_pool_run, range(cfg.runs), chunksize=8))


def write_daily_csv(runs_stats: Iterable[list[DailyStats]], path) -> None:
    """Write per-run daily counts as `run,day,I_n,I_r,I_p` rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("run,day,I_n,I_r,I_p\n")
        for run, stats in enumerate(runs_stats):
            for s in stats:
                fh.write(f"{run},{s.day},{s.new_infections},"
                         f"{s.new_recoveries},{s.prevalence}\n")
