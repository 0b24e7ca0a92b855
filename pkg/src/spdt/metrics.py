"""Reproduction-number series, run aggregates and network-structure metrics.

The daily reproduction ratio is the day's new infections divided by the
day's recoveries, defined only on days with at least one recovery; the
run-level value is the mean of the defined days. Structure metrics are
computed on unweighted graphs thresholded on per-link inhaled dose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._kernel import batch_link_exposure
from .epidemic import DailyStats
from .exposure import (
    DEFAULT_GENERATION_RATE,
    DEFAULT_PROXIMITY_VOLUME,
    DEFAULT_PULMONARY_RATE,
)
from .network import DynamicContactNetwork

DEFAULT_EDGE_THRESHOLD = 0.01  # PFU


@dataclass(frozen=True)
class ReproductionSeries:
    """Per-day reproduction ratios and their run-level mean.

    ``daily`` maps day index to new_infections/new_recoveries for days with
    recoveries; ``effective`` is the mean of those values, or None when no
    day had a recovery (undefined, never coerced to zero).
    """

    daily: dict[int, float]
    effective: float | None


def reproduction_series(stats: Sequence[DailyStats]) -> ReproductionSeries:
    """Daily infection/recovery ratios for one run."""
    daily: dict[int, float] = {}
    for s in stats:
        if s.new_recoveries > 0:
            daily[s.day] = s.new_infections / s.new_recoveries
    effective = sum(daily.values()) / len(daily) if daily else None
    return ReproductionSeries(daily=daily, effective=effective)


def outbreak_size(stats: Sequence[DailyStats]) -> int:
    """Total infections caused over the run (seed users not counted)."""
    return sum(s.new_infections for s in stats)


def initial_reproduction(series: ReproductionSeries) -> float | None:
    """Reproduction ratio of the earliest day on which it is defined."""
    if not series.daily:
        return None
    return series.daily[min(series.daily)]


class StaticGraph:
    """Unweighted undirected graph over a fixed node universe."""

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]]):
        self.nodes: tuple[str, ...] = tuple(sorted(set(nodes)))
        node_set = set(self.nodes)
        adj: dict[str, set[str]] = {u: set() for u in self.nodes}
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u!r}")
            if u not in node_set or v not in node_set:
                raise ValueError(f"edge ({u!r}, {v!r}) leaves the node universe")
            adj[u].add(v)
            adj[v].add(u)
        self._adj = adj

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self._adj.values()) // 2

    def degree(self, node: str) -> int:
        return len(self._adj[node])

    def neighbours(self, node: str) -> frozenset[str]:
        return frozenset(self._adj[node])

    def edges(self) -> set[tuple[str, str]]:
        return {
            (u, v) if u < v else (v, u)
            for u, nbrs in self._adj.items()
            for v in nbrs
        }

    def has_edge(self, u: str, v: str) -> bool:
        return v in self._adj.get(u, ())


def _edge_set(
    net: DynamicContactNetwork,
    link_mask: np.ndarray,
    r_t: float,
    threshold: float,
    g: float,
    V: float,
    p: float,
) -> set[tuple[str, str]]:
    """Undirected edges between users with at least one above-threshold link."""
    idx = np.flatnonzero(link_mask)
    if idx.size == 0:
        return set()
    r = np.full(idx.size, 1.0 / r_t)
    doses = batch_link_exposure(
        net.t_s[idx].astype(np.float64), net.t_l[idx].astype(np.float64),
        net.t_s_n[idx].astype(np.float64), net.t_l_n[idx].astype(np.float64),
        r, g, V, p,
    )
    strong = idx[doses >= threshold]
    edges = set()
    for h, n in zip(net.host[strong].tolist(), net.nbr[strong].tolist()):
        u, v = net.users[h], net.users[n]
        edges.add((u, v) if u < v else (v, u))
    return edges


def _check_universe(net: DynamicContactNetwork, universe) -> tuple[str, ...]:
    if universe is None:
        return net.users
    universe = tuple(sorted(set(universe)))
    missing = set(net.users) - set(universe)
    if missing:
        raise ValueError(f"universe misses {len(missing)} users present in the network")
    return universe


def static_graph(
    net: DynamicContactNetwork,
    r_t: float = 60.0,
    threshold: float = DEFAULT_EDGE_THRESHOLD,
    g: float = DEFAULT_GENERATION_RATE,
    V: float = DEFAULT_PROXIMITY_VOLUME,
    p: float = DEFAULT_PULMONARY_RATE,
    universe: Iterable[str] | None = None,
) -> StaticGraph:
    """Whole-horizon graph: an edge wherever any link's dose reaches the threshold.

    The dose is evaluated at the removal rate corresponding to the median
    removal time ``r_t``. Pass a ``universe`` superset to compare variants of
    the same trace over a common node set.
    """
    nodes = _check_universe(net, universe)
    mask = np.ones(net.n_links, dtype=bool)
    return StaticGraph(nodes, _edge_set(net, mask, r_t, threshold, g, V, p))


def degree_distribution(graph: StaticGraph) -> dict[int, int]:
    """Histogram of node degrees; counts sum to the node count."""
    hist: dict[int, int] = {}
    for node in graph.nodes:
        d = graph.degree(node)
        hist[d] = hist.get(d, 0) + 1
    return hist


def clustering_distribution(graph: StaticGraph) -> tuple[dict[str, float], float]:
    """Local clustering per node and the mean over all nodes.

    c(v) = 2 T(v) / (d(v) (d(v)-1)) with T(v) the triangles through v;
    nodes of degree below two get zero.
    """
    coeffs: dict[str, float] = {}
    for node in graph.nodes:
        nbrs = graph.neighbours(node)
        d = len(nbrs)
        if d < 2:
            coeffs[node] = 0.0
            continue
        closed = 0
        for u in nbrs:
            closed += len(graph.neighbours(u) & nbrs)
        # each triangle through node counted twice in the sum
        coeffs[node] = closed / (d * (d - 1))
    mean = sum(coeffs.values()) / len(coeffs) if coeffs else 0.0
    return coeffs, mean


@dataclass(frozen=True)
class DailyMetricsRow:
    day: int
    r_t: float
    mean_degree: float
    mean_clustering: float


def daily_network_metrics(
    net: DynamicContactNetwork,
    r_t_values: Sequence[float],
    threshold: float = DEFAULT_EDGE_THRESHOLD,
    g: float = DEFAULT_GENERATION_RATE,
    V: float = DEFAULT_PROXIMITY_VOLUME,
    p: float = DEFAULT_PULMONARY_RATE,
    universe: Iterable[str] | None = None,
) -> list[DailyMetricsRow]:
    """One aggregated graph per day per r_t; mean degree and clustering over
    the universe (absent users count as isolated)."""
    nodes = _check_universe(net, universe)
    rows = []
    for day in range(net.horizon):
        sl = net.day_slice(day)
        mask = np.zeros(net.n_links, dtype=bool)
        mask[sl] = True
        for r_t in r_t_values:
            graph = StaticGraph(nodes, _edge_set(net, mask, r_t, threshold, g, V, p))
            _, mean_clust = clustering_distribution(graph)
            mean_deg = 2.0 * graph.n_edges / graph.n_nodes if graph.n_nodes else 0.0
            rows.append(DailyMetricsRow(day, r_t, mean_deg, mean_clust))
    return rows


@dataclass(frozen=True)
class RunSummary:
    run: int
    outbreak_size: int
    effective: float | None
    initial: float | None


def run_summaries(runs_stats: Sequence[Sequence[DailyStats]]) -> list[RunSummary]:
    out = []
    for run, stats in enumerate(runs_stats):
        series = reproduction_series(stats)
        out.append(RunSummary(
            run, outbreak_size(stats), series.effective, initial_reproduction(series)
        ))
    return out


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_summary_csv(runs_stats: Sequence[Sequence[DailyStats]], path) -> None:
    """Write per-run aggregates as `run,outbreak_size,R_e` rows (empty R_e when
    undefined)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("run,outbreak_size,R_e\n")
        for s in run_summaries(runs_stats):
            fh.write(f"{s.run},{s.outbreak_size},{_fmt(s.effective)}\n")


def write_daily_metrics_csv(rows: Sequence[DailyMetricsRow], variant: str, path) -> None:
    """Write `day,mean_degree,mean_clustering,r_t,variant` rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("day,mean_degree,mean_clustering,r_t,variant\n")
        for row in rows:
            fh.write(f"{row.day},{row.mean_degree!r},{row.mean_clustering!r},"
                     f"{row.r_t!r},{variant}\n")


def write_histogram_csv(hist: dict, path) -> None:
    """Write a `value,count` histogram sorted by value."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("value,count\n")
        for value in sorted(hist):
            fh.write(f"{value},{hist[value]}\n")
