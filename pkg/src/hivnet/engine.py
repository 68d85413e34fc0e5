"""Discrete-event scheduler driving the yearly operators.

Events are ordered by ``(time, priority, ordinal)``: simulation time in
years since ``start_year``, then priority (lower first), then insertion
order. The four yearly operators re-schedule themselves after they run.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import network as net
from .params import ModelParams
from .population import Stage, progress
from .stats import STAT_FIELDS, YearStats, collect_year_stats
from .stochastic import Purpose, RandomStream
from .transmission import infection_step

__all__ = [
    "ScheduledEvent",
    "SimulationState",
    "SimulationError",
    "EnsembleError",
    "EnsembleResult",
    "OPERATOR_PRIORITIES",
    "register_action",
    "new_state",
    "register_operators",
    "schedule",
    "schedule_special",
    "run_until",
    "run",
    "run_single",
    "aggregate",
    "run_ensemble",
]

Action = Union[str, Callable[["SimulationState"], None]]

OPERATOR_PRIORITIES = {
    "infection": 0,
    "progression": 1,
    "demography": 2,
    "statistics": 3,
}


class SimulationError(RuntimeError):
    pass


@dataclass(order=True)
class ScheduledEvent:
    time: float
    priority: int
    ordinal: int
    action: Action = field(compare=False)
    # re-schedule this far ahead after executing; None for one-shot events
    interval: float | None = field(default=None, compare=False)

    @property
    def name(self) -> str:
        return self.action if isinstance(self.action, str) else getattr(
            self.action, "__name__", repr(self.action))


@dataclass
class SimulationState:
    params: ModelParams
    network: net.ContactNetwork
    streams: dict[int, RandomStream]
    run_index: int = 0
    master_seed: int = 0
    clock: float = 0.0
    completed_through: int = -1
    ordinal: int = 0
    pending: list[ScheduledEvent] = field(default_factory=list)
    stats_log: list[YearStats] = field(default_factory=list)
    new_infections: int = 0
    new_aids: int = 0
    trace: list[tuple[float, int, str]] = field(default_factory=list)
    registered: bool = False

    @property
    def start_year(self) -> int:
        return self.params.run.start_year

    def calendar_year(self, time: float | None = None) -> int:
        return self.start_year + int(math.floor(self.clock if time is None else time))

    def stream(self, purpose: int) -> RandomStream:
        return self.streams[purpose]


# --- operators -------------------------------------------------------------

def _op_infection(state: SimulationState) -> None:
    network = state.network
    network.step = int(state.clock)
    p = state.params
    new = infection_step(network, p.transmission, p.risk, state.calendar_year(),
                         state.stream(Purpose.INFECTION))
    state.new_infections += len(new)


def _op_progression(state: SimulationState) -> None:
    year = state.calendar_year()
    cascade = state.params.cascade
    stream = state.stream(Purpose.PROGRESSION)
    entered_aids = 0
    for agent in state.network.agents.values():
        before = agent.stage
        progress(agent, year, cascade, stream)
        if agent.stage == Stage.AIDS and before != Stage.AIDS:
            entered_aids += 1
    net.advance_partnerships(state.network)
    state.new_aids += entered_aids


def _op_demography(state: SimulationState) -> None:
    params = state.params.network
    stream = state.stream(Purpose.DEMOGRAPHY)
    net.demographic_step(state.network, params, stream)
    if len(state.network) != params.n_zero:
        raise SimulationError(f"population {len(state.network)} != n_zero {params.n_zero}")
    net.reshuffle(state.network, params, stream)


def _op_statistics(state: SimulationState) -> None:
    state.stats_log.append(collect_year_stats(
        state.network, state.new_infections, state.new_aids, state.calendar_year()))
    state.new_infections = 0
    state.new_aids = 0


ACTIONS: dict[str, Callable[[SimulationState], None]] = {
    "infection": _op_infection,
    "progression": _op_progression,
    "demography": _op_demography,
    "statistics": _op_statistics,
}


def register_action(name: str, fn: Callable[[SimulationState], None] | None = None):
    """Register a named action so events using it can be checkpointed.

    Usable as a decorator: ``@register_action("parade")``.
    """
    def deco(f):
        if name in ACTIONS and ACTIONS[name] is not f:
            raise ValueError(f"action {name!r} already registered")
        ACTIONS[name] = f
        return f
    return deco(fn) if fn is not None else deco


# --- scheduling ------------------------------------------------------------

def new_state(params: ModelParams | None = None, run_index: int = 0,
              master_seed: int | None = None) -> SimulationState:
    """Build the initial network and streams for one run (no events queued)."""
    params = params or ModelParams()
    seed = params.run.seed if master_seed is None else master_seed
    streams = {p: RandomStream(seed, run_index, p)
               for p in (Purpose.BUILD, Purpose.INFECTION, Purpose.PROGRESSION, Purpose.DEMOGRAPHY)}
    network = net.build_network(params.network, params.run.start_year,
                                params.run.initial_positive_count, streams[Purpose.BUILD],
                                params.cascade)
    return SimulationState(params=params, network=network, streams=streams,
                           run_index=run_index, master_seed=seed)


def schedule(state: SimulationState, time: float, priority: int, action: Action,
             interval: float | None = None) -> ScheduledEvent:
    if time < state.clock:
        raise ValueError(f"cannot schedule at {time}: clock is already at {state.clock}")
    if isinstance(action, str) and action not in ACTIONS:
        raise KeyError(f"unknown action {action!r}")
    event = ScheduledEvent(float(time), int(priority), state.ordinal, action, interval)
    state.ordinal += 1
    heapq.heappush(state.pending, event)
    return event


def register_operators(state: SimulationState, statistics: bool = True) -> SimulationState:
    """Queue the yearly operators; statistics also run once at time 0."""
    if state.registered:
        raise ValueError("operators already registered for this state")
    interval = state.params.run.stats_interval
    for name in ("infection", "progression", "demography"):
        schedule(state, 1.0, OPERATOR_PRIORITIES[name], name, 1.0)
    if statistics:
        schedule(state, 0.0, OPERATOR_PRIORITIES["statistics"], "statistics", float(interval))
    state.registered = True
    return state


def schedule_special(state: SimulationState, time: float, priority: int,
                     action: Action) -> ScheduledEvent:
    """One-shot event at an arbitrary (possibly fractional) simulation time."""
    return schedule(state, time, priority, action)


def _execute(state: SimulationState, event: ScheduledEvent) -> None:
    if event.time < state.clock:
        raise SimulationError(f"clock would move backwards: {event.time} < {state.clock}")
    state.clock = event.time
    fn = ACTIONS[event.action] if isinstance(event.action, str) else event.action
    try:
        fn(state)
    except SimulationError:
        raise
    except Exception as exc:
        raise SimulationError(
            f"year {state.calendar_year()}: operator {event.name!r} failed: {exc}") from exc
    state.trace.append((event.time, event.priority, event.name))
    if event.interval is not None:
        schedule(state, event.time + event.interval, event.priority, event.action, event.interval)


def run_until(state: SimulationState, time: float) -> SimulationState:
    """Execute every pending event with ``event.time <= time``."""
    pending = state.pending
    while pending and pending[0].time <= time:
        _execute(state, heapq.heappop(pending))
    return state


def run(state: SimulationState, end_year: int,
        on_year: Callable[[SimulationState, int], None] | None = None) -> SimulationState:
    """Advance to the end of ``end_year``.

    ``on_year(state, t)`` is called after all events at or before integer
    time ``t`` have executed, which is an event boundary and therefore a
    safe checkpoint point.
    """
    if end_year < state.start_year:
        raise ValueError(f"end_year {end_year} precedes start_year {state.start_year}")
    if not state.registered:
        register_operators(state)
    horizon = end_year - state.start_year
    for t in range(state.completed_through + 1, horizon + 1):
        run_until(state, float(t))
        state.completed_through = t
        if on_year is not None:
            on_year(state, t)
    return state


# --- ensembles -------------------------------------------------------------

def run_single(params: ModelParams, run_index: int, master_seed: int,
               end_year: int | None = None) -> list[YearStats]:
    state = new_state(params, run_index, master_seed)
    run(state, params.run.end_year if end_year is None else end_year)
    return state.stats_log


class EnsembleError(RuntimeError):
    def __init__(self, failures: dict[int, BaseException]):
        self.failures = failures
        detail = "; ".join(f"run {i}: {exc}" for i, exc in sorted(failures.items()))
        super().__init__(f"{len(failures)} ensemble run(s) failed: {detail}")


@dataclass
class EnsembleResult:
    """Per-year summary across runs; ``summary[field][stat]`` is an array over years."""

    years: list[int]
    runs: list[list[YearStats]]
    summary: dict[str, dict[str, np.ndarray]]

    def series(self, name: str, stat: str = "mean") -> dict[int, float]:
        return dict(zip(self.years, self.summary[name][stat].tolist()))


def aggregate(runs: list[list[YearStats]]) -> EnsembleResult:
    if not runs:
        raise ValueError("no runs to aggregate")
    years = [s.calendar_year for s in runs[0]]
    for i, log in enumerate(runs):
        if [s.calendar_year for s in log] != years:
            raise ValueError(f"run {i} covers different years")
    summary = {}
    for name in STAT_FIELDS:
        values = np.array([[getattr(s, name) for s in log] for log in runs], dtype=float)
        summary[name] = {
            "mean": values.mean(axis=0),
            "sd": values.std(axis=0),
            "min": values.min(axis=0),
            "max": values.max(axis=0),
        }
    return EnsembleResult(years, runs, summary)


def _run_job(job):
    params, index, seed = job
    try:
        return index, run_single(params, index, seed), None
    except Exception as exc:  # reported with the run index by the caller
        return index, None, exc


def run_ensemble(params: ModelParams | None = None, n_runs: int | None = None,
                 master_seed: int | None = None, workers: int = 1) -> EnsembleResult:
    """Run independent replicates and summarise them per year.

    Run ``i`` draws only from streams keyed by ``(master_seed, i)``, so the
    result does not depend on ``workers`` or on completion order.
    """
    params = params or ModelParams()
    n_runs = params.run.n_runs if n_runs is None else n_runs
    seed = params.run.seed if master_seed is None else master_seed
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    jobs = [(params, i, seed) for i in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    failures = {i: exc for i, _, exc in results if exc is not None}
    if failures:
        raise EnsembleError(failures)
    return aggregate([log for _, log, _ in sorted(results, key=lambda r: r[0])])
