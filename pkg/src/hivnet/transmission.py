"""Per-act, per-edge-year and per-vertex-year transmission probabilities.

The yearly infection operator also lives here. Transmissibility by stage
uses the role-averaged per-act probability, which is the expectation over
the uniform receptive/insertive role of the negative partner.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

from .population import Agent, Stage, effective_treatment_factor, seroconvert
from .stochastic import RandomStream, sample_poisson

if TYPE_CHECKING:
    from .network import ContactNetwork, Partnership

__all__ = [
    "TransmissionParams",
    "RiskFactorTable",
    "PHASES",
    "role_averaged_tp",
    "risk_factor",
    "per_action_probability",
    "per_year_edge_probability",
    "per_year_infection_probability",
    "infection_step",
]

logger = logging.getLogger(__name__)

PHASES = ("PI1", "PI2", "AP", "AIDS")


@dataclass(frozen=True)
class TransmissionParams:
    tp_pi1_receptive: float = 0.22
    tp_pi1_insertive: float = 0.044
    tp_ap_receptive: float = 0.011
    tp_ap_insertive: float = 0.0022
    tp_aids: float = 0.0
    f_p_steady: float = 0.84
    actions_steady_mean: float = 30.0
    actions_pi_first_mean: float = 8.0
    actions_pi_rest_mean: float = 22.0
    actions_casual: int = 1
    pi_time_split: tuple[float, float] = (0.25, 0.75)

    def __post_init__(self):
        for name in ("tp_pi1_receptive", "tp_pi1_insertive", "tp_ap_receptive",
                     "tp_ap_insertive", "tp_aids", "f_p_steady"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in ("actions_steady_mean", "actions_pi_first_mean", "actions_pi_rest_mean"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.actions_casual != 1:
            # the casual-edge yearly formulas assume exactly one act
            raise ValueError(f"actions_casual must be 1, got {self.actions_casual}")
        if len(self.pi_time_split) != 2 or min(self.pi_time_split) < 0:
            raise ValueError(f"pi_time_split must be two non-negative weights, got {self.pi_time_split}")
        if self.tp_aids != 0.0:
            logger.warning("tp_aids=%s: AIDS-stage agents are normally assumed to have no contacts",
                           self.tp_aids)


# (first_year, negative, positive); each row holds until the next one starts.
DEFAULT_RISK_ROWS: tuple[tuple[int, float, float], ...] = (
    (1985, 3.50, 2.80),
    (1987, 2.50, 1.61),
    (1988, 1.50, 0.42),
    (1992, 0.80, 0.88),
    (1996, 0.90, 0.78),
    (1997, 1.00, 0.70),
    (2000, 1.30, 1.30),
)


@dataclass(frozen=True)
class RiskFactorTable:
    """Yearly risk-behaviour factors for negative and positive individuals.

    Rows are step functions of the calendar year. Years from
    ``earliest_year`` up to the first row reuse the first row; the last row
    is open-ended.
    """

    rows: tuple[tuple[int, float, float], ...] = DEFAULT_RISK_ROWS
    earliest_year: int = 1984
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple((int(y), float(n), float(p)) for y, n, p in self.rows)
        if not rows:
            raise ValueError("risk factor table needs at least one row")
        starts = tuple(r[0] for r in rows)
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("risk factor rows must have strictly increasing start years")
        if any(n <= 0 or p <= 0 for _, n, p in rows):
            raise ValueError("risk factors must be > 0")
        if self.earliest_year > starts[0]:
            raise ValueError("earliest_year must not be after the first row")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_starts", starts)

    @classmethod
    def constant(cls, value: float = 1.0, earliest_year: int = 0) -> "RiskFactorTable":
        return cls(rows=((earliest_year, value, value),), earliest_year=earliest_year)

    def row(self, year: int) -> tuple[float, float]:
        """``(negative, positive)`` factors in force during ``year``."""
        if year < self.earliest_year:
            raise KeyError(f"year {year} precedes the risk factor table (starts {self.earliest_year})")
        i = max(bisect.bisect_right(self._starts, year) - 1, 0)
        return self.rows[i][1], self.rows[i][2]


def role_averaged_tp(stage_phase: str, params: TransmissionParams = TransmissionParams()) -> float:
    if stage_phase == "PI1":
        return 0.5 * (params.tp_pi1_receptive + params.tp_pi1_insertive)
    if stage_phase in ("PI2", "AP"):
        return 0.5 * (params.tp_ap_receptive + params.tp_ap_insertive)
    if stage_phase == "AIDS":
        return params.tp_aids
    raise ValueError(f"unknown stage phase {stage_phase!r}; expected one of {PHASES}")


def risk_factor(table: RiskFactorTable, year: int, transmitter_positive: bool = True,
                susceptible_positive: bool = False) -> float:
    """Edge-level risk factor: geometric mean of both partners' row values."""
    negative, positive = table.row(year)
    a = positive if transmitter_positive else negative
    b = positive if susceptible_positive else negative
    return math.sqrt(a * b)


def per_action_probability(f_p: float, f_r: float, f_t: float, tp: float) -> float:
    p = f_p * f_r * (f_t * tp)
    if p > 1.0:
        logger.warning("per-action probability %.6g clamped to 1 (f_p=%g f_r=%g f_t=%g tp=%g)",
                       p, f_p, f_r, f_t, tp)
        return 1.0
    if p < 0.0:
        logger.warning("per-action probability %.6g clamped to 0", p)
        return 0.0
    return p


def per_year_edge_probability(transmitter: Agent, susceptible: Agent, edge: "Partnership",
                              year: int, params: TransmissionParams, table: RiskFactorTable,
                              stream: RandomStream, susceptible_has_steady: bool = False) -> float:
    """Probability that ``transmitter`` infects ``susceptible`` over one year on ``edge``.

    Steady edges draw their yearly action counts from ``stream``.
    """
    if susceptible.stage != Stage.SUSCEPTIBLE:
        raise ValueError(f"agent {susceptible.id} is not susceptible")
    stage = transmitter.stage
    if stage == Stage.SUSCEPTIBLE or stage == Stage.AIDS:
        return 0.0
    steady = edge.is_steady
    f_p = params.f_p_steady if (susceptible_has_steady and not steady) else 1.0
    f_r = risk_factor(table, year, True, False)
    f_t = effective_treatment_factor(transmitter)
    if stage == Stage.PRIMARY_INFECTION:
        p1 = per_action_probability(f_p, f_r, f_t, role_averaged_tp("PI1", params))
        p2 = per_action_probability(f_p, f_r, f_t, role_averaged_tp("PI2", params))
        if not steady:
            w1, w2 = params.pi_time_split
            return min(w1 * p1 + w2 * p2, 1.0)
        n1 = sample_poisson(params.actions_pi_first_mean, stream)
        n2 = sample_poisson(params.actions_pi_rest_mean, stream)
        return 1.0 - (1.0 - p1) ** n1 * (1.0 - p2) ** n2
    p = per_action_probability(f_p, f_r, f_t, role_averaged_tp("AP", params))
    if not steady:
        return p
    n = sample_poisson(params.actions_steady_mean, stream)
    return 1.0 - (1.0 - p) ** n


def per_year_infection_probability(incident_edge_probs: Iterable[float]) -> float:
    escape = 1.0
    for p in incident_edge_probs:
        escape *= 1.0 - p
    return 1.0 - escape


def infection_step(network: "ContactNetwork", params: TransmissionParams, table: RiskFactorTable,
                   year: int, stream: RandomStream) -> list[int]:
    """Infect susceptible vertices from their partners' pre-step states.

    All yearly probabilities are evaluated before any seroconversion is
    applied, so nobody infected in this call transmits in it. Returns the
    ids of newly infected agents in vertex order.
    """
    agents = network.agents
    adj = network.adj
    candidates: list[tuple[int, float]] = []
    for vid, agent in agents.items():
        if agent.stage != Stage.SUSCEPTIBLE:
            continue
        partners = adj[vid]
        if not partners:
            continue
        has_steady = network.steady_partner(vid) is not None
        escape = 1.0
        exposed = False
        for uid, edge in partners.items():
            partner = agents[uid]
            if partner.stage == Stage.SUSCEPTIBLE or partner.stage == Stage.AIDS:
                continue
            exposed = True
            p = per_year_edge_probability(partner, agent, edge, year, params, table, stream,
                                          susceptible_has_steady=has_steady)
            escape *= 1.0 - p
        if exposed:
            candidates.append((vid, 1.0 - escape))
    infected = [vid for vid, p in candidates if stream.random() < p]
    for vid in infected:
        seroconvert(agents[vid], network.step)
    return infected
