"""Agents and their local disease progression."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .stochastic import RandomStream, sample_poisson, sample_uniform_int, sample_uniform_real

__all__ = [
    "Stage",
    "Agent",
    "CareCascadeParams",
    "seroconvert",
    "progress",
    "seed_infection",
    "effective_treatment_factor",
]


class Stage(enum.IntEnum):
    SUSCEPTIBLE = 0
    PRIMARY_INFECTION = 1
    ASYMPTOMATIC = 2
    AIDS = 3

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Stage":
        try:
            return _BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown stage label {label!r}; expected one of {sorted(_BY_LABEL)}") from None


_LABELS = {
    Stage.SUSCEPTIBLE: "susceptible",
    Stage.PRIMARY_INFECTION: "primary_infection",
    Stage.ASYMPTOMATIC: "asymptomatic",
    Stage.AIDS: "aids",
}
_BY_LABEL = {v: k for k, v in _LABELS.items()}


@dataclass(slots=True)
class Agent:
    id: int
    age: int
    stage: Stage = Stage.SUSCEPTIBLE
    stage_elapsed: int = 0
    ap_expected_duration: int = 0
    diagnosed: bool = False
    treated: bool = False
    treatment_success: bool = False
    treatment_factor: float = 1.0
    # True once the treatment draw for a diagnosed agent has been made
    treatment_decided: bool = False
    infection_step: int | None = None
    removal_flag: bool = False

    @property
    def infected(self) -> bool:
        return self.stage != Stage.SUSCEPTIBLE

    def expected_stage_duration(self, cascade: "CareCascadeParams") -> int | None:
        if self.stage == Stage.PRIMARY_INFECTION:
            return cascade.pi_duration
        if self.stage == Stage.ASYMPTOMATIC:
            return self.ap_expected_duration
        return None


@dataclass(frozen=True)
class CareCascadeParams:
    p_diagnosed: float = 0.42
    p_treated_given_diagnosed: float = 0.81
    p_success_given_treated: float = 0.7
    haart_start_year: int = 1996
    ap_mean_failed: float = 13.0
    ap_mean_success: float = 22.0
    ap_mean_untreated: float = 13.0
    pi_duration: int = 1
    treatment_factor_low: float = 0.1
    treatment_factor_high: float = 0.5
    # Diagnosed agents already in AP when HAART arrives get one treatment draw.
    treat_prevalent_at_haart: bool = True
    # Seeded positives were infected uniformly over this many years before the
    # start; None spreads them over their whole sampled AP duration.
    seed_infection_window: int | None = 5

    def __post_init__(self):
        for name in ("p_diagnosed", "p_treated_given_diagnosed", "p_success_given_treated"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in ("ap_mean_failed", "ap_mean_success", "ap_mean_untreated"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.pi_duration < 0:
            raise ValueError(f"pi_duration must be >= 0, got {self.pi_duration}")
        if not 0.0 < self.treatment_factor_low <= self.treatment_factor_high <= 1.0:
            raise ValueError("treatment factor range must satisfy 0 < low <= high <= 1")
        if self.seed_infection_window is not None and self.seed_infection_window < 1:
            raise ValueError(
                f"seed_infection_window must be >= 1 or null, got {self.seed_infection_window}")


def seroconvert(agent: Agent, current_step: int) -> Agent:
    """Move a susceptible agent into primary infection."""
    if agent.stage != Stage.SUSCEPTIBLE:
        raise ValueError(f"agent {agent.id} is not susceptible (stage {agent.stage.label})")
    agent.stage = Stage.PRIMARY_INFECTION
    agent.stage_elapsed = 0
    agent.infection_step = current_step
    return agent


def _offer_treatment(agent: Agent, cascade: CareCascadeParams, stream: RandomStream) -> None:
    agent.treatment_decided = True
    if stream.random() < cascade.p_treated_given_diagnosed:
        agent.treated = True
        agent.treatment_factor = sample_uniform_real(
            cascade.treatment_factor_low, cascade.treatment_factor_high, stream)
        agent.treatment_success = stream.random() < cascade.p_success_given_treated


def _enter_asymptomatic(agent: Agent, calendar_year: int, cascade: CareCascadeParams,
                        stream: RandomStream) -> None:
    agent.stage = Stage.ASYMPTOMATIC
    agent.stage_elapsed = 0
    agent.diagnosed = stream.random() < cascade.p_diagnosed
    if agent.diagnosed and calendar_year >= cascade.haart_start_year:
        _offer_treatment(agent, cascade, stream)
    if agent.treatment_success:
        mean = cascade.ap_mean_success
    elif agent.treated:
        mean = cascade.ap_mean_failed
    else:
        mean = cascade.ap_mean_untreated
    agent.ap_expected_duration = sample_poisson(mean, stream)


def progress(agent: Agent, calendar_year: int, cascade: CareCascadeParams,
             stream: RandomStream) -> Agent:
    """One yearly tick of ageing and stage progression."""
    agent.age += 1
    stage = agent.stage
    if stage == Stage.SUSCEPTIBLE or stage == Stage.AIDS:
        return agent
    if (stage == Stage.ASYMPTOMATIC and cascade.treat_prevalent_at_haart and agent.diagnosed
            and not agent.treatment_decided and calendar_year >= cascade.haart_start_year):
        _offer_treatment(agent, cascade, stream)
        if agent.treatment_success:
            # treatment never shortens the remaining asymptomatic period
            agent.ap_expected_duration = max(
                agent.ap_expected_duration, sample_poisson(cascade.ap_mean_success, stream))
    expected = agent.expected_stage_duration(cascade)
    if agent.stage_elapsed < expected:
        agent.stage_elapsed += 1
    elif stage == Stage.PRIMARY_INFECTION:
        _enter_asymptomatic(agent, calendar_year, cascade, stream)
    else:
        agent.stage = Stage.AIDS
        agent.stage_elapsed = 0
    return agent


def seed_infection(agent: Agent, calendar_year: int, cascade: CareCascadeParams,
                   stream: RandomStream) -> Agent:
    """Place an agent already positive at simulation start into AP."""
    seroconvert(agent, 0)
    _enter_asymptomatic(agent, calendar_year, cascade, stream)
    agent.infection_step = None
    span = agent.ap_expected_duration
    if cascade.seed_infection_window is not None:
        span = min(span, cascade.seed_infection_window)
    agent.stage_elapsed = sample_uniform_int(0, span - 1, stream) if span > 0 else 0
    return agent


def effective_treatment_factor(agent: Agent) -> float:
    return agent.treatment_factor if agent.treated else 1.0
