"""The full parameter record of one simulation configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

from .network import NetworkParams
from .population import CareCascadeParams
from .transmission import RiskFactorTable, TransmissionParams

__all__ = ["ModelParams", "RunParams", "SECTIONS", "field_names"]


@dataclass(frozen=True)
class RunParams:
    start_year: int = 1984
    end_year: int = 2006
    initial_positive_count: int = 571
    n_runs: int = 24
    seed: int = 20080601
    stats_interval: int = 1

    def __post_init__(self):
        if self.end_year < self.start_year:
            raise ValueError(f"end_year ({self.end_year}) precedes start_year ({self.start_year})")
        if self.initial_positive_count < 0:
            raise ValueError("initial_positive_count must be >= 0")
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.stats_interval < 1:
            raise ValueError(f"stats_interval must be >= 1, got {self.stats_interval}")


@dataclass(frozen=True)
class ModelParams:
    network: NetworkParams = field(default_factory=NetworkParams)
    cascade: CareCascadeParams = field(default_factory=CareCascadeParams)
    transmission: TransmissionParams = field(default_factory=TransmissionParams)
    risk: RiskFactorTable = field(default_factory=RiskFactorTable)
    run: RunParams = field(default_factory=RunParams)

    def __post_init__(self):
        if self.run.initial_positive_count > self.network.n_zero:
            raise ValueError("initial_positive_count exceeds n_zero")
        if self.risk.earliest_year > self.run.start_year:
            raise ValueError(f"risk factor table starts after start_year {self.run.start_year}")

    def replace(self, **overrides: Any) -> "ModelParams":
        """Copy with flat field overrides, e.g. ``replace(gamma=1.8, n_runs=5)``."""
        return ModelParams.from_flat({**self.to_flat(), **overrides})

    def to_flat(self) -> dict[str, Any]:
        flat: dict[str, Any] = {}
        for section, cls in SECTIONS.items():
            if section == "risk":
                continue
            record = getattr(self, section)
            for f in dataclasses.fields(cls):
                flat[f.name] = getattr(record, f.name)
        flat["pi_time_split"] = list(self.transmission.pi_time_split)
        flat["risk_factors"] = [list(row) for row in self.risk.rows]
        flat["risk_earliest_year"] = self.risk.earliest_year
        return flat

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> "ModelParams":
        """Build from a flat mapping; raises ``KeyError`` on unknown names."""
        unknown = set(flat) - set(field_names())
        if unknown:
            raise KeyError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        kwargs: dict[str, Any] = {}
        for section, record_cls in SECTIONS.items():
            if section == "risk":
                risk_kw = {}
                if "risk_factors" in flat:
                    risk_kw["rows"] = tuple(tuple(r) for r in flat["risk_factors"])
                if "risk_earliest_year" in flat:
                    risk_kw["earliest_year"] = flat["risk_earliest_year"]
                kwargs["risk"] = RiskFactorTable(**risk_kw)
                continue
            names = {f.name for f in dataclasses.fields(record_cls)}
            sub = {k: v for k, v in flat.items() if k in names}
            if "pi_time_split" in sub:
                sub["pi_time_split"] = tuple(sub["pi_time_split"])
            kwargs[section] = record_cls(**sub)
        return cls(**kwargs)


SECTIONS = {
    "network": NetworkParams,
    "cascade": CareCascadeParams,
    "transmission": TransmissionParams,
    "risk": RiskFactorTable,
    "run": RunParams,
}


def field_names() -> list[str]:
    names = []
    for section, cls in SECTIONS.items():
        if section == "risk":
            names += ["risk_factors", "risk_earliest_year"]
        else:
            names += [f.name for f in dataclasses.fields(cls)]
    return names
