"""Yearly epidemic statistics and comparison against observed series."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields
from typing import Mapping

from scipy import stats as sps

from .network import ContactNetwork
from .population import Stage

__all__ = [
    "YearStats",
    "STAT_FIELDS",
    "collect_year_stats",
    "ChiSquareResult",
    "ReferenceSeries",
    "chi_square_compare",
]


@dataclass(frozen=True)
class YearStats:
    calendar_year: int
    population: int
    new_infections: int
    incidence: float
    aids_diagnoses: int
    prevalence: float
    steady_fraction: float
    mean_degree: float

    def as_row(self) -> dict[str, float]:
        row = {"year": self.calendar_year}
        row.update({name: getattr(self, name) for name in STAT_FIELDS})
        return row


# every column after ``year``, in CSV order
STAT_FIELDS = tuple(f.name for f in fields(YearStats))[1:]
INT_FIELDS = frozenset({"population", "new_infections", "aids_diagnoses"})


def collect_year_stats(network: ContactNetwork, new_infections: int, new_aids: int,
                       year: int) -> YearStats:
    population = len(network.agents)
    infected = sum(1 for a in network.agents.values() if a.stage != Stage.SUSCEPTIBLE)
    return YearStats(
        calendar_year=year,
        population=population,
        new_infections=new_infections,
        incidence=new_infections / population if population else 0.0,
        aids_diagnoses=new_aids,
        prevalence=infected / population if population else 0.0,
        steady_fraction=network.steady_fraction(),
        mean_degree=network.mean_degree(),
    )


class ReferenceSeries(dict):
    """Observed values keyed by calendar year (strictly increasing, non-negative)."""

    def __init__(self, data: Mapping[int, float]):
        items = [(int(y), float(v)) for y, v in data.items()]
        years = [y for y, _ in items]
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("reference years must be strictly increasing")
        if any(v < 0 for _, v in items):
            raise ValueError("reference values must be >= 0")
        super().__init__(items)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    degrees_of_freedom: int
    critical_value: float
    p_value: float
    accept: bool
    years: tuple[int, ...]


def chi_square_compare(simulated: Mapping[int, float], reference: Mapping[int, float],
                       alpha: float = 0.05) -> ChiSquareResult:
    """Pearson chi-square of a simulated series against a reference.

    The reference plays the role of the expected values, so the test is not
    symmetric in its arguments. Years where the reference is zero are
    skipped with a warning. Degrees of freedom equal the number of compared
    years, since the reference is fully specified rather than fitted.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    overlap = sorted(set(simulated) & set(reference))
    if not overlap:
        raise ValueError("simulated and reference series share no years")
    zero = [y for y in overlap if reference[y] <= 0]
    if zero:
        warnings.warn(f"skipping years with zero reference value: {zero}", stacklevel=2)
    years = tuple(y for y in overlap if reference[y] > 0)
    if not years:
        raise ValueError("no overlapping year has a positive reference value")
    statistic = float(sum((simulated[y] - reference[y]) ** 2 / reference[y] for y in years))
    dof = len(years)
    critical = float(sps.chi2.ppf(1.0 - alpha, dof))
    p_value = float(sps.chi2.sf(statistic, dof))
    return ChiSquareResult(statistic, dof, critical, p_value, statistic < critical, years)
