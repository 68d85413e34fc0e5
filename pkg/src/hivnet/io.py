"""Config ingestion and file exports (CSV series, GraphML and DOT snapshots).

CSV files are UTF-8 with LF line endings; real values use ``%.6f``.
"""

from __future__ import annotations

import csv
import io as _io
import os
from pathlib import Path
from typing import IO, Any, Iterable, Union

import networkx as nx
import yaml

from .engine import EnsembleResult
from .network import ContactNetwork
from .params import ModelParams
from .stats import INT_FIELDS, STAT_FIELDS, YearStats

__all__ = [
    "ConfigError",
    "CSV_HEADER",
    "ENSEMBLE_STATS",
    "load_config",
    "export_csv",
    "read_stats_csv",
    "read_series_csv",
    "to_networkx",
    "export_graphml",
    "export_dot",
]

CSV_HEADER = ("year",) + STAT_FIELDS
ENSEMBLE_STATS = ("mean", "sd", "min", "max")

PathOrFile = Union[str, os.PathLike, IO[str]]


class ConfigError(ValueError):
    pass


def load_config(source: PathOrFile | None = None) -> ModelParams:
    """Read a YAML mapping of parameter overrides.

    Keys are the flat parameter names (``gamma``, ``n_zero``, ``n_runs`` ...).
    Anything left out keeps its default, so an empty file gives the
    stock configuration.
    """
    if source is None:
        return ModelParams()
    if isinstance(source, (str, os.PathLike)):
        label = str(source)
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{label}: cannot read config: {exc}") from exc
    else:
        label = getattr(source, "name", "<config>")
        text = source.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f":{mark.line + 1}:{mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"{label}{where}: parse error: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{label}: top level must be a mapping, got {type(data).__name__}")
    try:
        return ModelParams.from_flat(data)
    except KeyError as exc:
        raise ConfigError(f"{label}: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label}: invalid parameter value: {exc}") from exc


def _fmt(name: str, value: Any) -> str:
    if name == "year" or name in INT_FIELDS:
        return str(int(value))
    return f"{value:.6f}"


def _open_sink(sink: PathOrFile):
    if isinstance(sink, (str, os.PathLike)):
        try:
            return open(sink, "w", encoding="utf-8", newline=""), True
        except OSError as exc:
            raise OSError(f"{sink}: {exc.strerror or exc}") from exc
    return sink, False


def export_csv(data: Iterable[YearStats] | EnsembleResult, sink: PathOrFile) -> None:
    """Write a run's stats log, or an ensemble summary with suffixed columns."""
    fh, owned = _open_sink(sink)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(data, EnsembleResult):
            writer.writerow(["year"] + [f"{n}_{s}" for n in STAT_FIELDS for s in ENSEMBLE_STATS])
            for i, year in enumerate(data.years):
                row = [str(year)]
                for name in STAT_FIELDS:
                    row += [f"{data.summary[name][s][i]:.6f}" for s in ENSEMBLE_STATS]
                writer.writerow(row)
        else:
            writer.writerow(CSV_HEADER)
            for stats in data:
                row = stats.as_row()
                writer.writerow([_fmt(k, row[k]) for k in CSV_HEADER])
    finally:
        if owned:
            fh.close()


def _read_rows(source: PathOrFile) -> list[dict[str, str]]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    return list(csv.DictReader(source))


def read_stats_csv(source: PathOrFile) -> list[dict[str, float]]:
    """Parse any CSV written by :func:`export_csv` into numeric rows."""
    out = []
    for row in _read_rows(source):
        out.append({k: (int(v) if k == "year" else float(v)) for k, v in row.items()})
    return out


def read_series_csv(source: PathOrFile, column: str | None = None) -> dict[int, float]:
    """Read a ``year,value`` series; ``column`` selects from wider files."""
    rows = _read_rows(source)
    if not rows:
        return {}
    if column is None:
        others = [k for k in rows[0] if k != "year"]
        if "value" in others:
            column = "value"
        elif len(others) == 1:
            column = others[0]
        else:
            raise ValueError(f"ambiguous series column; choose one of {others}")
    if column not in rows[0]:
        raise ValueError(f"column {column!r} not found; have {list(rows[0])}")
    return {int(r["year"]): float(r[column]) for r in rows}


def to_networkx(network: ContactNetwork) -> nx.Graph:
    g = nx.Graph()
    for vid, agent in network.agents.items():
        g.add_node(
            f"v{vid}",
            stage=agent.stage.label,
            age=agent.age,
            degree=network.degree(vid),
            target_degree=network.target_degree[vid],
            diagnosed=agent.diagnosed,
            treated=agent.treated,
        )
    for edge in network.edges.values():
        g.add_edge(f"v{edge.a}", f"v{edge.b}", kind=edge.kind.value, elapsed=edge.elapsed,
                   expected_duration=edge.expected_duration)
    return g


def export_graphml(network: ContactNetwork, sink: Union[str, os.PathLike, IO[bytes]]) -> None:
    try:
        nx.write_graphml(to_networkx(network), sink, encoding="utf-8", prettyprint=True)
    except OSError as exc:
        raise OSError(f"{sink}: {exc.strerror or exc}") from exc


_DOT_COLOURS = {
    "susceptible": "green",
    "primary_infection": "red",
    "asymptomatic": "blue",
    "aids": "black",
}


def _dot_size(degree: int) -> str:
    if degree < 50:
        return "0.2"
    return "0.4" if degree <= 100 else "0.6"


def export_dot(network: ContactNetwork, sink: PathOrFile) -> None:
    """Graphviz DOT with stage colours, degree-scaled nodes and dotted casual edges."""
    buf = _io.StringIO()
    buf.write("graph contacts {\n  node [shape=circle, style=filled, label=\"\"];\n")
    for vid, agent in network.agents.items():
        stage = agent.stage.label
        degree = network.degree(vid)
        buf.write(f'  v{vid} [stage="{stage}", age={agent.age}, degree={degree}, '
                  f'fillcolor="{_DOT_COLOURS[stage]}", width={_dot_size(degree)}];\n')
    for e in network.edges.values():
        style = "solid" if e.is_steady else "dotted"
        buf.write(f'  v{e.a} -- v{e.b} [kind="{e.kind.value}", elapsed={e.elapsed}, '
                  f'expected_duration={e.expected_duration}, style={style}];\n')
    buf.write("}\n")
    fh, owned = _open_sink(sink)
    try:
        fh.write(buf.getvalue())
    finally:
        if owned:
            fh.close()

