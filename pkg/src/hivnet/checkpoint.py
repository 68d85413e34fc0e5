"""Versioned, checksummed snapshots of a :class:`SimulationState`.

File layout (all integers big-endian)::

    offset  size  field
    0       8     magic  b"HIVNSNAP"
    8       2     format version (currently 1)
    10      2     flags (reserved, 0)
    12      8     payload length in bytes
    20      32    SHA-256 of the payload
    52      n     payload: zlib-compressed UTF-8 JSON document

The JSON document holds the flattened parameters, the clock, every agent
and edge in insertion order, the RNG stream states, the pending event
queue and the statistics collected so far. Only named actions can be
serialised, so snapshots are taken between events.
"""

from __future__ import annotations

import dataclasses
import hashlib
import heapq
import json
import os
import struct
import zlib
from pathlib import Path
from typing import IO, Any, Union

from .engine import ACTIONS, ScheduledEvent, SimulationState
from .network import ContactNetwork, EdgeKind
from .params import ModelParams
from .population import Agent, Stage
from .stats import YearStats
from .stochastic import RandomStream

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "SnapshotError",
    "CorruptSnapshotError",
    "SnapshotVersionError",
    "checkpoint",
    "restore",
    "dumps",
    "loads",
]

MAGIC = b"HIVNSNAP"
FORMAT_VERSION = 1
_HEADER = struct.Struct(">8sHHQ32s")

Sink = Union[str, os.PathLike, IO[bytes]]


class SnapshotError(Exception):
    pass


class CorruptSnapshotError(SnapshotError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


def _agent_row(a: Agent, target: int) -> list[Any]:
    return [a.id, a.age, int(a.stage), a.stage_elapsed, a.ap_expected_duration, a.diagnosed,
            a.treated, a.treatment_success, a.treatment_factor, a.treatment_decided,
            a.infection_step, a.removal_flag, target]


def _document(state: SimulationState) -> dict[str, Any]:
    for event in state.pending:
        if not isinstance(event.action, str):
            raise SnapshotError(
                f"pending event {event.name!r} at t={event.time} is not a registered action")
    net = state.network
    return {
        "params": state.params.to_flat(),
        "run_index": state.run_index,
        "master_seed": state.master_seed,
        "clock": state.clock,
        "completed_through": state.completed_through,
        "ordinal": state.ordinal,
        "registered": state.registered,
        "counters": [state.new_infections, state.new_aids],
        "network": {
            "step": net.step,
            "next_id": net.next_id,
            "agents": [_agent_row(a, net.target_degree[a.id]) for a in net.agents.values()],
            "edges": [[e.a, e.b, e.kind.value, e.elapsed, e.expected_duration]
                      for e in net.edges.values()],
        },
        "streams": {str(k): s.getstate() for k, s in state.streams.items()},
        "pending": [[e.time, e.priority, e.ordinal, e.action, e.interval]
                    for e in sorted(state.pending)],
        "stats_log": [list(dataclasses.astuple(s)) for s in state.stats_log],
        "trace": [list(t) for t in state.trace],
    }


def _from_document(doc: dict[str, Any]) -> SimulationState:
    params = ModelParams.from_flat(doc["params"])
    net = ContactNetwork()
    for row in doc["network"]["agents"]:
        (vid, age, stage, elapsed, ap_d, diag, treated, success, factor, decided,
         inf_step, flag, target) = row
        agent = Agent(vid, age, Stage(stage), elapsed, ap_d, diag, treated, success, factor,
                      decided, inf_step, flag)
        net.add_agent(agent, target)
    for a, b, kind, elapsed, expected in doc["network"]["edges"]:
        net.add_edge(a, b, EdgeKind(kind), expected, elapsed)
    net.step = doc["network"]["step"]
    net.next_id = doc["network"]["next_id"]
    pending = []
    for time, priority, ordinal, action, interval in doc["pending"]:
        if action not in ACTIONS:
            raise SnapshotError(f"snapshot refers to unregistered action {action!r}")
        pending.append(ScheduledEvent(time, priority, ordinal, action, interval))
    heapq.heapify(pending)
    state = SimulationState(
        params=params,
        network=net,
        streams={int(k): RandomStream.fromstate(v) for k, v in doc["streams"].items()},
        run_index=doc["run_index"],
        master_seed=doc["master_seed"],
        clock=doc["clock"],
        completed_through=doc["completed_through"],
        ordinal=doc["ordinal"],
        pending=pending,
        stats_log=[YearStats(*row) for row in doc["stats_log"]],
        new_infections=doc["counters"][0],
        new_aids=doc["counters"][1],
        trace=[tuple(t) for t in doc["trace"]],
        registered=doc["registered"],
    )
    return state


def dumps(state: SimulationState) -> bytes:
    body = json.dumps(_document(state), separators=(",", ":")).encode("utf-8")
    payload = zlib.compress(body, 6)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, 0, len(payload), hashlib.sha256(payload).digest())
    return header + payload


def loads(blob: bytes) -> SimulationState:
    if len(blob) < _HEADER.size:
        raise CorruptSnapshotError(f"snapshot truncated: {len(blob)} bytes, header needs {_HEADER.size}")
    magic, version, _flags, length, digest = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptSnapshotError("not a snapshot file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(
            f"snapshot format version {version} is not supported (this build reads {FORMAT_VERSION})")
    payload = blob[_HEADER.size:]
    if len(payload) != length:
        raise CorruptSnapshotError(f"payload is {len(payload)} bytes, header says {length}")
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptSnapshotError("payload checksum mismatch")
    try:
        doc = json.loads(zlib.decompress(payload).decode("utf-8"))
    except (zlib.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptSnapshotError(f"payload undecodable: {exc}") from exc
    return _from_document(doc)


def checkpoint(state: SimulationState, sink: Sink) -> bytes:
    """Serialise ``state`` to a path or binary file object; returns the bytes written."""
    blob = dumps(state)
    if isinstance(sink, (str, os.PathLike)):
        path = Path(sink)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    else:
        sink.write(blob)
    return blob


def restore(source: Sink) -> SimulationState:
    if isinstance(source, (str, os.PathLike)):
        blob = Path(source).read_bytes()
    else:
        blob = source.read()
    return loads(blob)
