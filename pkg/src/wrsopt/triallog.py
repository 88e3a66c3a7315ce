"""Trial log reading and writing.

A log is a JSON Lines file: one header record on the first line, then one
trial record per line in iteration order.  Field order is fixed so that a
replayed run reproduces the file byte for byte, with one documented
exception: wall_time measures real elapsed seconds and is excluded from any
replay comparison (record_fingerprint drops it).

Failed trials store their score as -Infinity, which is the standard Python
json extension of JSON number syntax; any reader using Python's json module
(or a parser with the same extension) round-trips it unchanged.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

SCHEMA_VERSION = 1
VALID_STATUS = ("evaluated", "cached-hit", "failed")


class LogError(ValueError):
    """Malformed, inconsistent, or unreadable trial log."""


@dataclass
class TrialRecord:
    """One budget unit of a run.

    score follows the engine's maximization convention; failed trials carry
    -inf and an error token.  wall_time is wall-clock seconds for this trial
    (volatile; excluded from reproducibility comparisons).
    """

    iteration: int
    values: tuple
    score: float
    phase: str
    status: str
    wall_time: float
    error: str | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "iteration": self.iteration,
            "values": list(self.values),
            "score": self.score,
            "phase": self.phase,
            "status": self.status,
            "wall_time": self.wall_time,
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        try:
            rec = cls(
                iteration=int(d["iteration"]),
                values=tuple(d["values"]),
                score=float(d["score"]),
                phase=str(d["phase"]),
                status=str(d["status"]),
                wall_time=float(d["wall_time"]),
                error=d.get("error"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LogError(f"bad trial record: {exc}") from exc
        if rec.status not in VALID_STATUS:
            raise LogError(f"trial {rec.iteration}: unknown status {rec.status!r}")
        return rec


@dataclass
class RunHeader:
    """First line of every log: enough to replay and to interpret the trials.

    profile is present only for WRS runs: the computed importance weights
    (null when every probability was overridden), the change probabilities,
    and the minimum fresh-sample counts actually used.
    """

    strategy: str
    budget: int
    init: int
    seed: int
    objective: str
    space: dict
    space_digest: str
    profile: dict | None = None
    options: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "kind": "header",
            "strategy": self.strategy,
            "budget": self.budget,
            "init": self.init,
            "seed": self.seed,
            "objective": self.objective,
            "space": self.space,
            "space_digest": self.space_digest,
            "profile": self.profile,
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunHeader":
        if d.get("kind") != "header":
            raise LogError("first line is not a header record")
        schema = d.get("schema")
        if schema != SCHEMA_VERSION:
            raise LogError(f"unsupported log schema {schema!r}")
        try:
            return cls(
                strategy=str(d["strategy"]),
                budget=int(d["budget"]),
                init=int(d["init"]),
                seed=int(d["seed"]),
                objective=str(d["objective"]),
                space=dict(d["space"]),
                space_digest=str(d["space_digest"]),
                profile=d.get("profile"),
                options=dict(d.get("options") or {}),
                schema=int(schema),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LogError(f"bad header record: {exc}") from exc


def _dumps(payload: dict) -> str:
    # insertion order is the documented field order; -inf serializes as -Infinity
    return json.dumps(payload, ensure_ascii=False, separators=(", ", ": "))


def write_log(path: str, header: RunHeader, records: Sequence[TrialRecord]) -> None:
    """Write the whole log in one pass (header first, trials in order)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(_dumps(header.to_dict()) + "\n")
        for rec in records:
            fh.write(_dumps(rec.to_dict()) + "\n")
    os.replace(tmp, path)


def read_log(path: str) -> tuple[RunHeader, list[TrialRecord]]:
    """Parse and validate a log: schema, statuses, consecutive iterations,
    record count equal to the declared budget."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise LogError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise LogError(f"{path}: empty log")
    try:
        payloads = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise LogError(f"{path}: invalid JSON on line {exc.lineno}") from exc
    header = RunHeader.from_dict(payloads[0])
    records = [TrialRecord.from_dict(p) for p in payloads[1:]]
    for i, rec in enumerate(records, start=1):
        if rec.iteration != i:
            raise LogError(f"{path}: iteration {rec.iteration} at position {i}; expected consecutive numbering")
    if len(records) != header.budget:
        raise LogError(f"{path}: {len(records)} records but header declares budget {header.budget}")
    return header, records


def record_fingerprint(record: TrialRecord, with_phase: bool = True) -> dict:
    """Canonical comparison form of a trial: everything except wall_time,
    optionally also ignoring the phase tag."""
    d = record.to_dict()
    d.pop("wall_time")
    if not with_phase:
        d.pop("phase")
    return d
