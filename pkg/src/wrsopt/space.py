"""Search space definitions: typed dimensions, validation, sampling, serialization.

A candidate is a plain tuple of values, one entry per dimension in declaration
order.  Integer dimensions produce ints, real dimensions floats, categorical
dimensions one of their listed values.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np
import yaml


class SpaceError(ValueError):
    """Raised when a space definition or candidate fails validation."""


_KIND_ALIASES = {
    "int": "int",
    "integer": "int",
    "integer-range": "int",
    "real": "real",
    "float": "real",
    "real-range": "real",
    "cat": "cat",
    "categorical": "cat",
    "choice": "cat",
}


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise SpaceError(msg)


@dataclass(frozen=True)
class Dimension:
    """One axis of the search space.

    kind is "int", "real", or "cat".  Range kinds use low/high (inclusive on
    both ends); categorical kinds use values and optionally weights, which are
    normalized at sampling time.
    """

    name: str
    kind: str
    low: float | int | None = None
    high: float | int | None = None
    values: tuple[Any, ...] | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        _check(isinstance(self.name, str) and self.name != "", "dimension name must be a non-empty string")
        kind = _KIND_ALIASES.get(self.kind)
        _check(kind is not None, f"{self.name}: unknown kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)

        if kind == "cat":
            _check(self.low is None and self.high is None, f"{self.name}: categorical dimensions take values, not bounds")
            _check(self.values is not None and len(self.values) > 0, f"{self.name}: categorical dimension needs at least one value")
            object.__setattr__(self, "values", tuple(self.values))
            seen = set()
            for v in self.values:
                try:
                    dup = v in seen
                    seen.add(v)
                except TypeError:
                    raise SpaceError(f"{self.name}: categorical values must be hashable") from None
                _check(not dup, f"{self.name}: duplicate categorical value {v!r}")
            if self.weights is not None:
                w = tuple(float(x) for x in self.weights)
                _check(len(w) == len(self.values), f"{self.name}: weights length must match values length")
                _check(all(math.isfinite(x) and x > 0 for x in w), f"{self.name}: weights must be finite and positive")
                object.__setattr__(self, "weights", w)
            return

        _check(self.values is None and self.weights is None, f"{self.name}: range dimensions take bounds, not values")
        _check(self.low is not None and self.high is not None, f"{self.name}: range dimension needs low and high")
        if kind == "int":
            for side, v in (("low", self.low), ("high", self.high)):
                _check(isinstance(v, int) or (isinstance(v, float) and v.is_integer()), f"{self.name}: integer bound {side}={v!r} is not integral")
            object.__setattr__(self, "low", int(self.low))
            object.__setattr__(self, "high", int(self.high))
        else:
            object.__setattr__(self, "low", float(self.low))
            object.__setattr__(self, "high", float(self.high))
            _check(math.isfinite(self.low) and math.isfinite(self.high), f"{self.name}: real bounds must be finite")
        _check(self.low <= self.high, f"{self.name}: low must not exceed high")

    @property
    def size(self) -> int:
        """Number of distinct values for int/cat dimensions."""
        if self.kind == "int":
            return self.high - self.low + 1
        if self.kind == "cat":
            return len(self.values)
        raise SpaceError(f"{self.name}: real dimensions have no finite size")


def sample_dimension(dim: Dimension, rng: np.random.Generator) -> Any:
    """Draw one value, consuming exactly one uniform from rng.

    The single-draw contract keeps candidate streams reproducible across
    samplers that interleave draws from a shared generator.
    """
    u = rng.random()
    if dim.kind == "real":
        return dim.low + u * (dim.high - dim.low)
    if dim.kind == "int":
        v = dim.low + int(u * (dim.high - dim.low + 1))
        return min(v, dim.high)  # u == 1.0 cannot occur, but stay safe
    if dim.weights is None:
        idx = min(int(u * len(dim.values)), len(dim.values) - 1)
        return dim.values[idx]
    cum = np.cumsum(dim.weights)
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return dim.values[min(idx, len(dim.values) - 1)]


@dataclass(frozen=True)
class SearchSpace:
    """An ordered, immutable collection of dimensions with unique names."""

    dimensions: tuple[Dimension, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        _check(len(self.dimensions) > 0, "search space must contain at least one dimension")
        names = [d.name for d in self.dimensions]
        _check(len(set(names)) == len(names), "dimension names must be unique")

    def __len__(self) -> int:
        return len(self.dimensions)

    def __iter__(self) -> Iterator[Dimension]:
        return iter(self.dimensions)

    def __getitem__(self, i: int) -> Dimension:
        return self.dimensions[i]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def index_of(self, name: str) -> int:
        for i, d in enumerate(self.dimensions):
            if d.name == name:
                return i
        raise SpaceError(f"no dimension named {name!r}")

    def sample(self, rng: np.random.Generator) -> tuple:
        """Draw an independent uniform candidate, one rng.random() per dimension."""
        return tuple(sample_dimension(d, rng) for d in self.dimensions)


def validate_candidate(space: SearchSpace, values: Sequence[Any]) -> tuple:
    """Check values against the space, returning them as a normalized tuple."""
    _check(len(values) == len(space), f"candidate has {len(values)} values, space has {len(space)} dimensions")
    out = []
    for dim, v in zip(space.dimensions, values):
        if dim.kind == "int":
            _check(isinstance(v, (int, np.integer)) and not isinstance(v, bool), f"{dim.name}: expected int, got {v!r}")
            v = int(v)
            _check(dim.low <= v <= dim.high, f"{dim.name}: {v} outside [{dim.low}, {dim.high}]")
        elif dim.kind == "real":
            _check(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool), f"{dim.name}: expected real, got {v!r}")
            v = float(v)
            _check(math.isfinite(v), f"{dim.name}: value must be finite")
            _check(dim.low <= v <= dim.high, f"{dim.name}: {v} outside [{dim.low}, {dim.high}]")
        else:
            _check(v in dim.values, f"{dim.name}: {v!r} not among listed values")
        out.append(v)
    return tuple(out)


def candidate_key(space: SearchSpace, values: Sequence[Any]) -> str:
    """Canonical string key for caching and duplicate detection.

    Float coordinates use hex form so the key is exact: two candidates share a
    key iff every coordinate compares equal.
    """
    parts = []
    for dim, v in zip(space.dimensions, values):
        if dim.kind == "int":
            parts.append(f"i{int(v)}")
        elif dim.kind == "real":
            parts.append("f" + float(v).hex())
        else:
            parts.append("c" + json.dumps(v, sort_keys=True, separators=(",", ":")))
    return "|".join(parts)


def dimension_to_dict(dim: Dimension) -> dict:
    d: dict[str, Any] = {"name": dim.name, "kind": dim.kind}
    if dim.kind == "cat":
        d["values"] = list(dim.values)
        if dim.weights is not None:
            d["weights"] = list(dim.weights)
    else:
        d["low"] = dim.low
        d["high"] = dim.high
    return d


def space_to_dict(space: SearchSpace) -> dict:
    return {"dimensions": [dimension_to_dict(d) for d in space.dimensions]}


def dimension_from_dict(d: dict) -> Dimension:
    if not isinstance(d, dict):
        raise SpaceError(f"dimension entry must be a mapping, got {type(d).__name__}")
    known = {"name", "kind", "low", "high", "values", "weights"}
    extra = set(d) - known
    _check(not extra, f"unknown dimension fields: {sorted(extra)}")
    values = d.get("values")
    weights = d.get("weights")
    return Dimension(
        name=d.get("name", ""),
        kind=d.get("kind", ""),
        low=d.get("low"),
        high=d.get("high"),
        values=tuple(values) if values is not None else None,
        weights=tuple(weights) if weights is not None else None,
    )


def space_from_dict(payload: dict) -> SearchSpace:
    if not isinstance(payload, dict) or "dimensions" not in payload:
        raise SpaceError("space definition must be a mapping with a 'dimensions' list")
    dims = payload["dimensions"]
    if not isinstance(dims, list):
        raise SpaceError("'dimensions' must be a list")
    return SearchSpace(tuple(dimension_from_dict(d) for d in dims))


def load_space(path: str) -> SearchSpace:
    """Load a space from a YAML file (JSON is a YAML subset and also works)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SpaceError(f"{path}: not valid YAML: {exc}") from exc
    if payload is None:
        raise SpaceError(f"{path}: file is empty")
    return space_from_dict(payload)


def space_digest(space: SearchSpace) -> str:
    """Stable sha256 over the canonical JSON form, for log headers."""
    blob = json.dumps(space_to_dict(space), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
