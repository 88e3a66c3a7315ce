"""Objective adapters: built-in synthetic benchmarks and an external subprocess protocol.

The engine always maximizes.  Specs with direction "minimize" (the default,
matching the benchmark conventions) are wrapped by negation at this boundary,
so a stored score of 2.5 for a minimize objective means f(x) = -2.5.

Spec strings:
    builtin:NAME[?param=value&...]
    external:COMMAND LINE[?timeout=SECONDS&direction=maximize]

Everything after the last '?' is treated as the parameter block when every
'&'-separated chunk has the key=value shape; otherwise the '?' is taken to be
part of the command itself.
"""

from __future__ import annotations

import math
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .space import SearchSpace

DEFAULT_TIMEOUT = 300.0


class ObjectiveError(ValueError):
    """A spec that cannot be built against the given space."""


class ObjectiveFailure(RuntimeError):
    """A single evaluation failed; the trial is recorded as failed.

    reason is a short machine-friendly token such as "timeout" or "exit 1".
    """

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str  # builtin | external
    target: str  # builtin name or external command line
    params: tuple[tuple[str, str], ...] = ()
    direction: str = "minimize"
    timeout: float = DEFAULT_TIMEOUT
    text: str = ""

    def param_map(self) -> dict[str, str]:
        return dict(self.params)


def parse_objective_spec(text: str) -> ObjectiveSpec:
    """Parse a spec string; see the module docstring for the grammar."""
    if ":" not in text:
        raise ObjectiveError(f"objective spec {text!r} needs a 'builtin:' or 'external:' prefix")
    kind, rest = text.split(":", 1)
    if kind not in ("builtin", "external"):
        raise ObjectiveError(f"unknown objective kind {kind!r}")

    target, params = rest, {}
    if "?" in rest:
        head, tail = rest.rsplit("?", 1)
        chunks = tail.split("&") if tail else []
        if chunks and all("=" in c for c in chunks):
            target = head
            for c in chunks:
                k, v = c.split("=", 1)
                params[k.strip()] = v.strip()
    if target == "":
        raise ObjectiveError(f"objective spec {text!r} has an empty target")

    direction = params.pop("direction", "minimize")
    if direction not in ("minimize", "maximize"):
        raise ObjectiveError(f"direction must be minimize or maximize, got {direction!r}")

    timeout = DEFAULT_TIMEOUT
    if "timeout" in params:
        if kind != "external":
            raise ObjectiveError("timeout only applies to external objectives")
        try:
            timeout = float(params.pop("timeout"))
        except ValueError:
            raise ObjectiveError("timeout must be a number") from None
        if not timeout > 0:
            raise ObjectiveError("timeout must be positive")

    if kind == "builtin" and target not in BUILTINS:
        raise ObjectiveError(f"no builtin named {target!r}; choose from {sorted(BUILTINS)}")

    return ObjectiveSpec(
        kind=kind,
        target=target,
        params=tuple(sorted(params.items())),
        direction=direction,
        timeout=timeout,
        text=text,
    )


# -- built-in benchmark functions -------------------------------------------

def sphere(x: np.ndarray) -> float:
    return float(np.sum(x * x))


def rastrigin(x: np.ndarray) -> float:
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def rosenbrock(x: np.ndarray) -> float:
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def branin(x: np.ndarray) -> float:
    a = 1.0
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * math.pi)
    return float(a * (x[1] - b * x[0] ** 2 + c * x[0] - r) ** 2 + s * (1.0 - t) * np.cos(x[0]) + s)


def styblinski_tang(x: np.ndarray) -> float:
    return float(0.5 * np.sum(x**4 - 16.0 * x**2 + 5.0 * x))


def additive_component(z: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance transform of z ~ U[0, 1]."""
    return math.sqrt(3.0) * (2.0 * z - 1.0)


BUILTINS: dict[str, Callable[..., float]] = {
    "sphere": sphere,
    "rastrigin": rastrigin,
    "rosenbrock": rosenbrock,
    "branin": branin,
    "styblinski-tang": styblinski_tang,
    "additive-anova": None,  # built specially; needs coefficients and bounds
}


def evaluate_builtin(name: str, x: Sequence[float], coeffs: Sequence[float] | None = None) -> float:
    """Evaluate a builtin's closed form directly (no direction wrapping).

    additive-anova takes x as already-normalized coordinates in [0, 1] plus
    the coefficient vector; the other builtins take raw coordinates.
    """
    if name not in BUILTINS:
        raise ObjectiveError(f"no builtin named {name!r}")
    arr = np.asarray(x, dtype=float)
    if name == "branin":
        if arr.size != 2:
            raise ObjectiveError("branin is 2-dimensional")
        return branin(arr)
    if name == "additive-anova":
        if coeffs is None:
            raise ObjectiveError("additive-anova needs a coefficient vector")
        c = np.asarray(coeffs, dtype=float)
        if c.size != arr.size:
            raise ObjectiveError("coefficient count must match dimension count")
        return float(np.sum(c * additive_component(arr)))
    if coeffs is not None:
        raise ObjectiveError(f"builtin {name!r} takes no coefficients")
    return BUILTINS[name](arr)


def _parse_coeffs(params: Mapping[str, str], d: int) -> np.ndarray:
    raw = params.get("coeffs")
    if raw is None:
        raise ObjectiveError("additive-anova needs a coeffs parameter, e.g. coeffs=3,1")
    try:
        coeffs = np.array([float(c) for c in raw.split(",")], dtype=float)
    except ValueError:
        raise ObjectiveError(f"coeffs {raw!r} is not a comma-separated number list") from None
    if coeffs.size != d:
        raise ObjectiveError(f"coeffs has {coeffs.size} entries for a {d}-dimensional space")
    return coeffs


@dataclass
class Objective:
    """Callable wrapper the engine evaluates candidates through.

    __call__ takes a candidate tuple and returns the engine-side score
    (already negated for minimize specs).  calls counts actual evaluations,
    which is how budget/cache accounting is audited.
    """

    spec: ObjectiveSpec
    fn: Callable[[tuple], float]
    calls: int = field(default=0)

    def __call__(self, values: tuple) -> float:
        self.calls += 1
        raw = self.fn(values)
        if not math.isfinite(raw):
            raise ObjectiveFailure("non-finite value")
        return -raw if self.spec.direction == "minimize" else raw


def _numeric_vector(space: SearchSpace, values: tuple) -> np.ndarray:
    return np.array([float(v) for v in values], dtype=float)


def _check_numeric_space(space: SearchSpace, name: str) -> None:
    for dim in space:
        if dim.kind == "cat":
            raise ObjectiveError(f"builtin {name!r} needs numeric dimensions; {dim.name} is categorical")


def make_objective(spec: ObjectiveSpec | str, space: SearchSpace) -> Objective:
    """Bind a spec to a space, returning the engine-facing callable."""
    if isinstance(spec, str):
        spec = parse_objective_spec(spec)

    if spec.kind == "external":
        def fn(values: tuple, _spec=spec, _space=space) -> float:
            return evaluate_external(_spec.target, values, _space, _spec.timeout)
        return Objective(spec=spec, fn=fn)

    name = spec.target
    params = spec.param_map()
    _check_numeric_space(space, name)

    if name == "branin" and len(space) != 2:
        raise ObjectiveError(f"branin is 2-dimensional; space has {len(space)} dimensions")

    if name == "additive-anova":
        coeffs = _parse_coeffs(params, len(space))
        lows = np.array([d.low for d in space], dtype=float)
        highs = np.array([d.high for d in space], dtype=float)
        if np.any(highs <= lows):
            raise ObjectiveError("additive-anova needs strictly positive ranges for normalization")

        def fn(values: tuple, _c=coeffs, _lo=lows, _span=highs - lows) -> float:
            z = (_numeric_vector(space, values) - _lo) / _span
            return float(np.sum(_c * additive_component(z)))

        return Objective(spec=spec, fn=fn)

    if params:
        raise ObjectiveError(f"builtin {name!r} takes no parameters, got {sorted(params)}")
    base = BUILTINS[name]

    def fn(values: tuple, _base=base) -> float:
        return _base(_numeric_vector(space, values))

    return Objective(spec=spec, fn=fn)


def format_argument(dim_kind: str, name: str, value: Any) -> str:
    """One name=value argument.  Integers render without a decimal point,
    reals with repr (round-trip exact), categoricals as plain strings."""
    if dim_kind == "int":
        return f"{name}={int(value)}"
    if dim_kind == "real":
        return f"{name}={float(value)!r}"
    return f"{name}={value}"


def evaluate_external(command: str, values: tuple, space: SearchSpace, timeout: float) -> float:
    """Run an external scorer once.

    The command is launched with one name=value argument per dimension in
    space order.  The final line of stdout must parse as a decimal score and
    the exit code must be 0; anything else raises ObjectiveFailure.
    """
    argv = shlex.split(command)
    if not argv:
        raise ObjectiveError("external command is empty")
    argv += [format_argument(d.kind, d.name, v) for d, v in zip(space.dimensions, values)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        raise ObjectiveFailure("timeout") from None
    except OSError as exc:
        raise ObjectiveFailure(f"spawn failed: {exc}") from None
    if proc.returncode != 0:
        raise ObjectiveFailure(f"exit {proc.returncode}")
    lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines:
        raise ObjectiveFailure("no output")
    try:
        score = float(lines[-1].strip())
    except ValueError:
        raise ObjectiveFailure(f"unparseable output {lines[-1].strip()!r}") from None
    if not math.isfinite(score):
        raise ObjectiveFailure("non-finite value")
    return score
