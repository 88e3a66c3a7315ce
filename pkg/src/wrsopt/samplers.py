"""Candidate generation: weighted random search steps, plain random search,
and the baseline strategies (Sobol sequence, Nelder-Mead, particle swarm).

Random draws follow a strict budget per operation so that entire candidate
streams are reproducible: rs_step consumes exactly one uniform per dimension,
wrs_step consumes one uniform per RESAMPLED dimension from the value stream
plus one per step from a separate decision stream.  Keeping the decision
stream separate is what makes an all-ones profile replay the RS stream
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sobol import SobolEngine
from .space import SearchSpace, sample_dimension


class SamplerError(RuntimeError):
    """Sampler misuse: bad profile, wrong ask/tell order, unsupported space."""


@dataclass
class ChangeProfile:
    """Per-dimension resampling policy for WRS.

    probs: change probabilities, at least one exactly 1.0, all positive.
    k_mins: minimum fresh-value counts; a dimension resamples unconditionally
        until its gen_count exceeds its k_min.
    gen_counts: fresh values drawn so far per dimension (mutated by wrs_step).
    """

    probs: tuple[float, ...]
    k_mins: tuple[int, ...]
    gen_counts: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.probs = tuple(float(p) for p in self.probs)
        self.k_mins = tuple(int(k) for k in self.k_mins)
        if not self.gen_counts:
            self.gen_counts = [0] * len(self.probs)
        self.gen_counts = [int(g) for g in self.gen_counts]
        d = len(self.probs)
        if d == 0:
            raise SamplerError("profile must cover at least one dimension")
        if len(self.k_mins) != d or len(self.gen_counts) != d:
            raise SamplerError("probs, k_mins, gen_counts must have equal length")
        if any(not 0.0 < p <= 1.0 for p in self.probs):
            raise SamplerError("change probabilities must lie in (0, 1]")
        if max(self.probs) != 1.0:
            raise SamplerError("at least one change probability must be exactly 1")
        if any(k < 0 for k in self.k_mins) or any(g < 0 for g in self.gen_counts):
            raise SamplerError("k_mins and gen_counts must be non-negative")

    @classmethod
    def all_ones(cls, d: int) -> "ChangeProfile":
        """Uniform profile: every dimension always changes (plain RS)."""
        return cls(probs=(1.0,) * d, k_mins=(0,) * d, gen_counts=[0] * d)


def rs_step(space: SearchSpace, rng: np.random.Generator) -> tuple:
    """Fresh uniform candidate; one rng.random() per dimension."""
    return space.sample(rng)


def wrs_step(
    space: SearchSpace,
    best: tuple | None,
    profile: ChangeProfile,
    value_rng: np.random.Generator,
    decision_rng: np.random.Generator,
) -> tuple:
    """One weighted-random-search proposal against the incumbent.

    Draws a single uniform p from the decision stream.  Dimension i is
    resampled iff p_i >= p or gen_counts[i] <= k_mins[i]; otherwise the
    incumbent's coordinate is copied.  The shared p couples the dimensions:
    whenever a low-probability dimension changes, every dimension with a
    larger p_i changes too, which gives the nested mixture over change sets.
    At least one dimension always resamples because max p_i = 1 >= p.

    best may be None only when every dimension is due a forced resample
    (gen_counts still at or below k_mins), i.e. on the very first step of a
    run without an initial phase.
    """
    if len(profile.probs) != len(space):
        raise SamplerError(f"profile covers {len(profile.probs)} dimensions, space has {len(space)}")
    if best is not None and len(best) != len(space):
        raise SamplerError("incumbent does not match the space")
    p = decision_rng.random()
    out = []
    for i, dim in enumerate(space.dimensions):
        if profile.probs[i] >= p or profile.gen_counts[i] <= profile.k_mins[i]:
            out.append(sample_dimension(dim, value_rng))
            profile.gen_counts[i] += 1
        else:
            if best is None:
                raise SamplerError("no incumbent to copy from")
            out.append(best[i])
    return tuple(out)


# -- shared real-relaxation helpers for NM / PSO -----------------------------

def relaxed_bounds(space: SearchSpace) -> tuple[np.ndarray, np.ndarray]:
    """Continuous box the relaxation moves in; categorical axes use indices."""
    lo, hi = [], []
    for dim in space:
        if dim.kind == "cat":
            lo.append(0.0)
            hi.append(float(len(dim.values) - 1))
        else:
            lo.append(float(dim.low))
            hi.append(float(dim.high))
    return np.array(lo), np.array(hi)


def emit_relaxed(space: SearchSpace, x: np.ndarray) -> tuple:
    """Map a relaxed position to a valid candidate (round ints, index-clamp cats)."""
    out = []
    for i, dim in enumerate(space.dimensions):
        v = float(x[i])
        if dim.kind == "real":
            out.append(min(max(v, dim.low), dim.high))
        elif dim.kind == "int":
            out.append(int(min(max(round(v), dim.low), dim.high)))
        else:
            idx = int(min(max(round(v), 0), len(dim.values) - 1))
            out.append(dim.values[idx])
    return tuple(out)


class SobolSampler:
    """Deterministic low-discrepancy candidate stream over the space."""

    def __init__(self, space: SearchSpace):
        self.space = space
        try:
            self._engine = SobolEngine(len(space))
        except ValueError as exc:
            raise SamplerError(str(exc)) from exc

    def ask(self) -> tuple:
        u = self._engine.next_point()
        out = []
        for i, dim in enumerate(self.space.dimensions):
            if dim.kind == "real":
                out.append(dim.low + u[i] * (dim.high - dim.low))
            elif dim.kind == "int":
                v = int(round(dim.low + u[i] * (dim.high - dim.low)))
                out.append(min(max(v, dim.low), dim.high))
            else:
                k = len(dim.values)
                out.append(dim.values[min(int(u[i] * k), k - 1)])
        return tuple(out)


class NelderMeadSampler:
    """Downhill-simplex search as an ask/tell state machine.

    The simplex lives in the real relaxation; candidates are rounded at
    emission.  Scores are maximized (the engine convention), so internally
    the simplex orders vertices by loss = -score.  Once every vertex is
    identical the sampler reports convergence and keeps re-emitting the best
    vertex; the engine's cache turns those into zero-cost trials.
    """

    def __init__(
        self,
        space: SearchSpace,
        rng: np.random.Generator,
        alpha: float = 1.0,
        gamma: float = 2.0,
        rho: float = 0.5,
        sigma: float = 0.5,
        init_step: float = 0.05,
        init_vertex: Sequence[float] | None = None,
    ):
        self.space = space
        self.alpha, self.gamma, self.rho, self.sigma = alpha, gamma, rho, sigma
        self._lo, self._hi = relaxed_bounds(space)
        d = len(space)
        if init_vertex is None:
            base = self._lo + rng.random(d) * (self._hi - self._lo)
        else:
            base = np.clip(np.asarray(init_vertex, dtype=float), self._lo, self._hi)
            if base.shape != (d,):
                raise SamplerError("init_vertex must match the space dimensionality")
        vertices = [base]
        for i in range(d):
            v = base.copy()
            delta = init_step * (self._hi[i] - self._lo[i])
            # step inward if the outward step would leave the box
            v[i] = v[i] + delta if v[i] + delta <= self._hi[i] else v[i] - delta
            vertices.append(v)
        self._vertices = np.array(vertices)
        self._losses = np.full(d + 1, np.nan)
        self._phase = "init"
        self._init_idx = 0
        self._current = self._vertices[0]
        self._awaiting = False
        self._x0 = None  # centroid of all but the worst vertex
        self._xr = None
        self._lr = np.inf
        self._shrink_idx = 0
        self.converged = False

    def ask(self) -> tuple:
        if self._awaiting:
            raise SamplerError("ask() called twice without tell()")
        self._awaiting = True
        return emit_relaxed(self.space, self._current)

    def tell(self, score: float) -> None:
        if not self._awaiting:
            raise SamplerError("tell() without a pending ask()")
        self._awaiting = False
        if self.converged:
            return
        loss = -float(score)

        if self._phase == "init":
            self._losses[self._init_idx] = loss
            self._init_idx += 1
            if self._init_idx <= len(self.space):
                self._current = self._vertices[self._init_idx]
                return
            self._begin_iteration()
            return

        if self._phase == "reflect":
            self._lr = loss
            self._xr = self._current
            if loss < self._losses[0]:
                self._current = self._clip(self._x0 + self.gamma * (self._xr - self._x0))
                self._phase = "expand"
            elif loss < self._losses[-2]:
                self._replace_worst(self._xr, loss)
            elif loss < self._losses[-1]:
                self._current = self._clip(self._x0 + self.rho * (self._xr - self._x0))
                self._phase = "contract_out"
            else:
                self._current = self._clip(self._x0 - self.rho * (self._x0 - self._vertices[-1]))
                self._phase = "contract_in"
            return

        if self._phase == "expand":
            if loss < self._lr:
                self._replace_worst(self._current, loss)
            else:
                self._replace_worst(self._xr, self._lr)
            return

        if self._phase == "contract_out":
            if loss <= self._lr:
                self._replace_worst(self._current, loss)
            else:
                self._start_shrink()
            return

        if self._phase == "contract_in":
            if loss < self._losses[-1]:
                self._replace_worst(self._current, loss)
            else:
                self._start_shrink()
            return

        if self._phase == "shrink":
            self._losses[self._shrink_idx] = loss
            self._shrink_idx += 1
            if self._shrink_idx < len(self._vertices):
                self._current = self._vertices[self._shrink_idx]
            else:
                self._begin_iteration()
            return

        raise SamplerError(f"unknown phase {self._phase!r}")

    def _clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self._lo, self._hi)

    def _replace_worst(self, x: np.ndarray, loss: float) -> None:
        self._vertices[-1] = x
        self._losses[-1] = loss
        self._begin_iteration()

    def _begin_iteration(self) -> None:
        order = np.argsort(self._losses, kind="stable")
        self._vertices = self._vertices[order]
        self._losses = self._losses[order]
        if np.all(self._vertices == self._vertices[0]):
            self.converged = True
            self._current = self._vertices[0]
            return
        self._x0 = self._vertices[:-1].mean(axis=0)
        self._current = self._clip(self._x0 + self.alpha * (self._x0 - self._vertices[-1]))
        self._phase = "reflect"

    def _start_shrink(self) -> None:
        for j in range(1, len(self._vertices)):
            self._vertices[j] = self._clip(self._vertices[0] + self.sigma * (self._vertices[j] - self._vertices[0]))
        self._shrink_idx = 1
        self._current = self._vertices[1]
        self._phase = "shrink"

    def best_vertex(self) -> tuple:
        i = int(np.nanargmin(self._losses))
        return emit_relaxed(self.space, self._vertices[i])


class PsoSampler:
    """Particle swarm with the standard constriction coefficients.

    ask() returns one generation of positions (the first call returns the
    uniform initial swarm); tell() takes the matching scores and refreshes
    personal and global bests.  Positions are clamped to bounds after each
    velocity update; integer and categorical axes are rounded at emission.
    """

    def __init__(
        self,
        space: SearchSpace,
        rng: np.random.Generator,
        swarm: int = 20,
        omega: float = 0.7298,
        c1: float = 1.49618,
        c2: float = 1.49618,
    ):
        if swarm < 2:
            raise SamplerError("swarm size must be at least 2")
        self.space = space
        self.rng = rng
        self.swarm = int(swarm)
        self.omega, self.c1, self.c2 = omega, c1, c2
        self._lo, self._hi = relaxed_bounds(space)
        d = len(space)
        self._x = self._lo + rng.random((self.swarm, d)) * (self._hi - self._lo)
        self._v = np.zeros((self.swarm, d))
        self._pbest = self._x.copy()
        self._pbest_score = np.full(self.swarm, -np.inf)
        self._gbest = self._x[0].copy()
        self._gbest_score = -np.inf
        self._initialized = False
        self._awaiting = False

    def ask(self) -> list[tuple]:
        if self._awaiting:
            raise SamplerError("ask() called twice without tell()")
        self._awaiting = True
        if self._initialized:
            r1 = self.rng.random(self._x.shape)
            r2 = self.rng.random(self._x.shape)
            self._v = (
                self.omega * self._v
                + self.c1 * r1 * (self._pbest - self._x)
                + self.c2 * r2 * (self._gbest - self._x)
            )
            self._x = np.clip(self._x + self._v, self._lo, self._hi)
        return [emit_relaxed(self.space, xi) for xi in self._x]

    def tell(self, scores: Sequence[float]) -> None:
        if not self._awaiting:
            raise SamplerError("tell() without a pending ask()")
        if len(scores) != self.swarm:
            raise SamplerError(f"expected {self.swarm} scores, got {len(scores)}")
        self._awaiting = False
        self._initialized = True
        s = np.asarray(scores, dtype=float)
        improved = s > self._pbest_score
        self._pbest[improved] = self._x[improved]
        self._pbest_score[improved] = s[improved]
        top = int(np.argmax(self._pbest_score))
        if self._pbest_score[top] > self._gbest_score:
            self._gbest = self._pbest[top].copy()
            self._gbest_score = float(self._pbest_score[top])
