"""Run orchestration: the two-phase weighted search, the baseline strategies,
the evaluation cache, and best-so-far tracking.

Scores are maximized throughout.  Every trial, including cache hits and
failures, consumes exactly one unit of the budget, so a completed run always
holds exactly N records.

Randomness is split into three independent streams derived from the run
seed: candidate values, per-step change decisions, and forest bootstrapping.
Only the value stream feeds candidate coordinates, which is why a weighted
run whose probabilities are all 1 replays the plain random-search candidate
sequence exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .importance import (
    ForestConfig,
    ImportanceError,
    fit_forest,
    main_effect_fractions,
    min_samples_schedule,
    weights_to_probabilities,
)
from .objectives import Objective, ObjectiveFailure
from .samplers import (
    ChangeProfile,
    NelderMeadSampler,
    PsoSampler,
    SamplerError,
    SobolSampler,
    rs_step,
    wrs_step,
)
from .space import SearchSpace, candidate_key, space_digest, space_to_dict
from .triallog import RunHeader, TrialRecord

STRATEGIES = ("wrs", "rs", "sobol", "nelder-mead", "pso")
FAILED_SCORE = float("-inf")

_SAMPLER_OPTION_KEYS = {
    "nelder-mead": ("alpha", "gamma", "rho", "sigma", "init_step"),
    "pso": ("swarm", "omega", "c1", "c2"),
}


class ConfigError(ValueError):
    """Invalid run configuration (caller mistake, not a runtime failure)."""


class EngineError(RuntimeError):
    """Runtime failure inside a run."""


class AllTrialsFailedError(EngineError):
    """Every trial of a run (or of the whole initial phase) failed."""


@dataclass(frozen=True)
class RunConfig:
    strategy: str
    budget: int
    init: int = 0
    seed: int = 0
    prob_overrides: tuple[tuple[str, float], ...] = ()
    kmin_overrides: tuple[tuple[str, int], ...] = ()
    sampler_options: tuple[tuple[str, float], ...] = ()

    def validate(self, space: SearchSpace) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.budget < 1:
            raise ConfigError("budget must be at least 1")
        if not 0 <= self.init < self.budget:
            raise ConfigError(f"need 0 <= init < budget, got init={self.init} budget={self.budget}")
        if self.strategy != "wrs":
            if self.init != 0:
                raise ConfigError("--init only applies to the wrs strategy")
            if self.prob_overrides or self.kmin_overrides:
                raise ConfigError("probability/k-min overrides only apply to the wrs strategy")
        for name, p in self.prob_overrides:
            if name != "*":
                space.index_of(name)  # raises SpaceError on unknown names
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"override probability for {name!r} must lie in (0, 1], got {p}")
        for name, k in self.kmin_overrides:
            if name != "*":
                space.index_of(name)
            if k < 0:
                raise ConfigError(f"k-min override for {name!r} must be non-negative")
        allowed = _SAMPLER_OPTION_KEYS.get(self.strategy, ())
        for key, value in self.sampler_options:
            if key not in allowed:
                raise ConfigError(f"option {key!r} does not apply to strategy {self.strategy!r}")
            if key == "swarm" and int(value) < 2:
                raise ConfigError("swarm must hold at least 2 particles")


@dataclass(frozen=True)
class BestState:
    """Incumbent candidate and score; ties replace the incumbent."""

    candidate: tuple | None = None
    score: float = FAILED_SCORE
    iteration: int = 0


def update_best(best: BestState, trial: TrialRecord) -> BestState:
    """Fold one trial into the incumbent.  Failed trials (score -inf) never
    win; any other trial with score >= incumbent replaces it."""
    if trial.status == "failed" or trial.score == FAILED_SCORE:
        return best
    if trial.score >= best.score:
        return BestState(candidate=tuple(trial.values), score=trial.score, iteration=trial.iteration)
    return best


class EvalCache:
    """Score memo keyed by exact candidate identity.

    Failures are cached too: re-proposing a crashed candidate must not
    re-run the objective.
    """

    def __init__(self) -> None:
        self._store: dict[str, tuple[float, str | None]] = {}
        self.hits = 0

    def __len__(self) -> int:
        return len(self._store)

    def lookup(self, key: str) -> tuple[float, str | None] | None:
        return self._store.get(key)

    def store(self, key: str, score: float, error: str | None) -> None:
        self._store[key] = (score, error)


def evaluate_with_cache(
    objective: Objective,
    space: SearchSpace,
    values: tuple,
    cache: EvalCache,
    iteration: int,
    phase: str,
) -> TrialRecord:
    """Evaluate one candidate through the cache and build its record."""
    key = candidate_key(space, values)
    start = time.perf_counter()
    hit = cache.lookup(key)
    if hit is not None:
        cache.hits += 1
        score, error = hit
        return TrialRecord(
            iteration=iteration,
            values=tuple(values),
            score=score,
            phase=phase,
            status="cached-hit",
            wall_time=time.perf_counter() - start,
            error=error,
        )
    try:
        score = objective(values)
        status, error = "evaluated", None
    except ObjectiveFailure as exc:
        score, status, error = FAILED_SCORE, "failed", exc.reason
    cache.store(key, score, error)
    return TrialRecord(
        iteration=iteration,
        values=tuple(values),
        score=score,
        phase=phase,
        status=status,
        wall_time=time.perf_counter() - start,
        error=error,
    )


@dataclass
class RngBundle:
    """The three independent streams a run consumes."""

    values: np.random.Generator
    decisions: np.random.Generator
    forest: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngBundle":
        streams = np.random.SeedSequence(seed).spawn(3)
        return cls(*(np.random.default_rng(s) for s in streams))


@dataclass
class RunResult:
    header: RunHeader
    records: list[TrialRecord]
    best: BestState
    warnings: list[str] = field(default_factory=list)


def _all_failed(records: Sequence[TrialRecord]) -> bool:
    return bool(records) and all(r.status == "failed" for r in records)


def run_rs_phase(
    objective: Objective,
    space: SearchSpace,
    n0: int,
    rng: np.random.Generator,
    records: list[TrialRecord],
    cache: EvalCache,
    best: BestState,
    phase: str = "rs",
) -> BestState:
    """n0 plain random-search trials appended to records; aborts only when
    every one of them fails."""
    start = len(records)
    for it in range(start + 1, start + n0 + 1):
        values = rs_step(space, rng)
        rec = evaluate_with_cache(objective, space, values, cache, it, phase)
        records.append(rec)
        best = update_best(best, rec)
    if n0 > 0 and _all_failed(records[start:]):
        raise AllTrialsFailedError(f"all {n0} trials of the {phase} phase failed")
    return best


def _resolve_overrides(space: SearchSpace, pairs: Sequence[tuple[str, float]]) -> dict[int, float]:
    """Name-keyed overrides to index-keyed; '*' covers every dimension and
    is applied before specific names regardless of flag order."""
    out: dict[int, float] = {}
    for name, v in pairs:
        if name == "*":
            for i in range(len(space)):
                out.setdefault(i, v)
    for name, v in pairs:
        if name != "*":
            out[space.index_of(name)] = v
    return out


def _build_profile(
    space: SearchSpace,
    config: RunConfig,
    phase1: Sequence[TrialRecord],
    forest_rng: np.random.Generator,
    warnings: list[str],
) -> tuple[ChangeProfile, list[float] | None]:
    """Importance fit plus overrides, frozen into the phase-2 profile.

    Returns (profile, weights); weights is None when no forest was fit
    (full override coverage or a degenerate fallback).
    """
    d = len(space)
    prob_over = _resolve_overrides(space, config.prob_overrides)
    kmin_over = {i: int(v) for i, v in _resolve_overrides(space, config.kmin_overrides).items()}

    weights: list[float] | None = None
    if len(prob_over) == d:
        probs = [prob_over[i] for i in range(d)]
    else:
        base: Sequence[float] | None = None
        fallback_reason = None
        if config.init < 2:
            fallback_reason = "phase 1 too short to estimate importance"
        else:
            try:
                forest = fit_forest(phase1, space, ForestConfig(), forest_rng)
                if forest.degenerate:
                    fallback_reason = "phase-1 scores carried no variance"
                else:
                    fractions = main_effect_fractions(forest, space)
                    weights = list(fractions.fractions)
                    base = weights_to_probabilities(fractions)
            except ImportanceError as exc:
                fallback_reason = f"importance estimation failed ({exc})"
        if base is None:
            warnings.append(f"{fallback_reason}; using uniform change probabilities")
            base = [1.0] * d
            weights = None
        probs = [prob_over.get(i, base[i]) for i in range(d)]

    k_mins = min_samples_schedule(probs, config.init, config.budget, kmin_over)
    try:
        profile = ChangeProfile(probs=tuple(probs), k_mins=k_mins, gen_counts=[config.init] * d)
    except SamplerError as exc:
        raise ConfigError(f"override produces an invalid profile: {exc}") from exc
    return profile, weights


def run_wrs(
    objective: Objective,
    space: SearchSpace,
    config: RunConfig,
    rngs: RngBundle,
) -> tuple[BestState, list[TrialRecord], dict, list[str]]:
    """Two-phase run: init random trials, one importance fit, then weighted
    steps against the incumbent for the rest of the budget."""
    warnings: list[str] = []
    records: list[TrialRecord] = []
    cache = EvalCache()
    best = run_rs_phase(objective, space, config.init, rngs.values, records, cache, BestState())

    profile, weights = _build_profile(space, config, records, rngs.forest, warnings)
    profile_dict = {
        "weights": weights,
        "probs": list(profile.probs),
        "k_mins": list(profile.k_mins),
    }

    for it in range(config.init + 1, config.budget + 1):
        if best.candidate is not None:
            incumbent = best.candidate
        elif records:
            incumbent = records[-1].values  # every trial so far failed; copy coordinates from the last attempt
        else:
            incumbent = None  # init=0 first step: gen_counts <= k_mins forces a full resample
        values = wrs_step(space, incumbent, profile, rngs.values, rngs.decisions)
        rec = evaluate_with_cache(objective, space, values, cache, it, "wrs")
        records.append(rec)
        best = update_best(best, rec)

    if _all_failed(records):
        raise AllTrialsFailedError("every trial of the run failed")
    return best, records, profile_dict, warnings


def _option_map(config: RunConfig) -> dict[str, float]:
    return dict(config.sampler_options)


def run_baseline(
    strategy: str,
    objective: Objective,
    space: SearchSpace,
    config: RunConfig,
    rngs: RngBundle,
) -> tuple[BestState, list[TrialRecord]]:
    """Exactly config.budget trials under one of the non-weighted strategies."""
    records: list[TrialRecord] = []
    cache = EvalCache()
    best = BestState()
    opts = _option_map(config)

    if strategy == "rs":
        best = run_rs_phase(objective, space, config.budget, rngs.values, records, cache, best)
    elif strategy == "sobol":
        sampler = SobolSampler(space)
        for it in range(1, config.budget + 1):
            rec = evaluate_with_cache(objective, space, sampler.ask(), cache, it, "sobol")
            records.append(rec)
            best = update_best(best, rec)
    elif strategy == "nelder-mead":
        nm = NelderMeadSampler(space, rngs.values, **opts)
        for it in range(1, config.budget + 1):
            rec = evaluate_with_cache(objective, space, nm.ask(), cache, it, "nelder-mead")
            records.append(rec)
            best = update_best(best, rec)
            nm.tell(rec.score)
    elif strategy == "pso":
        if "swarm" in opts:
            opts["swarm"] = int(opts["swarm"])
        pso = PsoSampler(space, rngs.values, **opts)
        it = 1
        while it <= config.budget:
            batch = pso.ask()
            take = min(len(batch), config.budget - it + 1)
            scores = []
            for values in batch[:take]:
                rec = evaluate_with_cache(objective, space, values, cache, it, "pso")
                records.append(rec)
                best = update_best(best, rec)
                scores.append(rec.score)
                it += 1
            if take == len(batch):
                pso.tell(scores)
    else:
        raise ConfigError(f"unknown baseline strategy {strategy!r}")

    if _all_failed(records):
        raise AllTrialsFailedError("every trial of the run failed")
    return best, records


def execute_run(space: SearchSpace, objective: Objective, config: RunConfig) -> RunResult:
    """Validate, run the requested strategy, and assemble the log header."""
    config.validate(space)
    rngs = RngBundle.from_seed(config.seed)

    if config.strategy == "wrs":
        best, records, profile_dict, warnings = run_wrs(objective, space, config, rngs)
    else:
        best, records = run_baseline(config.strategy, objective, space, config, rngs)
        profile_dict, warnings = None, []

    options: dict = {}
    if config.sampler_options:
        options["sampler"] = {k: v for k, v in sorted(config.sampler_options)}
    if config.prob_overrides:
        options["prob_overrides"] = {k: v for k, v in sorted(config.prob_overrides)}
    if config.kmin_overrides:
        options["kmin_overrides"] = {k: v for k, v in sorted(config.kmin_overrides)}

    header = RunHeader(
        strategy=config.strategy,
        budget=config.budget,
        init=config.init,
        seed=config.seed,
        objective=objective.spec.text or f"{objective.spec.kind}:{objective.spec.target}",
        space=space_to_dict(space),
        space_digest=space_digest(space),
        profile=profile_dict,
        options=options,
    )
    return RunResult(header=header, records=records, best=best, warnings=warnings)
