"""Seeded Monte Carlo estimation of error probabilities and ensemble statistics.

Every estimator is a pure function of its parameters and the master seed:
trial t draws from substream(seed, label, t), so splitting trials across
worker threads cannot change the estimate, only the wall time. Uncertainty
is reported as an exact binomial (Clopper-Pearson) interval at 95% unless
another confidence level is requested.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import beta as beta_dist

from .decode import SupportDecoder, _chol_logdet
from .model import (
    FieldTag,
    ModelConfig,
    Support,
    as_matrix,
    enumerate_supports,
    field_gaussian,
    make_support,
    sample_gaussian_matrix,
    substream,
)
from .spectra import covariance, pair_incoherence


@dataclass(frozen=True)
class ErrorEstimate:
    """Empirical error probability with its exact binomial interval."""

    p_hat: float
    trials: int
    ci_low: float
    ci_high: float
    master_seed: int
    extras: dict = dc_field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo experiment: a model configuration plus a mode.

    mode is "binary" (with a support pair), "multiple" (full size-K candidate
    set), or "ensemble" (fresh matrix draws, `trials` inner trials per draw).
    """

    config: ModelConfig
    mode: str
    trials: int
    S0: Support | None = None
    S1: Support | None = None
    matrix_draws: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode == "binary":
            if self.S0 is None or self.S1 is None or self.S0.indices == self.S1.indices:
                raise ValueError("binary mode needs two distinct supports")
        elif self.mode == "ensemble":
            if self.matrix_draws < 1:
                raise ValueError("ensemble mode needs matrix_draws >= 1")
        elif self.mode != "multiple":
            raise ValueError(f"unknown mode {self.mode!r}")


def clopper_pearson(errors: int, trials: int, confidence: float = 0.95) -> tuple:
    """Two-sided exact binomial confidence interval for errors/trials."""
    if not 0 <= errors <= trials or trials < 1:
        raise ValueError("need 0 <= errors <= trials, trials >= 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = 1.0 - confidence
    low = 0.0 if errors == 0 else float(beta_dist.ppf(alpha / 2, errors, trials - errors + 1))
    high = 1.0 if errors == trials else float(beta_dist.ppf(1 - alpha / 2, errors + 1, trials - errors))
    return low, high


def _estimate(errors: int, trials: int, seed: int, confidence: float, **extras) -> ErrorEstimate:
    low, high = clopper_pearson(errors, trials, confidence)
    return ErrorEstimate(p_hat=errors / trials, trials=trials, ci_low=low,
                         ci_high=high, master_seed=seed, extras=extras)


def _map_trials(fn, trials: int, workers: int) -> list:
    """Evaluate fn(t) for t in range(trials); thread count never changes results."""
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    out = [None] * trials
    chunk = max(1, math.ceil(trials / workers))

    def run(chunk_start: int) -> None:
        for t in range(chunk_start, min(chunk_start + chunk, trials)):
            out[t] = fn(t)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run, range(0, trials, chunk)))
    return out


def _draw_observation(entries: np.ndarray, cols: np.ndarray, sigma2: float, T: int,
                      field: FieldTag, rng: np.random.Generator) -> np.ndarray:
    X = field_gaussian(rng, (cols.shape[1], T), field)
    W = field_gaussian(rng, (entries.shape[0], T), field) * np.sqrt(sigma2)
    return cols @ X + W


def estimate_binary_perr(A, S0: Support, S1: Support, sigma2: float, T: int,
                         trials: int, seed: int, workers: int = 1,
                         confidence: float = 0.95) -> ErrorEstimate:
    """Empirical error of the binary likelihood-ratio test.

    Each trial draws the true hypothesis uniformly from {S0, S1}, generates
    signals and noise, and records whether the LRT picks the wrong support.
    """
    if S0.indices == S1.indices:
        raise ValueError("binary estimation needs distinct supports")
    entries, field = as_matrix(A)
    kappa = field.kappa
    M = entries.shape[0]
    cols = (entries[:, S0.as_array()], entries[:, S1.as_array()])
    L0, logdet0 = _chol_logdet(covariance(A, S0, sigma2))
    L1, logdet1 = _chol_logdet(covariance(A, S1, sigma2))

    def trial(t: int) -> tuple:
        rng = substream(seed, "binary-trial", t)
        truth = int(rng.integers(0, 2))
        return truth, _draw_observation(entries, cols[truth], sigma2, T, field, rng)

    results = _map_trials(trial, trials, workers)
    truths = np.asarray([r[0] for r in results])
    flat = np.concatenate([r[1] for r in results], axis=1)
    q0 = np.sum(np.abs(solve_triangular(L0, flat, lower=True)) ** 2, axis=0)
    q1 = np.sum(np.abs(solve_triangular(L1, flat, lower=True)) ** 2, axis=0)
    per_trial = (q1 - q0).reshape(trials, T).sum(axis=1)
    statistic = -kappa * per_trial - kappa * T * (logdet1 - logdet0)
    decisions = (statistic > 0).astype(int)
    errors = int(np.sum(decisions != truths))
    return _estimate(errors, trials, seed, confidence)


def estimate_multiple_perr(A, K: int, sigma2: float, T: int, trials: int, seed: int,
                           workers: int = 1, confidence: float = 0.95) -> ErrorEstimate:
    """Empirical error of maximum-likelihood recovery over all size-K supports.

    The error event is exact support mismatch; sizes of wrong-decode
    difference sets are kept as a k_d histogram in the extras.
    """
    entries, field = as_matrix(A)
    N = entries.shape[1]
    candidates = enumerate_supports(N, K)
    decoder = SupportDecoder(A, candidates, sigma2)
    L = len(candidates)

    def trial(t: int) -> tuple:
        rng = substream(seed, "multiple-trial", t)
        truth = int(rng.integers(0, L))
        cols = entries[:, candidates[truth].as_array()]
        return truth, _draw_observation(entries, cols, sigma2, T, field, rng)

    results = _map_trials(trial, trials, workers)
    truths = np.asarray([r[0] for r in results])
    stack = np.stack([r[1] for r in results])
    chosen = decoder.decode_index_batch(stack)
    wrong = chosen != truths
    errors = int(np.sum(wrong))
    kd_hist = {}
    for t in np.flatnonzero(wrong):
        k_d = len(candidates[truths[t]].difference(candidates[chosen[t]]))
        kd_hist[k_d] = kd_hist.get(k_d, 0) + 1
    return _estimate(errors, trials, seed, confidence, kd_histogram=kd_hist)


def estimate_ensemble_perr(M: int, N: int, K: int, sigma2: float, T: int,
                           matrix_draws: int, trials_per_matrix: int, seed: int,
                           field: FieldTag = FieldTag.REAL, workers: int = 1,
                           confidence: float = 0.95) -> ErrorEstimate:
    """Error probability averaged over fresh Gaussian measurement matrices.

    The grand estimate pools all matrix_draws * trials_per_matrix trials;
    per-matrix estimates are retained in the extras for the
    P{P_err(A) <= eps} reading.
    """
    candidates = enumerate_supports(N, K)
    L = len(candidates)
    per_matrix = []
    total_errors = 0
    for d in range(matrix_draws):
        A = sample_gaussian_matrix(M, N, field, substream(seed, "ensemble-matrix", d))
        decoder = SupportDecoder(A, candidates, sigma2)
        entries = A.entries

        def trial(t: int, entries=entries, candidates=candidates, d=d) -> tuple:
            rng = substream(seed, "ensemble-trial", d * trials_per_matrix + t)
            truth = int(rng.integers(0, L))
            cols = entries[:, candidates[truth].as_array()]
            return truth, _draw_observation(entries, cols, sigma2, T, field, rng)

        results = _map_trials(trial, trials_per_matrix, workers)
        truths = np.asarray([r[0] for r in results])
        stack = np.stack([r[1] for r in results])
        chosen = decoder.decode_index_batch(stack)
        errors = int(np.sum(chosen != truths))
        total_errors += errors
        per_matrix.append(errors / trials_per_matrix)

    per_matrix_arr = np.asarray(per_matrix)
    spread = (float(per_matrix_arr.min()), float(np.median(per_matrix_arr)),
              float(per_matrix_arr.max()))
    return _estimate(total_errors, matrix_draws * trials_per_matrix, seed, confidence,
                     per_matrix=tuple(per_matrix), spread_min_median_max=spread)


def estimate_incoherence_tail(M: int, N: int, K: int, sigma2: float, draws: int,
                              seed: int, field: FieldTag = FieldTag.REAL,
                              workers: int = 1, confidence: float = 0.95) -> ErrorEstimate:
    """Empirical P{pairwise incoherence <= gamma} over Gaussian matrix draws,
    for a fixed disjoint support pair (the hardest case k_d = K) and
    gamma = (M - 2K) / (3 sigma^2)."""
    if M <= 2 * K:
        raise ValueError("tail estimation requires M > 2K")
    if N < 2 * K:
        raise ValueError("need N >= 2K for a disjoint support pair")
    gamma = (M - 2 * K) / (3.0 * sigma2)
    Si = make_support(range(K), N)
    Sj = make_support(range(K, 2 * K), N)

    def draw(d: int) -> bool:
        A = sample_gaussian_matrix(M, N, field, substream(seed, "incoherence-tail", d))
        return pair_incoherence(A, Si, Sj, sigma2).value <= gamma

    hits = int(np.sum(_map_trials(draw, draws, workers)))
    return _estimate(hits, draws, seed, confidence, gamma=gamma)


@dataclass(frozen=True)
class IncoherenceMoment:
    """Sample mean and standard error of the pairwise incoherence."""

    mean: float
    se: float
    draws: int
    master_seed: int


def estimate_expected_incoherence(M: int, K: int, k_d: int, sigma2: float, draws: int,
                                  seed: int, field: FieldTag = FieldTag.REAL,
                                  workers: int = 1) -> IncoherenceMoment:
    """Monte Carlo mean of the pairwise incoherence for supports of size K
    whose difference sets have size k_d (overlap K - k_d)."""
    if M <= K + k_d:
        raise ValueError("requires M > K + k_d")
    if not 1 <= k_d <= K:
        raise ValueError("need 1 <= k_d <= K")
    N = K + k_d
    Si = make_support(range(K), N)
    Sj = make_support(list(range(K - k_d)) + list(range(K, K + k_d)), N)

    def draw(d: int) -> float:
        A = sample_gaussian_matrix(M, N, field, substream(seed, "incoherence-mean", d))
        return pair_incoherence(A, Si, Sj, sigma2).value

    values = np.asarray(_map_trials(draw, draws, workers))
    se = float(values.std(ddof=1) / np.sqrt(draws)) if draws > 1 else float("nan")
    return IncoherenceMoment(mean=float(values.mean()), se=se, draws=draws, master_seed=seed)


def run_experiment(spec: ExperimentSpec, A=None, workers: int = 1) -> ErrorEstimate:
    """Dispatch an ExperimentSpec to the matching estimator.

    Binary and multiple modes run against the fixed matrix A; ensemble mode
    draws its own matrices and ignores A.
    """
    cfg = spec.config
    if spec.mode == "ensemble":
        return estimate_ensemble_perr(cfg.M, cfg.N, cfg.K, cfg.sigma2, cfg.T,
                                      spec.matrix_draws, spec.trials, cfg.master_seed,
                                      field=cfg.field, workers=workers)
    if A is None:
        raise ValueError(f"{spec.mode} mode runs against a fixed measurement matrix")
    entries, _ = as_matrix(A)
    if entries.shape != (cfg.M, cfg.N):
        raise ValueError(f"matrix shape {entries.shape} does not match config ({cfg.M}, {cfg.N})")
    if spec.mode == "binary":
        return estimate_binary_perr(A, spec.S0, spec.S1, cfg.sigma2, cfg.T, spec.trials,
                                    cfg.master_seed, workers=workers)
    return estimate_multiple_perr(A, cfg.K, cfg.sigma2, cfg.T, spec.trials,
                                  cfg.master_seed, workers=workers)
