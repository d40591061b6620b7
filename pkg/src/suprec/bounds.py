"""Closed-form error bounds and sample-count thresholds.

Upper bounds come from the Chernoff machinery applied to the eigenvalues of
H; lower bounds from Fano's inequality with the average pairwise KL
divergence beta. Threshold formulas are evaluated in the log domain (log
binomials via lgamma) so they stay finite up to N ~ 1e6.

Probability bounds are reported raw and clamped to [0, 1] together with an
applicability flag; a bound whose stated precondition fails is still
evaluated but flagged inapplicable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .model import FieldTag, Support, as_matrix, enumerate_supports
from .spectra import covariance, h_eigenvalues, pair_incoherence

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class BoundReport:
    """A probability-of-error bound value with its applicability status."""

    raw_value: float
    clamped: float
    applicable: bool
    precondition_note: str = ""
    extras: dict = dc_field(default_factory=dict)


@dataclass(frozen=True)
class ThresholdReport:
    """A sample-count threshold (on MT, T, or M) with its variant forms."""

    quantity: str
    value: float
    formula_id: str
    inputs: dict
    forms: dict


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _report(raw: float, applicable: bool, note: str = "", **extras) -> BoundReport:
    return BoundReport(raw_value=float(raw), clamped=_clamp01(raw),
                       applicable=applicable, precondition_note=note, extras=extras)


def log_binomial(N: int, K: int) -> float:
    if not 0 <= K <= N:
        raise ValueError(f"binomial out of range: C({N},{K})")
    return math.lgamma(N + 1) - math.lgamma(K + 1) - math.lgamma(N - K + 1)


def chernoff_mu(h_eigs, s: float, T: int, kappa: float) -> float:
    """Log moment-generating function of the LRT statistic at parameter s.

    mu(s) = -kappa*T * sum_i log(s*lambda_i^(1-s) + (1-s)*lambda_i^(-s));
    mu(0) = mu(1) = 0 and mu <= 0 on [0, 1].
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    lam = np.asarray(h_eigs, dtype=np.float64)
    if np.any(lam <= 0):
        raise ValueError("eigenvalues must be positive")
    log_lam = np.log(lam)
    terms = np.logaddexp(np.log(s) + (1.0 - s) * log_lam if s > 0 else -np.inf,
                         np.log1p(-s) - s * log_lam if s < 1 else -np.inf)
    return -kappa * T * float(np.sum(terms))


def binary_chernoff(A, S0: Support, S1: Support, sigma2: float, T: int) -> BoundReport:
    """Chernoff upper bound on the binary support-recovery error,

        P_err <= (1/2) [lam(S0,S1) lam(S1,S0) / 16]^(-kappa*k_d*T/2),

    together with the sharper (1/2) exp(mu(1/2)) it was derived from.
    """
    _, fieldtag = as_matrix(A)
    kappa = fieldtag.kappa
    p01 = pair_incoherence(A, S0, S1, sigma2)
    p10 = pair_incoherence(A, S1, S0, sigma2)
    k_d = p01.k_d
    log_raw = -LOG2 - (kappa * k_d * T / 2.0) * (np.log(p01.value) + np.log(p10.value) - np.log(16.0))
    raw = float(np.exp(log_raw))

    eigs = h_eigenvalues(A, S0, S1, sigma2)
    mu_half = chernoff_mu(eigs, 0.5, T, kappa)
    mu_half_bound = float(0.5 * np.exp(mu_half))
    note = "" if p01.value * p10.value > 16.0 else "incoherence product <= 16: bound does not decay in T"
    return _report(raw, applicable=True, note=note,
                   mu_half_bound=mu_half_bound, mu_half=mu_half,
                   lambda_01=p01.value, lambda_10=p10.value, k_d=k_d)


def multiple_bound_union(lambda_bar, N: int, K: int, T: int, kappa: float) -> BoundReport:
    """Union-of-pairs upper bound

        (1/2) sum_{k_d=1}^{K} C(K,k_d) C(N-K,k_d) (lam/4)^(-kappa*k_d*T),

    evaluated in the log domain. `lambda_bar` may be a single global value or
    one value per difference size k_d (sequence of length K).
    """
    lams = np.broadcast_to(np.asarray(lambda_bar, dtype=np.float64), (K,)).copy()
    if np.any(lams <= 0):
        raise ValueError("incoherence values must be positive")
    terms = []
    for k_d in range(1, K + 1):
        if k_d > N - K:
            continue
        terms.append(log_binomial(K, k_d) + log_binomial(N - K, k_d)
                     - kappa * k_d * T * (np.log(lams[k_d - 1]) - np.log(4.0)))
    raw = 0.0 if not terms else float(0.5 * np.exp(logsumexp(terms)))
    applicable = bool(np.all(lams > 4.0))
    note = "" if applicable else "requires lambda_bar > 4 for every term to decay"
    return _report(raw, applicable=applicable, note=note)


def multiple_bound_geometric(lambda_bar: float, N: int, K: int, T: int, kappa: float) -> BoundReport:
    """Geometric-series upper bound on full support recovery,

        P_err <= (1/2) q / (1 - q),  q = K(N-K) / (lambda_bar/4)^(kappa*T),

    valid when lambda_bar exceeds 4*[K(N-K)]^(1/(kappa*T)) strictly.
    """
    if lambda_bar <= 0:
        raise ValueError("lambda_bar must be positive")
    KNK = K * (N - K)
    if KNK == 0:
        return _report(0.0, applicable=True, note="single candidate support: no competing hypotheses")
    threshold = 4.0 * KNK ** (1.0 / (kappa * T))
    applicable = lambda_bar > threshold
    log_q = math.log(KNK) - kappa * T * (math.log(lambda_bar) - math.log(4.0))
    if log_q >= 0:
        raw = math.inf
    else:
        q = math.exp(log_q)
        raw = 0.5 * q / (1.0 - q)
    note = "" if applicable else f"requires lambda_bar > {threshold:.6g}"
    return _report(raw, applicable=applicable, note=note, threshold=threshold)


def kl_divergence(Sigma_i: np.ndarray, Sigma_j: np.ndarray, T: int, kappa: float) -> float:
    """Divergence between the zero-mean matrix Gaussians with per-column
    covariances Sigma_i and Sigma_j:

        D = (kappa*T/2) [tr(Sigma_j^{-1} Sigma_i) - M + log|Sigma_j| - log|Sigma_i|].

    Note the 1/2 prefactor: with kappa = 1/2 this is half the conventional
    E_i[log f_i/f_j]; the Fano chain (beta, the lower bounds, the thresholds)
    uses this normalization throughout.
    """
    M = Sigma_i.shape[0]
    if Sigma_i.shape != Sigma_j.shape or Sigma_j.shape != (M, M):
        raise ValueError("covariances must be square matrices of equal size")
    sign_i, logdet_i = np.linalg.slogdet(Sigma_i)
    sign_j, logdet_j = np.linalg.slogdet(Sigma_j)
    if sign_i.real <= 0 or sign_j.real <= 0:
        raise ValueError("covariances must be positive definite")
    trace = float(np.trace(np.linalg.solve(Sigma_j, Sigma_i)).real)
    return 0.5 * kappa * T * (trace - M + float(logdet_j.real) - float(logdet_i.real))


def fano_beta_exact(A, K: int, sigma2: float, T: int, kappa: float | None = None) -> float:
    """Average pairwise KL divergence over all ordered candidate pairs.

    The log-determinant terms cancel over the full double sum, so
    beta = kappa*T/(2 L^2) * sum_{i,j} [tr(Sigma_j^{-1} Sigma_i) - M].
    """
    entries, fieldtag = as_matrix(A)
    if kappa is None:
        kappa = fieldtag.kappa
    M, N = entries.shape
    supports = enumerate_supports(N, K)
    L = len(supports)
    sigmas = np.stack([covariance(A, S, sigma2) for S in supports])
    invs = np.linalg.inv(sigmas)
    # trace_ij = tr(Sigma_j^{-1} Sigma_i)
    traces = np.einsum("jab,iba->ij", invs, sigmas).real
    return float(kappa * T / (2.0 * L * L) * (traces.sum() - L * L * M))


def fano_beta_frobenius(A, N: int, K: int, sigma2: float, T: int,
                        kappa: float | None = None) -> float:
    """Closed-form upper bound on beta via the total gain of the matrix:

        beta <= kappa*T*K*(N-K) / (2*sigma2*N^2) * ||A||_F^2.
    """
    entries, fieldtag = as_matrix(A)
    if kappa is None:
        kappa = fieldtag.kappa
    if entries.shape[1] != N:
        raise ValueError(f"matrix has {entries.shape[1]} columns, expected N={N}")
    fro_sq = float(np.sum(np.abs(entries) ** 2))
    return kappa * T * K * (N - K) / (2.0 * sigma2 * N * N) * fro_sq


def fano_lower(beta: float, L: int) -> BoundReport:
    """Fano lower bound P_err >= 1 - (beta + log 2)/log L for any decoder."""
    if L < 2:
        raise ValueError("Fano bound needs at least two hypotheses")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    raw = 1.0 - (beta + LOG2) / math.log(L)
    return _report(raw, applicable=True)


def ensemble_fano_lower(M: int, N: int, K: int, sigma2: float, T: int, kappa: float) -> BoundReport:
    """Fano bound on the Gaussian-ensemble average error, substituting the
    expected total gain E||A||_F^2 = M*N."""
    beta = kappa * T * K * (N - K) / (2.0 * sigma2 * N * N) * (M * N)
    report = fano_lower(beta, math.comb(N, K))
    return BoundReport(report.raw_value, report.clamped, report.applicable,
                       report.precondition_note, extras={"beta": beta})


def _threshold_forms(factor: float, log_binom: float, denom: float, sigma2: float,
                     relaxed: float) -> dict:
    exact = factor * 2.0 * sigma2 * log_binom / denom
    corrected = 2.0 * sigma2 * (factor * log_binom - LOG2) / denom
    return {"exact_binomial": exact, "relaxed": relaxed, "log2_corrected": corrected}


def snet_requirements(epsilon: float, N: int, K: int, sigma2: float, kappa: float,
                      normalization: str) -> ThresholdReport:
    """Minimal sample counts for P_err < epsilon under row- or column-normalized
    measurement matrices (total gain M and N respectively)."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if not 1 <= K < N:
        raise ValueError("need 1 <= K < N")
    factor = 1.0 - epsilon
    log_binom = log_binomial(N, K)
    alpha = K / N
    if normalization == "unit_rows":
        denom = kappa * alpha * (1.0 - alpha)
        relaxed = factor * 8.0 * sigma2 / kappa * K * math.log(N / K)
        quantity = "MT"
    elif normalization == "unit_columns":
        denom = kappa * K * (1.0 - alpha)
        relaxed = factor * 2.0 * sigma2 / kappa * math.log(N / K)
        quantity = "T"
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    forms = _threshold_forms(factor, log_binom, denom, sigma2, relaxed)
    return ThresholdReport(quantity=quantity, value=forms["exact_binomial"],
                           formula_id=f"snet-{normalization}",
                           inputs={"epsilon": epsilon, "N": N, "K": K,
                                   "sigma2": sigma2, "kappa": kappa},
                           forms=forms)


def doa_requirements(epsilon: float, N: int, K: int, sigma2: float) -> ThresholdReport:
    """Minimal MT for DOA-grid support recovery with an isotropic array
    (complex field, every manifold column of squared norm M)."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if not 1 <= K < N:
        raise ValueError("need 1 <= K < N")
    factor = 1.0 - epsilon
    log_binom = log_binomial(N, K)
    denom = K * (1.0 - K / N)
    relaxed = factor * 2.0 * sigma2 * math.log(N / K)
    forms = _threshold_forms(factor, log_binom, denom, sigma2, relaxed)
    return ThresholdReport(quantity="MT", value=forms["exact_binomial"], formula_id="doa",
                           inputs={"epsilon": epsilon, "N": N, "K": K, "sigma2": sigma2},
                           forms=forms)


def gaussian_necessary(epsilon: float, delta: float | None, N: int, K: int,
                       sigma2: float, kappa: float) -> ThresholdReport:
    """Necessary MT for the unit-variance Gaussian ensemble: mean form with
    factor (1-eps), probability form with (1-eps-delta)."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if delta is not None and (delta <= 0 or epsilon + delta >= 1):
        raise ValueError("need delta > 0 and epsilon + delta < 1")
    if not 1 <= K < N:
        raise ValueError("need 1 <= K < N")
    factor = 1.0 - epsilon if delta is None else 1.0 - epsilon - delta
    log_binom = log_binomial(N, K)
    denom = kappa * K * (1.0 - K / N)
    relaxed = factor * 2.0 * sigma2 / kappa * math.log(N / K)
    forms = _threshold_forms(factor, log_binom, denom, sigma2, relaxed)
    formula = "gaussian-necessary-mean" if delta is None else "gaussian-necessary-prob"
    inputs = {"epsilon": epsilon, "N": N, "K": K, "sigma2": sigma2, "kappa": kappa}
    if delta is not None:
        inputs["delta"] = delta
    return ThresholdReport(quantity="MT", value=forms["exact_binomial"],
                           formula_id=formula, inputs=inputs, forms=forms)


@dataclass(frozen=True)
class SufficiencyReport:
    """Diagnostic ratios for the asymptotic sufficiency conditions.

    No pass/fail verdict is attached: the conditions are order statements, so
    only the ratios they compare are reported, along with the large-deviation
    threshold gamma and the exponent ceiling kappa*(log 3 - 1).
    """

    m_over_klognk: float | None
    t_condition_ratio: float | None
    t_loglog_ratio: float | None
    gamma: float | None
    exponent_ceiling: float
    notes: tuple


def gaussian_sufficiency_report(M: int, N: int, K: int, T: int, sigma2: float,
                                kappa: float) -> SufficiencyReport:
    if min(M, N, K, T) < 1 or sigma2 <= 0:
        raise ValueError("parameters must be positive")
    notes = []
    m_ratio = None
    if N > K:
        m_ratio = M / (K * math.log(N / K))
    else:
        notes.append("N <= K: M-growth ratio undefined")
    t_ratio = None
    if K * (N - K) > 1:
        t_ratio = kappa * T * math.log(M / sigma2) / math.log(K * (N - K))
    else:
        notes.append("log[K(N-K)] <= 0: T-condition ratio undefined")
    t_loglog = None
    if N > math.e:
        t_loglog = T * math.log(math.log(N)) / math.log(N)
    else:
        notes.append("N too small for log log N")
    gamma = None
    if M > 2 * K:
        gamma = (M - 2 * K) / (3.0 * sigma2)
    else:
        notes.append("M <= 2K: gamma undefined")
    return SufficiencyReport(m_over_klognk=m_ratio, t_condition_ratio=t_ratio,
                             t_loglog_ratio=t_loglog, gamma=gamma,
                             exponent_ceiling=kappa * (math.log(3.0) - 1.0),
                             notes=tuple(notes))


def expected_incoherence_bounds(M: int, K: int, k_d: int, sigma2: float) -> tuple:
    """Closed-form interval for the Gaussian-ensemble mean pair incoherence:
    1 + (M-K-k_d)/sigma2 <= E <= 1 + M/sigma2."""
    if M <= K + k_d:
        raise ValueError(f"need M > K + k_d, got M={M}, K={K}, k_d={k_d}")
    if not 1 <= k_d <= K:
        raise ValueError("need 1 <= k_d <= K")
    return 1.0 + (M - K - k_d) / sigma2, 1.0 + M / sigma2


def hypergeometric_mean_check(N: int, K: int) -> float:
    """Sum of k_d C(K,k_d) C(N-K,k_d) / C(N,K), which equals K(N-K)/N.

    Computed in exact rational arithmetic and returned as a float.
    """
    if not 1 <= K < N:
        raise ValueError("need 1 <= K < N")
    total = Fraction(0)
    denom = math.comb(N, K)
    for k_d in range(1, K + 1):
        total += Fraction(k_d * math.comb(K, k_d) * math.comb(N - K, k_d), denom)
    return float(total)
