"""Optimal decision rules: the binary likelihood-ratio test and
maximum-likelihood support recovery over a candidate set.

Observations under support S are zero-mean matrix Gaussians with per-column
covariance Sigma_S, so the log density is

    log p(Y|S) = -kappa*M*T*log(pi/kappa) - kappa*T*log|Sigma_S|
                 - kappa*tr(Y^H Sigma_S^{-1} Y).

All quadratic forms and log determinants go through Cholesky factors; the
decoder caches one factorization per candidate support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .model import FieldTag, NumericFailure, ObservationBatch, Support, as_matrix
from .spectra import covariance


def _observation_values(Y) -> np.ndarray:
    if isinstance(Y, ObservationBatch):
        return np.asarray(Y.values)
    arr = np.asarray(Y)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _chol_logdet(Sigma: np.ndarray) -> tuple:
    """Cholesky factor and log-determinant of a positive definite matrix."""
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(
            f"covariance factorization failed (condition number ~ {np.linalg.cond(Sigma):.3e})"
        ) from exc
    logdet = 2.0 * float(np.sum(np.log(np.abs(np.diag(L)))))
    return L, logdet


def log_likelihood(Y, Sigma: np.ndarray, kappa: float) -> float:
    """Exact log density of the observations under covariance Sigma."""
    values = _observation_values(Y)
    M, T = values.shape
    if Sigma.shape != (M, M):
        raise ValueError(f"covariance shape {Sigma.shape} does not match observations with M={M}")
    L, logdet = _chol_logdet(Sigma)
    Z = solve_triangular(L, values, lower=True)
    quad = float(np.sum(np.abs(Z) ** 2))
    return -kappa * M * T * np.log(np.pi / kappa) - kappa * T * logdet - kappa * quad


@dataclass(frozen=True)
class LrtResult:
    """Binary test outcome: chosen hypothesis index and the LRT statistic."""

    choice: int
    statistic: float


def binary_lrt(Y, A, S0: Support, S1: Support, sigma2: float) -> LrtResult:
    """Likelihood-ratio test between supports S0 and S1.

    The statistic is log p(Y|S1) - log p(Y|S0); positive values choose S1,
    ties go to S0.
    """
    if S0.indices == S1.indices:
        raise ValueError("binary test requires distinct supports")
    _, field = as_matrix(A)
    kappa = field.kappa
    values = _observation_values(Y)
    T = values.shape[1]

    L0, logdet0 = _chol_logdet(covariance(A, S0, sigma2))
    L1, logdet1 = _chol_logdet(covariance(A, S1, sigma2))
    q0 = float(np.sum(np.abs(solve_triangular(L0, values, lower=True)) ** 2))
    q1 = float(np.sum(np.abs(solve_triangular(L1, values, lower=True)) ** 2))
    statistic = -kappa * (q1 - q0) - kappa * T * (logdet1 - logdet0)
    return LrtResult(choice=1 if statistic > 0 else 0, statistic=statistic)


@dataclass(frozen=True)
class DecodeResult:
    chosen: Support
    log_scores: dict | None
    ties_broken: bool


class SupportDecoder:
    """Maximum-likelihood decoder over a fixed candidate support set.

    Covariance Cholesky factors are computed once per (A, sigma2, candidates)
    and reused across observations. A candidate whose factorization fails
    scores -inf and is recorded in `failures` instead of aborting the decode.
    """

    def __init__(self, A, candidates, sigma2: float):
        if not candidates:
            raise ValueError("candidate set must be nonempty")
        entries, field = as_matrix(A)
        self.kappa = field.kappa
        self.M = entries.shape[0]
        self.candidates = list(candidates)
        self.failures: dict = {}
        # Lexicographic rank of each candidate, for deterministic tie-breaks.
        self._lex_rank = sorted(range(len(self.candidates)),
                                key=lambda i: self.candidates[i].indices)
        self._factors = []
        for idx, S in enumerate(self.candidates):
            try:
                self._factors.append(_chol_logdet(covariance(A, S, sigma2)))
            except NumericFailure as exc:
                self._factors.append(None)
                self.failures[idx] = str(exc)

    def log_scores(self, Y) -> np.ndarray:
        values = _observation_values(Y)
        M, T = values.shape
        if M != self.M:
            raise ValueError(f"observation row count {M} does not match decoder M={self.M}")
        const = -self.kappa * M * T * np.log(np.pi / self.kappa)
        scores = np.full(len(self.candidates), -np.inf)
        for idx, factor in enumerate(self._factors):
            if factor is None:
                continue
            L, logdet = factor
            quad = float(np.sum(np.abs(solve_triangular(L, values, lower=True)) ** 2))
            scores[idx] = const - self.kappa * T * logdet - self.kappa * quad
        return scores

    def decode_index(self, Y) -> tuple:
        """Index of the winning candidate plus a flag for broken ties."""
        scores = self.log_scores(Y)
        best = np.max(scores)
        winners = np.flatnonzero(scores == best)
        if winners.size == 1:
            return int(winners[0]), False
        choice = min(winners, key=lambda i: self.candidates[i].indices)
        return int(choice), True

    def decode(self, Y, keep_scores: bool = True) -> DecodeResult:
        idx, tied = self.decode_index(Y)
        scores = None
        if keep_scores:
            values = self.log_scores(Y)
            scores = {S: float(v) for S, v in zip(self.candidates, values)}
        return DecodeResult(chosen=self.candidates[idx], log_scores=scores, ties_broken=tied)

    def decode_index_batch(self, Ys: np.ndarray) -> np.ndarray:
        """Winning candidate index for a stack of observations (n, M, T).

        Scores every candidate against all observations in one triangular
        solve per candidate; ties resolve to the lexicographically smallest
        support exactly as in :meth:`decode_index`.
        """
        Ys = np.asarray(Ys)
        n, M, T = Ys.shape
        if M != self.M:
            raise ValueError(f"observation row count {M} does not match decoder M={self.M}")
        flat = np.moveaxis(Ys, 0, 1).reshape(M, n * T)
        n_cand = len(self.candidates)
        scores = np.full((n_cand, n), -np.inf)
        for idx, factor in enumerate(self._factors):
            if factor is None:
                continue
            L, logdet = factor
            Z = solve_triangular(L, flat, lower=True)
            quad = np.sum(np.abs(Z) ** 2, axis=0).reshape(n, T).sum(axis=1)
            scores[idx] = -self.kappa * T * logdet - self.kappa * quad
        # Evaluate candidates in lexicographic order so the first argmax is
        # the lexicographically smallest maximizer.
        ordered = scores[self._lex_rank]
        picks = np.argmax(ordered, axis=0)
        return np.asarray(self._lex_rank, dtype=np.intp)[picks]


def ml_decode(Y, A, candidates, sigma2: float, keep_scores: bool = True) -> DecodeResult:
    """One-shot maximum-likelihood decode over the candidate supports."""
    return SupportDecoder(A, candidates, sigma2).decode(Y, keep_scores=keep_scores)
