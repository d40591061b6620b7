"""Observation model: fields, supports, measurement matrices, and all random draws.

Everything stochastic in the package flows through :func:`substream`, which
derives an independent generator from (master seed, operation label, index).
Identical inputs always produce identical outputs, regardless of call order
or threading.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 10**6


class CapExceeded(RuntimeError):
    """A combinatorial enumeration would exceed its configured cap."""


class NumericFailure(RuntimeError):
    """A matrix factorization broke down (numerical indefiniteness)."""


class FieldTag(Enum):
    """Scalar field of the model, with the density constant kappa."""

    REAL = "real"
    COMPLEX = "complex"

    @property
    def kappa(self) -> float:
        # 1/2 for real, 1 for complex; both exact in binary floating point.
        return 0.5 if self is FieldTag.REAL else 1.0

    @property
    def dtype(self):
        return np.float64 if self is FieldTag.REAL else np.complex128

    @staticmethod
    def of(arr: np.ndarray) -> "FieldTag":
        return FieldTag.COMPLEX if np.iscomplexobj(arr) else FieldTag.REAL


def substream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Independent generator derived from (master seed, label, index).

    The label is hashed to a 64-bit tag so distinct operations never share a
    stream; the index gives per-trial (or per-draw) streams whose outputs do
    not depend on evaluation order.
    """
    if master_seed < 0:
        raise ValueError("master_seed must be a non-negative integer")
    tag = int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big")
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(master_seed), tag, int(index))))


def field_gaussian(rng: np.random.Generator, shape, field: FieldTag) -> np.ndarray:
    """Unit-variance field Gaussian draw; complex entries are circularly
    symmetric with real/imag parts of variance 1/2 each."""
    if field is FieldTag.COMPLEX:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)
    return rng.standard_normal(shape)


@dataclass(frozen=True)
class Support:
    """Sorted index set of the nonzero signal rows; the hypothesis identity."""

    indices: tuple
    ambient_dim: int

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be positive")
        if len(self.indices) < 1:
            raise ValueError("a support must contain at least one index")
        if any(i < 0 or i >= self.ambient_dim for i in self.indices):
            raise ValueError(f"support indices {self.indices} out of range [0, {self.ambient_dim})")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("support indices must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def intersection(self, other: "Support") -> tuple:
        return tuple(sorted(set(self.indices) & set(other.indices)))

    def difference(self, other: "Support") -> tuple:
        return tuple(sorted(set(self.indices) - set(other.indices)))

    def __contains__(self, idx: int) -> bool:
        return idx in self.indices


def make_support(indices: Iterable[int], N: int) -> Support:
    """Canonical sorted support over {0, ..., N-1}; rejects dupes and range errors."""
    idx = tuple(int(i) for i in indices)
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate indices in {idx}")
    return Support(tuple(sorted(idx)), int(N))


def enumerate_supports(N: int, K: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list:
    """All C(N, K) size-K supports in lexicographic index order."""
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    total = math.comb(N, K)
    if total > cap:
        raise CapExceeded(f"enumeration of C({N},{K}) = {total} supports exceeds cap {cap}")
    return [Support(combo, N) for combo in combinations(range(N), K)]


@dataclass(frozen=True)
class MeasurementMatrix:
    """M x N measurement matrix with its field and provenance."""

    entries: np.ndarray
    field: FieldTag
    provenance: str = "external"

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"entries must be a 2-d matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a = np.ascontiguousarray(a, dtype=self.field.dtype)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def shape(self) -> tuple:
        return self.entries.shape

    def columns(self, support: Support) -> np.ndarray:
        return self.entries[:, support.as_array()]


def as_matrix(A) -> tuple:
    """Accept a MeasurementMatrix or a bare ndarray; return (entries, field)."""
    if isinstance(A, MeasurementMatrix):
        return A.entries, A.field
    arr = np.asarray(A)
    return arr, FieldTag.of(arr)


def sample_gaussian_matrix(M: int, N: int, field: FieldTag, rng: np.random.Generator) -> MeasurementMatrix:
    """i.i.d. unit-variance field-Gaussian M x N matrix."""
    if M < 1 or N < 1:
        raise ValueError("matrix dimensions must be positive")
    return MeasurementMatrix(field_gaussian(rng, (M, N), field), field, provenance="gaussian")


def ula_angle_grid(N: int) -> np.ndarray:
    """Uniform interior grid of N angles in (-pi/2, pi/2) (cell midpoints)."""
    if N < 1:
        raise ValueError("grid size must be positive")
    return -np.pi / 2 + np.pi * (np.arange(N) + 0.5) / N


def ula_manifold_matrix(M: int, grid: Sequence[float], spacing: float = 0.5) -> MeasurementMatrix:
    """Uniform-linear-array manifold matrix.

    Column n holds exp(i * 2*pi * spacing * m * sin(theta_n)) for sensor index
    m = 0..M-1, so every column has squared norm exactly M.
    """
    if M < 1:
        raise ValueError("M must be positive")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    theta = np.asarray(grid, dtype=np.float64)
    if theta.ndim != 1 or theta.size < 1:
        raise ValueError("grid must be a non-empty 1-d sequence of angles")
    if np.any(theta < -np.pi / 2) or np.any(theta > np.pi / 2):
        raise ValueError("angles must lie in [-pi/2, pi/2]")
    m = np.arange(M, dtype=np.float64)[:, None]
    phase = 2.0 * np.pi * spacing * m * np.sin(theta)[None, :]
    return MeasurementMatrix(np.exp(1j * phase), FieldTag.COMPLEX, provenance=f"ula(spacing={spacing})")


@dataclass(frozen=True)
class SignalBatch:
    """N x T jointly sparse signal snapshots; rows off the support are zero."""

    values: np.ndarray
    support: Support

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != self.support.ambient_dim:
            raise ValueError("signal batch shape inconsistent with support ambient dimension")
        off = np.ones(v.shape[0], dtype=bool)
        off[self.support.as_array()] = False
        if np.any(v[off] != 0):
            raise ValueError("rows outside the support must be exactly zero")


@dataclass(frozen=True)
class ObservationBatch:
    """M x T observations with the noise variance that generated them."""

    values: np.ndarray
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if np.asarray(self.values).ndim != 2:
            raise ValueError("observations must form an M x T matrix")


@dataclass(frozen=True)
class ModelConfig:
    """Scalar model parameters for one experiment configuration."""

    N: int
    M: int
    K: int
    T: int
    sigma2: float
    field: FieldTag
    master_seed: int

    def __post_init__(self):
        for name in ("N", "M", "K", "T"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.K > self.N:
            raise ValueError("K must not exceed N")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative 64-bit integer")


def sample_signal_batch(S: Support, T: int, field: FieldTag, rng: np.random.Generator) -> SignalBatch:
    """Rows in S i.i.d. standard field-Gaussian across snapshots, zero elsewhere."""
    if T < 1:
        raise ValueError("T must be positive")
    values = np.zeros((S.ambient_dim, T), dtype=field.dtype)
    values[S.as_array(), :] = field_gaussian(rng, (S.size, T), field)
    return SignalBatch(values, S)


def observe(A, X: SignalBatch, sigma2: float, rng: np.random.Generator) -> ObservationBatch:
    """Y = A X + W with i.i.d. field-Gaussian noise of variance sigma2 per entry."""
    entries, field = as_matrix(A)
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if entries.shape[1] != X.support.ambient_dim:
        raise ValueError(
            f"matrix has {entries.shape[1]} columns but signal ambient dimension is {X.support.ambient_dim}"
        )
    noise = field_gaussian(rng, (entries.shape[0], X.values.shape[1]), field) * np.sqrt(sigma2)
    return ObservationBatch(entries @ X.values + noise, sigma2)


@dataclass(frozen=True)
class NonDegeneracyReport:
    """Outcome of the every-M-columns-invertible check."""

    passed: bool
    worst_sigma_min: float
    witness: tuple | None
    tested: int
    mode: str


def check_non_degenerate(A, mode: str = "exhaustive", count: int | None = None,
                         seed: int = 0, cap: int = DEFAULT_ENUMERATION_CAP) -> NonDegeneracyReport:
    """Test M x M column submatrices for invertibility.

    A submatrix fails when its smallest singular value drops below
    1e-10 times the largest singular value of the full matrix. Exhaustive mode
    visits every submatrix; sampled mode draws `count` of them reproducibly.
    """
    entries, _ = as_matrix(A)
    M, N = entries.shape
    if N < M:
        raise ValueError("need N >= M to form M x M column submatrices")
    tol = 1e-10 * np.linalg.norm(entries, 2)

    if mode == "exhaustive":
        total = math.comb(N, M)
        if total > cap:
            raise CapExceeded(
                f"exhaustive check over C({N},{M}) = {total} submatrices exceeds cap {cap}; use sampled mode"
            )
        picks = combinations(range(N), M)
    elif mode == "sampled":
        if count is None or count < 1:
            raise ValueError("sampled mode requires a positive count")
        rng = substream(seed, "non-degenerate-sample")
        picks = (tuple(sorted(rng.choice(N, size=M, replace=False).tolist())) for _ in range(count))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    worst = np.inf
    witness = None
    tested = 0
    for cols in picks:
        smin = np.linalg.svd(entries[:, list(cols)], compute_uv=False)[-1]
        tested += 1
        if smin < worst:
            worst, witness = smin, tuple(cols)
    return NonDegeneracyReport(passed=bool(worst >= tol), worst_sigma_min=float(worst),
                               witness=witness, tested=tested, mode=mode)


def save_matrix_csv(path, A) -> None:
    """Write a matrix as CSV, header line `# M N field`, row-major.

    Complex entries are stored as interleaved re,im column pairs.
    """
    entries, field = as_matrix(A)
    M, N = entries.shape
    with open(path, "w", newline="") as fh:
        fh.write(f"# {M} {N} {field.value}\n")
        writer = csv.writer(fh)
        for row in entries:
            if field is FieldTag.COMPLEX:
                flat = []
                for z in row:
                    flat.extend((repr(float(z.real)), repr(float(z.imag))))
                writer.writerow(flat)
            else:
                writer.writerow([repr(float(x)) for x in row])


def load_matrix_csv(path) -> MeasurementMatrix:
    """Read a matrix written by :func:`save_matrix_csv`."""
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        parts = header.lstrip("#").split()
        if len(parts) != 3 or not header.startswith("#"):
            raise ValueError(f"malformed matrix header {header!r}; expected '# M N field'")
        M, N, field_name = int(parts[0]), int(parts[1]), parts[2]
        field = FieldTag(field_name)
        rows = []
        for line in csv.reader(fh):
            if not line:
                continue
            vals = [float(x) for x in line]
            if field is FieldTag.COMPLEX:
                if len(vals) != 2 * N:
                    raise ValueError(f"expected {2 * N} columns (re,im pairs), got {len(vals)}")
                rows.append([complex(vals[2 * j], vals[2 * j + 1]) for j in range(N)])
            else:
                if len(vals) != N:
                    raise ValueError(f"expected {N} columns, got {len(vals)}")
                rows.append(vals)
    arr = np.asarray(rows, dtype=field.dtype)
    if arr.shape != (M, N):
        raise ValueError(f"matrix body shape {arr.shape} does not match header ({M}, {N})")
    return MeasurementMatrix(arr, field, provenance=f"external({path})")
