"""Transfer-matrix ensemble for N qubits: a diagonal non-unitary field times a Haar unitary.

One time step of the dynamics is ``T = zeta @ U`` where ``zeta = exp(h * sum_j Z_j)``
is diagonal in the computational basis and ``U`` is a Haar-random unitary on the
full 2^N-dimensional Hilbert space.  This module builds the pieces, exposes the
closed-form scalar quantities derived from ``zeta`` (moments, the characteristic
time ``t_star``, the bulk edge ``rho_edge``), and provides reproducible
counter-based random streams for ensemble Monte Carlo.

Conventions
-----------
* Basis state ``a`` (an integer in ``0..D-1``) assigns qubit ``j`` the Z
  eigenvalue +1 when bit ``j`` of ``a`` is 0, so ``popcount(a)`` counts the
  -1 eigenvalues and ``log zeta_a = h * (N - 2 * popcount(a))``.
* All moment arithmetic happens in the log domain; ``exp(2*k*h*N)`` is never
  formed directly.
* ``E[zeta^x] = Tr[zeta^x] / D = cosh(x*h)^N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TransferSpec",
    "DiagonalField",
    "TransferMatrix",
    "RngStream",
    "build_zeta",
    "zeta_moment",
    "log_zeta_moment",
    "t_star",
    "rho_edge",
    "b_exponent",
    "sample_haar_unitary",
    "sample_haar_unitaries",
    "build_transfer",
]

# Largest x for which exp(x) is a finite double.
_MAX_EXP = 709.0


def _log_cosh(x: float) -> float:
    """log(cosh(x)), stable for arbitrarily large |x|."""
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


@dataclass(frozen=True)
class TransferSpec:
    """Model parameters: qubit count N and field strength h (D = 2^N derived)."""

    n_qubits: int
    field_strength: float

    def __post_init__(self):
        if not (isinstance(self.n_qubits, (int, np.integer)) and self.n_qubits >= 1):
            raise ValueError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        if not math.isfinite(self.field_strength):
            raise ValueError(f"field_strength must be finite, got {self.field_strength!r}")

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


@dataclass(frozen=True)
class DiagonalField:
    """The diagonal non-unitary field, stored in the log domain.

    ``log_entries[a] = h * (N - 2 * popcount(a))``.  The multiset of entries is
    symmetric about zero, so det(zeta) = 1 and the field is invariant (up to a
    relabelling of basis states) under h -> -h.
    """

    log_entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "log_entries", np.asarray(self.log_entries, dtype=float))

    @property
    def dim(self) -> int:
        return self.log_entries.size

    def entries(self) -> np.ndarray:
        return np.exp(self.log_entries)

    def log_trace_power(self, x: float) -> float:
        """log Tr[zeta^x], evaluated by log-sum-exp over the diagonal."""
        scaled = x * self.log_entries
        m = float(np.max(scaled))
        return m + math.log(float(np.sum(np.exp(scaled - m))))


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by (master_seed, realization_index).

    Distinct key pairs give statistically independent Philox streams; the same
    pair always reproduces the identical sample sequence, independently of any
    other stream, which is what makes order-independent parallel ensembles
    reproducible.
    """

    master_seed: int
    realization_index: int = 0

    def __post_init__(self):
        if self.realization_index < 0:
            raise ValueError("realization_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.master_seed) & ((1 << 64) - 1),
            spawn_key=(int(self.realization_index),),
        )
        return np.random.Generator(np.random.Philox(ss))


def build_zeta(spec: TransferSpec) -> DiagonalField:
    """Diagonal field for the given spec; entry a is h*(N - 2*popcount(a))."""
    a = np.arange(spec.dim, dtype=np.uint64)
    weights = np.bitwise_count(a).astype(np.int64)
    return DiagonalField(spec.field_strength * (spec.n_qubits - 2 * weights))


def log_zeta_moment(spec: TransferSpec, k: int) -> float:
    """log E[zeta^(2k)] computed two ways (diagonal sum and N*log cosh(2kh)).

    Both evaluations stay in the log domain; they are required to agree to
    1e-12 in relative terms on the moment itself.
    """
    if k < 1 or int(k) != k:
        raise ValueError(f"moment order k must be a positive integer, got {k!r}")
    n, h = spec.n_qubits, spec.field_strength
    closed = n * _log_cosh(2.0 * k * h)
    # direct sum over the diagonal, grouped by Hamming weight w (binomial weights)
    w = np.arange(n + 1, dtype=float)
    log_binom = np.array(
        [math.lgamma(n + 1) - math.lgamma(wi + 1) - math.lgamma(n - wi + 1) for wi in w]
    )
    log_terms = log_binom + 2.0 * k * h * (n - 2 * w)
    m = float(np.max(log_terms))
    direct = m + math.log(float(np.sum(np.exp(log_terms - m)))) - n * math.log(2.0)
    if abs(direct - closed) > 1e-12 * (1.0 + abs(closed)):
        raise AssertionError(
            f"zeta moment disagreement: direct {direct} vs closed-form {closed}"
        )
    return closed


def zeta_moment(spec: TransferSpec, k: int) -> float:
    """E[zeta^(2k)] = cosh(2kh)^N as a float; raises if it exceeds double range."""
    lv = log_zeta_moment(spec, k)
    if lv > _MAX_EXP:
        raise OverflowError(
            f"E[zeta^{2 * k}] = exp({lv:.3g}) exceeds double range; "
            "use log_zeta_moment instead"
        )
    return math.exp(lv)


def _log_expm1(x: float) -> float:
    """log(exp(x) - 1) for x > 0, stable across the full range."""
    if x > 40.0:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def t_star(spec: TransferSpec) -> float:
    """Characteristic time sqrt(D) / sqrt(E[zeta^4]/E[zeta^2]^2 - 1).

    Exponentially large in N for fixed h != 0; returns ``math.inf`` in the
    unitary limit h = 0, where the moment ratio denominator vanishes.
    """
    gap = log_zeta_moment(spec, 2) - 2.0 * log_zeta_moment(spec, 1)
    if gap <= 0.0:
        return math.inf
    return math.exp(0.5 * (spec.n_qubits * math.log(2.0) - _log_expm1(gap)))


def rho_edge(spec: TransferSpec) -> float:
    """Outer bulk edge of the log-modulus eigenvalue density: (N/2) log cosh(2h)."""
    via_moment = 0.5 * log_zeta_moment(spec, 1)
    closed = 0.5 * spec.n_qubits * _log_cosh(2.0 * spec.field_strength)
    if abs(via_moment - closed) > 1e-12 * (1.0 + abs(closed)):
        raise AssertionError("rho_edge evaluations disagree")
    return closed


def b_exponent(h: float) -> float:
    """Growth rate b(h) in E[zeta^4]/E[zeta^2]^2 ~ exp(b*N): log(2cosh4h/(1+cosh4h)).

    b(0) = 0 and b -> log 2 as |h| -> infinity.
    """
    lc = _log_cosh(4.0 * h)
    return math.log(2.0) - math.log1p(math.exp(-lc))


def sample_haar_unitary(dim: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix with phase fix.

    The raw QR of a Gaussian matrix is not Haar; multiplying each column of Q
    by the phase of the matching diagonal entry of R makes the factorization
    unique (R diagonal real positive) and the resulting Q exactly Haar.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def sample_haar_unitaries(dim: int, n: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Stack of n independent Haar unitaries, shape (n, dim, dim) (batched QR)."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    z = (gen.standard_normal((n, dim, dim)) + 1j * gen.standard_normal((n, dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


@dataclass(frozen=True)
class TransferMatrix:
    """One realization T = zeta @ U, with its ingredients kept alongside.

    Immutable after construction; safe to share across threads.  ``product``
    is formed by scaling row a of U by exp(log_entries[a]).
    """

    spec: TransferSpec
    zeta: DiagonalField
    unitary: np.ndarray
    product: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.product is None:
            t = np.exp(self.zeta.log_entries)[:, None] * self.unitary
            object.__setattr__(self, "product", t)
        self._validate()

    def _validate(self):
        u = self.unitary
        d = u.shape[0]
        resid = np.max(np.abs(u.conj().T @ u - np.eye(d)))
        if resid > 1e-12:
            raise AssertionError(f"unitarity residual {resid:.3e} too large")
        # |det T| = |det zeta| * |det U|; checking the factors avoids the
        # condition-number amplification of a direct determinant of T.
        log_det_zeta = float(np.sum(self.zeta.log_entries))
        _, log_det_u = np.linalg.slogdet(u)
        if abs(log_det_zeta) > 1e-10 * max(1.0, d) or abs(log_det_u) > 1e-10 * max(1.0, d):
            raise AssertionError("|det T| deviates from 1 beyond tolerance")


def build_transfer(spec: TransferSpec, rng: RngStream | np.random.Generator) -> TransferMatrix:
    """Draw one realization of T = zeta @ U for the given spec."""
    zeta = build_zeta(spec)
    u = sample_haar_unitary(spec.dim, rng)
    return TransferMatrix(spec=spec, zeta=zeta, unitary=u)
