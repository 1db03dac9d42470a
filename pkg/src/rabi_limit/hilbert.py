"""Truncated Fock-space state algebra.

Spin index 0 is the excited state |+z>, index 1 is |-z>. A joint ket is
stored as a ``(2, N)`` array ``psi[s, m]`` over spin ``s`` and photon
number ``m < N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import FrameError, TruncationError
from .specfun import laguerre

LAB = "lab"
FIELD_INTERACTION = "field-interaction"
ROTATING_DISPLACED = "rotating-displaced"
FRAMES = (LAB, FIELD_INTERACTION, ROTATING_DISPLACED)

GUARD = 16
TAIL_TOL = 1e-10
NORM_TOL = 1e-9
TRUNCATION_SPREAD = 6.0
TRUNCATION_PAD = 64
MAX_TRUNCATION = 1_000_000


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

def _readonly(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FockKet:
    """Field state on photon numbers ``0 .. n_trunc - 1``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = _readonly(self.amplitudes)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("FockKet amplitudes must be a non-empty vector")
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_trunc(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tail_weight(self, guard: int = GUARD) -> float:
        return float(np.sum(np.abs(self.amplitudes[-guard:]) ** 2))

    def mean_photon_number(self) -> float:
        p = np.abs(self.amplitudes) ** 2
        return float(np.dot(np.arange(p.size), p) / p.sum())


@dataclass(frozen=True)
class JointKet:
    """Spin-field ket with the frame it is expressed in.

    ``alpha`` and ``omega0`` are the frame parameters and ``t`` the time at
    which the frame operators were evaluated; they are ignored for the lab
    frame but kept so a state can always be mapped back.
    """

    amplitudes: np.ndarray
    frame: str = LAB
    alpha: complex = 0.0
    omega0: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        a = _readonly(self.amplitudes)
        if a.ndim != 2 or a.shape[0] != 2:
            raise ValueError("JointKet amplitudes must have shape (2, N)")
        if self.frame not in FRAMES:
            raise FrameError(f"unknown frame tag {self.frame!r}")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "alpha", complex(self.alpha))

    @classmethod
    def product(cls, spin, field_ket, **frame):
        spin = np.asarray(spin, dtype=complex)
        f = field_ket.amplitudes if isinstance(field_ket, FockKet) else np.asarray(field_ket)
        return cls(np.outer(spin, f), **frame)

    @property
    def n_trunc(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def sigma_z(self) -> float:
        p = np.sum(np.abs(self.amplitudes) ** 2, axis=1)
        return float(p[0] - p[1])

    def same_frame(self, other: "JointKet") -> bool:
        return (
            self.frame == other.frame
            and (self.frame == LAB or (self.t == other.t and self.omega0 == other.omega0))
            and (self.frame != ROTATING_DISPLACED or self.alpha == other.alpha)
        )


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix.

    Validation runs an eigendecomposition; pass ``validate=False`` for
    matrices already known to be valid.
    """

    entries: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = _readonly(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        object.__setattr__(self, "entries", m)
        if self.validate:
            if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > 1e-9:
                raise ValueError(f"density matrix trace {tr} differs from 1")
            if np.linalg.eigvalsh(m).min() < -1e-9:
                raise ValueError("density matrix has a negative eigenvalue")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def default_truncation(alpha: complex, n: int) -> int:
    """ceil(|a|^2 + 6 |a| sqrt(2n+1) + n + 64)."""
    x = abs(alpha)
    return int(math.ceil(x * x + TRUNCATION_SPREAD * x * math.sqrt(2 * n + 1) + n + TRUNCATION_PAD))


@dataclass(frozen=True)
class DisplacedFockSpec:
    """Parameters of D(alpha)|n> in an N-level truncation."""

    alpha: complex
    n: int
    n_trunc: int | None = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("Fock number must be nonnegative")
        object.__setattr__(self, "alpha", complex(self.alpha))
        if self.n_trunc is None:
            object.__setattr__(self, "n_trunc", default_truncation(self.alpha, self.n))
        elif self.n_trunc <= self.n:
            raise ValueError("truncation must exceed the Fock number")


# ---------------------------------------------------------------------------
# Displacement matrix elements
# ---------------------------------------------------------------------------

def _displacement_real(x: float, n: int, m: np.ndarray) -> np.ndarray:
    """Real factor R_m of <m|D(x e^{i t})|n> = e^{i (m-n) t} R_m for x > 0.

    R_m = (-1)^[m<n] sqrt(d!/(d+k)!) x^k e^{-x^2/2} L_d^(k)(x^2) with
    d = min(m, n), k = |m - n|. The associated Laguerre value is built by
    its degree recurrence on L_j / sigma^j with sigma ~ sqrt(max(x^2, k)),
    and the prefactor is assembled in log space, so nothing overflows for
    large displacements.
    """
    m = np.asarray(m, dtype=np.int64)
    y = x * x
    d = np.minimum(m, n)
    k = np.abs(m - n).astype(float)
    sigma = np.sqrt(np.maximum(np.maximum(y, k), 1.0))
    v_prev = np.ones(m.shape)
    v_at_d = np.where(d == 0, 1.0, 0.0)
    if n >= 1:
        v_cur = (1.0 + k - y) / sigma
        v_at_d = np.where(d == 1, v_cur, v_at_d)
        for j in range(1, n):
            v_prev, v_cur = v_cur, (
                (2 * j + 1 + k - y) * v_cur / sigma - (j + k) * v_prev / sigma**2
            ) / (j + 1)
            v_at_d = np.where(d == j + 1, v_cur, v_at_d)
    with np.errstate(divide="ignore"):
        log_mag = (
            0.5 * (gammaln(d + 1.0) - gammaln(d + k + 1.0))
            + k * math.log(x)
            - 0.5 * y
            + d * np.log(sigma)
            + np.log(np.abs(v_at_d))
        )
    sign = np.sign(v_at_d) * np.where(m < n, (-1.0) ** k, 1.0)
    return sign * np.exp(log_mag)


def displacement_column(alpha: complex, n: int, n_rows: int) -> np.ndarray:
    """Vector <m|D(alpha)|n> for m = 0 .. n_rows - 1."""
    alpha = complex(alpha)
    x = abs(alpha)
    if x == 0.0:
        col = np.zeros(n_rows, dtype=complex)
        if n < n_rows:
            col[n] = 1.0
        return col
    m = np.arange(n_rows)
    phase = np.exp(1j * (m - n) * math.atan2(alpha.imag, alpha.real))
    return phase * _displacement_real(x, n, m)


def displacement_matrix(alpha: complex, n_rows: int, n_cols: int) -> np.ndarray:
    """Block <m|D(alpha)|k> with m < n_rows, k < n_cols."""
    return np.stack([displacement_column(alpha, k, n_rows) for k in range(n_cols)], axis=1)


def displacement_element(m: int, n: int, alpha: complex) -> complex:
    """Matrix element <m|D(alpha)|n>."""
    if m < 0 or n < 0:
        raise ValueError("Fock indices must be nonnegative")
    alpha = complex(alpha)
    if alpha == 0:
        return 1.0 + 0j if m == n else 0j
    theta = math.atan2(alpha.imag, alpha.real)
    r = _displacement_real(abs(alpha), n, np.array([m]))[0]
    return complex(np.exp(1j * (m - n) * theta) * r)


def displaced_fock_ket(spec: DisplacedFockSpec) -> FockKet:
    """|alpha, n> = D(alpha)|n> in the truncation of ``spec``.

    Raises :class:`TruncationError` when more than 1e-10 of the weight sits
    in the top 16 levels.
    """
    amp = displacement_column(spec.alpha, spec.n, spec.n_trunc)
    ket = FockKet(amp)
    guard = min(GUARD, spec.n_trunc)
    tail = ket.tail_weight(guard)
    if tail >= TAIL_TOL:
        raise TruncationError(
            f"tail weight {tail:.3e} in top {guard} levels for alpha={spec.alpha}, "
            f"n={spec.n}, N={spec.n_trunc}"
        )
    deficit = abs(ket.norm - 1.0)
    if deficit >= TAIL_TOL:
        raise TruncationError(f"norm deficit {deficit:.3e} for N={spec.n_trunc}")
    return ket


def auto_displaced_fock_ket(alpha: complex, n: int, n_trunc: int | None = None) -> FockKet:
    """Displaced Fock ket, doubling the truncation until its checks pass.

    Truncations beyond ``MAX_TRUNCATION`` levels raise instead of allocating.
    """
    size = n_trunc or default_truncation(alpha, n)
    for _ in range(12):
        if size > MAX_TRUNCATION:
            raise TruncationError(
                f"alpha={alpha}, n={n} needs more than {MAX_TRUNCATION} levels; use the displaced route"
            )
        try:
            return displaced_fock_ket(DisplacedFockSpec(alpha, n, size))
        except TruncationError:
            size *= 2
    raise TruncationError(f"no adequate truncation found for alpha={alpha}, n={n}")


def displaced_fock_overlap(alpha1: complex, alpha2: complex, n: int) -> complex:
    """<alpha1, n | alpha2, n> in closed form.

    exp(i Im(alpha1* alpha2)) exp(-|alpha2 - alpha1|^2 / 2) L_n(|alpha2 - alpha1|^2)
    """
    a1, a2 = complex(alpha1), complex(alpha2)
    d2 = abs(a2 - a1) ** 2
    phase = (a1.conjugate() * a2).imag
    return complex(np.exp(1j * phase) * math.exp(-0.5 * d2) * laguerre(n, d2))


# ---------------------------------------------------------------------------
# Observables and reductions
# ---------------------------------------------------------------------------

def mean_annihilation(amplitudes) -> complex:
    """<a> for a field vector, or summed over spin rows of a joint array."""
    a = np.atleast_2d(np.asarray(amplitudes))
    root = np.sqrt(np.arange(1, a.shape[1]))
    return complex(np.sum(np.conj(a[:, :-1]) * root * a[:, 1:]))


def quadrature_expectations(ket: FockKet, t: float, omega0: float) -> tuple[float, float]:
    """<q(t)>, <p(t)> of the interaction-picture quadratures (hbar = 1).

    q(t) = (a+ e^{i w t} + a e^{-i w t}) / sqrt(2 w),
    p(t) = i sqrt(w / 2) (a+ e^{i w t} - a e^{-i w t}).
    """
    z = mean_annihilation(ket.amplitudes) * np.exp(-1j * omega0 * t)
    q = math.sqrt(2.0 / omega0) * z.real
    p = math.sqrt(2.0 * omega0) * z.imag
    return q, p


def spin_density_array(psi: np.ndarray) -> np.ndarray:
    """2x2 reduced spin matrix of a ``(2, N)`` array, or batch ``(T, 2, N)``."""
    return np.einsum("...sm,...rm->...sr", psi, np.conj(psi))


def partial_trace_spin(state: JointKet) -> DensityMatrix:
    """Reduced spin state (trace over the field)."""
    return DensityMatrix(spin_density_array(state.amplitudes))


def partial_trace_field(state: JointKet) -> DensityMatrix:
    """Reduced field state (trace over the spin)."""
    psi = state.amplitudes
    return DensityMatrix(psi.T @ np.conj(psi))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the sum of absolute eigenvalues of rho - sigma."""
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    b = sigma.entries if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def trace_distance_from_vectors(rho_vectors, sigma_vectors) -> float:
    """Trace distance between sum_i |u_i><u_i| and sum_j |v_j><v_j|.

    The vectors (rows) carry their weights in their norms. The difference is
    represented on the span of all vectors, so the cost is linear in the
    ambient dimension; this is how low-rank field states in very large
    truncations are compared.
    """
    u = np.atleast_2d(np.asarray(rho_vectors, dtype=complex))
    v = np.atleast_2d(np.asarray(sigma_vectors, dtype=complex))
    if u.shape[1] != v.shape[1]:
        raise ValueError("vectors live in different dimensions")
    q, _ = np.linalg.qr(np.concatenate([u, v]).T)
    cu = np.conj(q.T) @ u.T
    cv = np.conj(q.T) @ v.T
    delta = cu @ np.conj(cu.T) - cv @ np.conj(cv.T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(delta))))


def entropy_from_eigenvalues(p, clip: float = 1e-9) -> float:
    p = np.asarray(p, dtype=float)
    if p.min(initial=0.0) < -clip or p.max(initial=0.0) > 1 + clip:
        raise ValueError("eigenvalues outside [0, 1] beyond the clipping window")
    p = np.clip(p, 0.0, 1.0)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-tr(rho ln rho) with 0 ln 0 = 0."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return entropy_from_eigenvalues(np.linalg.eigvalsh(m))


def binary_entropy(x):
    """Entropy of diag((1 + x)/2, (1 - x)/2), vectorised over ``x``."""
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    out = np.zeros_like(x)
    for s in (1.0, -1.0):
        p = 0.5 * (1.0 + s * x)
        nz = p > 0
        out[nz] -= p[nz] * np.log(p[nz])
    return out if out.ndim else float(out)
