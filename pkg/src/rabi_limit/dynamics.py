"""Jaynes-Cummings propagation, semiclassical evolution and the FBRWA state.

Conventions: H = (Omega/2) sz + w0 a+a + lam (a s+ + a+ s-), with
Omega = w0 + Delta. The excitation number N = a+a + sz/2 commutes with the
interaction, so H = w0 N + H_I with H_I = (Delta/2) sz + lam (a s+ + a+ s-).

Two propagation routes are provided:

* lab route: exact 2x2 block evolution in the full Fock truncation;
* rotating-displaced route: chi = D(alpha)^+ e^{i w0 t N} psi_lab evolves
  under the constant Hamiltonian
  H_chi = (Delta/2) sz + lam (a s+ + a+ s-) + lam (alpha s+ + alpha* s-)
  starting from |+z, n>, so a small truncation suffices even when |alpha|
  is in the thousands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FrameError, TruncationError
from .hilbert import (
    FIELD_INTERACTION,
    FRAMES,
    GUARD,
    LAB,
    ROTATING_DISPLACED,
    DensityMatrix,
    FockKet,
    JointKet,
    auto_displaced_fock_ket,
    default_truncation,
    displacement_column,
    spin_density_array,
)
from .specfun import laguerre

LEAKAGE_TOL = 1e-8
SPIN_UP = np.array([1.0, 0.0], dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Hamiltonian parameters in units where the field frequency is ``omega0``."""

    Omega: float = 1.0
    omega0: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("coupling must be nonnegative")
        if self.omega0 <= 0:
            raise ValueError("field frequency must be positive")

    @classmethod
    def resonant(cls, lam: float, omega0: float = 1.0, Delta: float = 0.0) -> "ModelParams":
        return cls(Omega=omega0 + Delta, omega0=omega0, lam=lam)

    @property
    def Delta(self) -> float:
        return self.Omega - self.omega0

    def drive(self, alpha: complex) -> float:
        """A = lam |alpha|."""
        return self.lam * abs(alpha)

    @staticmethod
    def alpha_for(A: float, lam: float) -> float:
        """|alpha| = A / lam along a fixed-A sequence."""
        if lam <= 0:
            raise ValueError("fixed-A displacement needs lam > 0")
        return A / lam


def rabi_period(A: float) -> float:
    """Semiclassical Rabi period pi / A (period of cos 2At)."""
    return math.pi / A


@dataclass(frozen=True)
class FbrwaBranches:
    alpha_plus: complex
    alpha_minus: complex
    phi: float

    @classmethod
    def at(cls, alpha: complex, lam: float, t: float, omega0: float = 1.0) -> "FbrwaBranches":
        alpha = complex(alpha)
        r = abs(alpha)
        if r == 0:
            raise ValueError("FBRWA branches need |alpha| > 0")
        base = alpha * np.exp(-1j * omega0 * t)
        eps = lam * t / (2.0 * r)
        return cls(complex(base * (1 - 1j * eps)), complex(base * (1 + 1j * eps)), lam * r * t)


# ---------------------------------------------------------------------------
# Frame phases
# ---------------------------------------------------------------------------

def _number_phases(n_trunc: int, omega0: float, t: float, sign: float) -> np.ndarray:
    """diag of exp(sign * i w0 t (a+a + sz/2)) as a (2, N) array."""
    m = np.arange(n_trunc)
    spin = np.array([0.5, -0.5])[:, None]
    return np.exp(sign * 1j * omega0 * t * (m[None, :] + spin))


def displacement_block(beta: complex, n_rows: int, n_cols: int) -> np.ndarray:
    """<m|D(beta)|k> for m < n_rows, k < n_cols, built along the shorter side."""
    if n_cols <= n_rows:
        return np.stack([displacement_column(beta, k, n_rows) for k in range(n_cols)], axis=1)
    # <m|D(b)|k> = conj(<k|D(-b)|m>)
    return np.stack([np.conj(displacement_column(-beta, m, n_cols)) for m in range(n_rows)])


def _occupied_levels(psi: np.ndarray, floor: float = 1e-24) -> int:
    w = np.sum(np.abs(psi) ** 2, axis=0)
    idx = np.nonzero(w > floor)[0]
    return int(idx[-1]) + 1 if idx.size else 1


def _to_lab(state: JointKet, n_out: int | None) -> JointKet:
    psi = state.amplitudes
    if state.frame == LAB:
        return state
    if state.frame == FIELD_INTERACTION:
        phase = np.exp(-1j * state.omega0 * state.t * np.arange(psi.shape[1]))
        return JointKet(psi * phase, LAB, t=state.t, omega0=state.omega0)
    k = _occupied_levels(psi)
    if n_out is None:
        n_out = default_truncation(state.alpha, k)
    d = displacement_block(state.alpha, n_out, k)
    lab = (psi[:, :k] @ d.T) * _number_phases(n_out, state.omega0, state.t, -1.0)
    return JointKet(lab, LAB, t=state.t, omega0=state.omega0)


def frame_transform(
    state: JointKet,
    target_frame: str,
    t: float | None = None,
    alpha: complex | None = None,
    params: ModelParams | None = None,
    n_trunc: int | None = None,
) -> JointKet:
    """Map ``state`` to ``target_frame``.

    The source frame parameters are read from the state. ``t``, ``alpha``
    and ``params.omega0`` define the target frame and default to the
    source's values. ``n_trunc`` sets the output truncation where a
    displacement is applied.

    Frames relative to the lab ket psi:
      field-interaction  e^{i w0 t a+a} psi
      rotating-displaced D(alpha)^+ e^{i w0 t (a+a + sz/2)} psi
    """
    if target_frame not in FRAMES:
        raise FrameError(f"unknown frame tag {target_frame!r}")
    t = state.t if t is None else t
    alpha = state.alpha if alpha is None else complex(alpha)
    omega0 = params.omega0 if params is not None else state.omega0
    target = JointKet(state.amplitudes, target_frame, alpha=alpha, omega0=omega0, t=t)
    if state.same_frame(target) and target_frame != LAB:
        return state
    if state.frame == LAB and target_frame == LAB:
        return state
    lab = _to_lab(state, n_trunc if target_frame == LAB else None)
    psi = lab.amplitudes
    if target_frame == LAB:
        return lab
    if target_frame == FIELD_INTERACTION:
        phase = np.exp(1j * omega0 * t * np.arange(psi.shape[1]))
        return JointKet(psi * phase, FIELD_INTERACTION, omega0=omega0, t=t)
    rot = psi * _number_phases(psi.shape[1], omega0, t, 1.0)
    n_out = n_trunc or psi.shape[1]
    d = displacement_block(-alpha, n_out, psi.shape[1])
    return JointKet(rot @ d.T, ROTATING_DISPLACED, alpha=alpha, omega0=omega0, t=t)


# ---------------------------------------------------------------------------
# Lab route
# ---------------------------------------------------------------------------

def lab_initial_state(alpha: complex, n: int, n_trunc: int | None = None, spin=SPIN_UP) -> JointKet:
    """spin (x) |alpha, n> in the lab frame at t = 0."""
    return JointKet.product(spin, auto_displaced_fock_ket(alpha, n, n_trunc), frame=LAB)


def _check_leakage(psi: np.ndarray, tol: float = LEAKAGE_TOL):
    guard = min(GUARD, psi.shape[1])
    top = float(np.sum(np.abs(psi[:, -guard:]) ** 2))
    if top > tol:
        raise TruncationError(f"population {top:.3e} in the top {guard} levels exceeds {tol:g}")


def jc_propagate_lab_array(psi0: np.ndarray, params: ModelParams, times) -> np.ndarray:
    """Lab-frame amplitudes at each time, shape ``(len(times), 2, N)``.

    Sector k = {|+z,k>, |-z,k+1>} evolves by the exact 2x2 unitary with
    splitting sqrt(Delta^2 + 4 lam^2 (k+1)); |-z,0> acquires a phase. The
    top level |+z,N-1> has no partner in the truncation and is guarded by
    the leakage check.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    _check_leakage(psi0)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n_trunc = psi0.shape[1]
    d, lam, w0 = params.Delta, params.lam, params.omega0
    k = np.arange(n_trunc - 1)
    g = 2.0 * lam * np.sqrt(k + 1.0)
    om = np.sqrt(d * d + g * g)
    safe = np.where(om > 0, om, 1.0)
    up, lo = psi0[0, :-1], psi0[1, 1:]
    out = np.empty((times.size, 2, n_trunc), dtype=complex)
    for i, t in enumerate(times):
        c = np.cos(0.5 * om * t)
        s = np.where(om > 0, np.sin(0.5 * om * t) / safe, 0.5 * t)
        new_up = (c - 1j * s * d) * up - 1j * s * g * lo
        new_lo = -1j * s * g * up + (c + 1j * s * d) * lo
        ph = np.exp(-1j * w0 * t * (k + 0.5))
        out[i, 0, :-1] = new_up * ph
        out[i, 1, 1:] = new_lo * ph
        out[i, 1, 0] = psi0[1, 0] * np.exp(-1j * t * (-0.5 * d - 0.5 * w0))
        out[i, 0, -1] = psi0[0, -1] * np.exp(-1j * t * (0.5 * d + w0 * (n_trunc - 0.5)))
    return out


def jc_propagate_lab(initial: JointKet, params: ModelParams, t: float) -> JointKet:
    """Exact JC evolution of a lab-frame ket over time ``t``."""
    if initial.frame != LAB:
        raise FrameError("jc_propagate_lab needs a lab-frame state")
    psi = jc_propagate_lab_array(initial.amplitudes, params, [t])[0]
    return JointKet(psi, LAB, omega0=params.omega0, t=initial.t + t)


# ---------------------------------------------------------------------------
# Rotating-displaced route
# ---------------------------------------------------------------------------

def displaced_hamiltonian(params: ModelParams, alpha: complex, n_small: int) -> np.ndarray:
    """H_chi on the basis index s * N + m (s = 0 for +z)."""
    alpha = complex(alpha)
    lam = params.lam
    dim = 2 * n_small
    h = np.zeros((dim, dim), dtype=complex)
    m = np.arange(n_small)
    h[m, m] = 0.5 * params.Delta
    h[n_small + m, n_small + m] = -0.5 * params.Delta
    # lam a s+ : |-z, m> -> sqrt(m) |+z, m-1>
    h[m[:-1], n_small + m[1:]] = lam * np.sqrt(m[1:])
    # lam alpha s+ : |-z, m> -> |+z, m>
    h[m, n_small + m] = lam * alpha
    h[n_small:, :n_small] = np.conj(h[:n_small, n_small:].T)
    return h


def suggested_small_truncation(n: int, lam: float, alpha: complex, t_max: float) -> int:
    """Frame-local truncation for the rotating-displaced route.

    The FBRWA branches move by lam t / 2 from the frame origin, and JC
    excitation conservation bounds the lab photon number by about
    (|alpha| + sqrt(n+1))^2; whichever is smaller sets the radius.
    """
    r = min(0.5 * lam * t_max, 2.0 * abs(alpha) + math.sqrt(n + 1.0))
    return int(n + 48 + math.ceil(r * r + 6.0 * r * math.sqrt(2 * n + 1)))


class DisplacedFramePropagator:
    """Eigendecomposition of H_chi, reusable for any number of times.

    The decomposition is immutable once built, so one instance may serve
    concurrent readers.
    """

    def __init__(self, params: ModelParams, alpha: complex, n: int, n_small: int, spin=SPIN_UP):
        if n_small < n + 48:
            raise ValueError("frame-local truncation must be at least n + 48")
        self.params = params
        self.alpha = complex(alpha)
        self.n = n
        self.n_small = n_small
        energies, vectors = np.linalg.eigh(displaced_hamiltonian(params, alpha, n_small))
        chi0 = np.zeros(2 * n_small, dtype=complex)
        spin = np.asarray(spin, dtype=complex)
        chi0[n] = spin[0]
        chi0[n_small + n] = spin[1]
        self._energies = energies
        self._vectors = vectors
        self._coeffs = np.conj(vectors.T) @ chi0

    @classmethod
    def auto(cls, params: ModelParams, alpha: complex, n: int, t_max: float, spin=SPIN_UP, tol: float = 1e-13):
        """Size the truncation, doubling until the top levels stay empty up to ``t_max``."""
        size = suggested_small_truncation(n, params.lam, alpha, t_max)
        probe = np.linspace(0.0, t_max, 65)
        for _ in range(6):
            prop = cls(params, alpha, n, size, spin)
            if prop.top_weight(probe) <= tol:
                return prop
            size *= 2
        raise TruncationError(f"frame-local truncation did not converge (last size {size // 2})")

    def amplitudes(self, times) -> np.ndarray:
        """chi(t) for each time, shape ``(len(times), 2, n_small)``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        ph = np.exp(-1j * np.outer(times, self._energies)) * self._coeffs
        return (ph @ self._vectors.T).reshape(times.size, 2, self.n_small)

    def top_weight(self, times) -> float:
        psi = self.amplitudes(times)
        return float(np.max(np.sum(np.abs(psi[:, :, -GUARD:]) ** 2, axis=(1, 2))))

    def spin_densities(self, times) -> np.ndarray:
        """Reduced spin matrices in the co-rotating frame, shape ``(T, 2, 2)``."""
        return spin_density_array(self.amplitudes(times))

    def state(self, t: float) -> JointKet:
        return JointKet(
            self.amplitudes([t])[0], ROTATING_DISPLACED, alpha=self.alpha, omega0=self.params.omega0, t=t
        )


def jc_propagate_displaced(
    spin_initial, n: int, params: ModelParams, alpha: complex, t: float, n_small: int
) -> JointKet:
    """Evolve spin (x) |n> under H_chi for time ``t``; result in the rotating-displaced frame."""
    prop = DisplacedFramePropagator(params, alpha, n, n_small, spin_initial)
    chi = prop.amplitudes([t])[0]
    _check_leakage(chi)
    return JointKet(chi, ROTATING_DISPLACED, alpha=alpha, omega0=params.omega0, t=t)


def rotate_spin_to_lab(rho, omega0: float, t):
    """e^{-i w0 t sz / 2} rho e^{i w0 t sz / 2}, vectorised over leading axes."""
    rho = np.array(rho, dtype=complex)
    ph = np.exp(-1j * omega0 * np.asarray(t, dtype=float))
    rho[..., 0, 1] *= ph
    rho[..., 1, 0] *= np.conj(ph)
    return rho


# ---------------------------------------------------------------------------
# Semiclassical spin and the FBRWA state
# ---------------------------------------------------------------------------

def semiclassical_rotating_ket(A: float, Delta: float, t) -> np.ndarray:
    """Spin ket exp(-i ((Delta/2) sz + A sx) t)|+z>, shape ``(..., 2)``."""
    t = np.asarray(t, dtype=float)
    w = math.hypot(0.5 * Delta, A)
    c = np.cos(w * t)
    s = np.sin(w * t) / w if w > 0 else t
    return np.stack([c - 1j * s * 0.5 * Delta, -1j * s * A], axis=-1)


def semiclassical_spin_arrays(A: float, Delta: float, omega0: float, t) -> np.ndarray:
    ket = semiclassical_rotating_ket(A, Delta, t)
    rho = ket[..., :, None] * np.conj(ket[..., None, :])
    return rotate_spin_to_lab(rho, omega0, t)


def semiclassical_inversion(A: float, Delta: float, t) -> np.ndarray:
    ket = semiclassical_rotating_ket(A, Delta, t)
    return np.abs(ket[..., 0]) ** 2 - np.abs(ket[..., 1]) ** 2


def semiclassical_spin_state(A: float, Delta: float, omega0: float, t: float) -> DensityMatrix:
    """Lab-frame spin state under the driven two-level Hamiltonian, from |+z>."""
    return DensityMatrix(semiclassical_spin_arrays(A, Delta, omega0, t))


def fbrwa_inversion(n: int, lam: float, t, A: float | None = None):
    """e^{-lam^2 t^2 / 2} L_n(lam^2 t^2), times cos(2At) when ``A`` is given."""
    t = np.asarray(t, dtype=float)
    x = (lam * t) ** 2
    w = np.exp(-0.5 * x) * laguerre(n, x)
    return w * np.cos(2.0 * A * t) if A is not None else w


def fbrwa_joint_state(alpha: complex, n: int, lam: float, t: float, n_trunc: int | None = None,
                      omega0: float = 1.0) -> JointKet:
    """The FBRWA ket in the lab frame.

    1/2 e^{-i w0 t (n+1/2)} [ e^{-i phi/2} (|+z> + e^{i w0 t}|-z>) |alpha_+, n>
                            + e^{i phi/2} (|+z> - e^{i w0 t}|-z>) |alpha_-, n> ]
    """
    br = FbrwaBranches.at(alpha, lam, t, omega0)
    if n_trunc is None:
        n_trunc = default_truncation(max(abs(br.alpha_plus), abs(br.alpha_minus)), n)
    kp = auto_displaced_fock_ket(br.alpha_plus, n, n_trunc).amplitudes
    km = auto_displaced_fock_ket(br.alpha_minus, n, n_trunc).amplitudes
    size = max(kp.size, km.size)
    kp = np.pad(kp, (0, size - kp.size))
    km = np.pad(km, (0, size - km.size))
    e = np.exp(1j * omega0 * t)
    ph = np.exp(-0.5j * br.phi)
    psi = 0.5 * np.exp(-1j * omega0 * t * (n + 0.5)) * np.stack(
        [ph * kp + np.conj(ph) * km, e * (ph * kp - np.conj(ph) * km)]
    )
    return JointKet(psi, LAB, omega0=omega0, t=t)


def fbrwa_spin_density(n: int, lam: float, t: float) -> DensityMatrix:
    """(1/2)[I + L_n(lam^2 t^2) e^{-lam^2 t^2 / 2} sz]."""
    x = float(fbrwa_inversion(n, lam, t))
    return DensityMatrix(np.diag([0.5 * (1 + x), 0.5 * (1 - x)]))


def fbrwa_branch_kets(alpha: complex, n: int, lam: float, t: float, n_trunc: int | None = None,
                      omega0: float = 1.0) -> tuple[FockKet, FockKet]:
    br = FbrwaBranches.at(alpha, lam, t, omega0)
    if n_trunc is None:
        n_trunc = default_truncation(max(abs(br.alpha_plus), abs(br.alpha_minus)), n)
    return (auto_displaced_fock_ket(br.alpha_plus, n, n_trunc),
            auto_displaced_fock_ket(br.alpha_minus, n, n_trunc))


def fbrwa_field_density(alpha: complex, n: int, lam: float, t: float, n_trunc: int | None = None,
                        omega0: float = 1.0) -> DensityMatrix:
    """(1/2)(|alpha_+, n><alpha_+, n| + |alpha_-, n><alpha_-, n|)."""
    kp, km = fbrwa_branch_kets(alpha, n, lam, t, n_trunc, omega0)
    if kp.n_trunc != km.n_trunc:
        raise TruncationError("branch kets ended up in different truncations")
    a, b = kp.amplitudes, km.amplitudes
    rho = 0.5 * (np.outer(a, np.conj(a)) + np.outer(b, np.conj(b)))
    return DensityMatrix(rho, validate=False)
