"""Scalar special functions used by the closed-form metrics.

Laguerre polynomials (by recurrence and as coefficient vectors), polynomial
powers, the lower incomplete gamma function, the Faddeeva / complex error
function, and windowed Gaussian moments

    M_r(mu, nu, T) = int_0^T t^(2r) exp(-mu t^2) cos(nu t) dt.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyWarning, DegreeBoundError, DomainError

__all__ = [
    "PolynomialCoefficients",
    "laguerre",
    "laguerre_coefficients",
    "poly_power_coefficients",
    "lower_incomplete_gamma",
    "log_lower_incomplete_gamma",
    "faddeeva",
    "erf_complex",
    "gaussian_fourier_window",
    "oscillatory_gaussian_moment",
    "oscillatory_gaussian_moments",
]

MAX_LAGUERRE_DEGREE = 30
MAX_POWER_DEGREE = 400
ERF_CERTIFIED_IMAG = 30.0

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class PolynomialCoefficients:
    """Real polynomial c_0 + c_1 x + ... + c_deg x^deg."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __len__(self):
        return self.coeffs.size

    def __getitem__(self, r):
        return self.coeffs[r]

    def __call__(self, x):
        # Horner; coefficients are stored lowest order first
        return np.polynomial.polynomial.polyval(x, self.coeffs)


# ---------------------------------------------------------------------------
# Laguerre polynomials
# ---------------------------------------------------------------------------

def laguerre(n: int, x):
    """Laguerre polynomial L_n(x) from the three-term recurrence.

    Accepts scalar or array ``x``; returns a float for scalar input.
    """
    if n < 0:
        raise DomainError(f"Laguerre degree must be nonnegative, got {n}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        out = prev
    else:
        cur = 1.0 - x
        for k in range(1, n):
            prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
        out = cur
    return float(out) if out.ndim == 0 else out


def _laguerre_with_derivatives(n: int, x):
    """L_n, L_n', L_n'' at ``x`` (arrays), via recurrences in the degree."""
    x = np.asarray(x, dtype=float)
    # L^(a)_m for a = 0, 1, 2: L_n' = -L^(1)_{n-1}, L_n'' = L^(2)_{n-2}
    def gen(m, a):
        if m < 0:
            return np.zeros_like(x)
        prev = np.ones_like(x)
        if m == 0:
            return prev
        cur = 1.0 + a - x
        for k in range(1, m):
            prev, cur = cur, ((2 * k + 1 + a - x) * cur - (k + a) * prev) / (k + 1)
        return cur

    return gen(n, 0), -gen(n - 1, 1), gen(n - 2, 2)


def laguerre_coefficients(n: int) -> PolynomialCoefficients:
    """Power-series coefficients a_r = (-1)^r C(n, r) / r! of L_n.

    The ratio is formed from exact integers, so every coefficient is the
    correctly rounded double of its rational value.
    """
    if n < 0:
        raise DomainError(f"Laguerre degree must be nonnegative, got {n}")
    if n > MAX_LAGUERRE_DEGREE:
        raise DegreeBoundError(
            f"Laguerre degree {n} exceeds supported bound {MAX_LAGUERRE_DEGREE}"
        )
    coeffs = [(-1) ** r * math.comb(n, r) / math.factorial(r) for r in range(n + 1)]
    return PolynomialCoefficients(np.array(coeffs))


def poly_power_coefficients(
    p: PolynomialCoefficients, k: int, max_degree: int = MAX_POWER_DEGREE
) -> PolynomialCoefficients:
    """Coefficients of p(x)**k by repeated convolution."""
    if k < 1:
        raise DomainError(f"power must be a positive integer, got {k}")
    if p.degree * k > max_degree:
        raise DegreeBoundError(
            f"degree {p.degree}*{k} exceeds the configured maximum {max_degree}"
        )
    # binary powering keeps the number of convolutions at O(log k)
    result = np.array([1.0])
    base = np.asarray(p.coeffs)
    e = k
    while e:
        if e & 1:
            result = np.convolve(result, base)
        e >>= 1
        if e:
            base = np.convolve(base, base)
    return PolynomialCoefficients(result)


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------

_GAMMA_EPS = 1e-16
_GAMMA_MAXITER = 10_000


def _gamma_series(s, z):
    # sum_{k>=0} z^k / (s (s+1) ... (s+k))
    term = 1.0 / s
    total = term
    for k in range(1, _GAMMA_MAXITER):
        term *= z / (s + k)
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            return total
    raise ArithmeticError(f"incomplete gamma series failed for s={s}, z={z}")


def _gamma_cf(s, z):
    # modified Lentz for Gamma(s, z) e^z z^-s
    tiny = 1e-300
    b = z + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAXITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return h
    raise ArithmeticError(f"incomplete gamma fraction failed for s={s}, z={z}")


def log_lower_incomplete_gamma(s: float, z: float) -> float:
    """Natural log of gamma(s, z); ``-inf`` at z = 0."""
    s = float(s)
    z = float(z)
    if not s > 0:
        raise DomainError(f"incomplete gamma requires s > 0, got {s}")
    if z < 0:
        raise DomainError(f"incomplete gamma requires z >= 0, got {z}")
    if z == 0:
        return -math.inf
    if math.isinf(z):
        return math.lgamma(s)
    if z < s + 1.0:
        return -z + s * math.log(z) + math.log(_gamma_series(s, z))
    log_q = -z + s * math.log(z) + math.log(_gamma_cf(s, z)) - math.lgamma(s)
    return math.lgamma(s) + math.log1p(-math.exp(log_q))


def lower_incomplete_gamma(s: float, z: float) -> float:
    """Lower incomplete gamma function gamma(s, z) = int_0^z u^(s-1) e^-u du.

    Series expansion for z < s + 1, Lentz continued fraction for the upper
    function otherwise. Evaluated in log space so large ``s`` does not
    overflow until the result itself does.
    """
    lg = log_lower_incomplete_gamma(s, z)
    if lg == -math.inf:
        return 0.0
    return math.exp(lg) if lg < 709.78 else math.inf


# ---------------------------------------------------------------------------
# Faddeeva function and complex erf
# ---------------------------------------------------------------------------

_WEIDEMAN_N = 40
_CF_RADIUS = 6.0
_CF_TERMS = 40


def _weideman_coefficients(n):
    m = 2 * n
    k = np.arange(-m + 1, m)
    ell = math.sqrt(n / math.sqrt(2.0))
    t = ell * np.tan(k * np.pi / (2 * m))
    f = np.concatenate([[0.0], np.exp(-t * t) * (ell * ell + t * t)])
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return np.flipud(a[1 : n + 1]), ell


_W_COEFFS, _W_L = _weideman_coefficients(_WEIDEMAN_N)


def _faddeeva_upper(z):
    """w(z) for Im z >= 0 (array input)."""
    out = np.empty_like(z)
    far = np.abs(z) >= _CF_RADIUS
    if far.any():
        zf = z[far]
        r = np.zeros_like(zf)
        for k in range(_CF_TERMS, 0, -1):
            r = (0.5 * k) / (zf - r)
        out[far] = (1j / _SQRT_PI) / (zf - r)
    near = ~far
    if near.any():
        zn = z[near]
        denom = _W_L - 1j * zn
        big_z = (_W_L + 1j * zn) / denom
        poly = np.polyval(_W_COEFFS, big_z)
        out[near] = 2.0 * poly / denom**2 + (1.0 / _SQRT_PI) / denom
    return out


def faddeeva(z):
    """Faddeeva function w(z) = exp(-z^2) erfc(-i z).

    Rational (Weideman) approximation near the origin and the Laplace
    continued fraction far from it; the lower half plane is reached through
    w(z) = 2 exp(-z^2) - w(-z).
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    upper = z.imag >= 0
    if upper.any():
        out[upper] = _faddeeva_upper(z[upper])
    if (~upper).any():
        zl = z[~upper]
        out[~upper] = 2.0 * np.exp(-zl * zl) - _faddeeva_upper(-zl)
    return complex(out[0]) if scalar else out


def _erf_taylor(z):
    # 2/sqrt(pi) sum (-1)^k z^(2k+1) / (k! (2k+1))
    z2 = z * z
    term = z.copy()
    total = z.copy()
    for k in range(1, 60):
        term = term * (-z2) / k
        total = total + term / (2 * k + 1)
    return 2.0 / _SQRT_PI * total


def erf_complex(z):
    """Error function of a complex argument.

    Odd and conjugation symmetry are imposed structurally: the value is
    computed for Re z >= 0, Im z >= 0 and mapped to the other quadrants.
    An :class:`AccuracyWarning` is issued when |Im z| > 30.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(np.abs(z.imag) > ERF_CERTIFIED_IMAG):
        warnings.warn(
            f"erf_complex outside certified region |Im z| <= {ERF_CERTIFIED_IMAG}",
            AccuracyWarning,
            stacklevel=2,
        )
    sign_re = np.where(np.signbit(z.real), -1.0, 1.0)
    flip_im = np.signbit(z.real) ^ np.signbit(z.imag)
    q = np.abs(z.real) + 1j * np.abs(z.imag)
    out = np.empty_like(q)
    small = np.abs(q) < 0.5
    if small.any():
        out[small] = _erf_taylor(q[small])
    if (~small).any():
        qq = q[~small]
        out[~small] = 1.0 - np.exp(-qq * qq) * _faddeeva_upper(1j * qq)
    # erf is purely imaginary on the imaginary axis
    out = np.where(q.real == 0, 1j * out.imag, out)
    out = np.where(flip_im, np.conj(out), out) * sign_re
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Windowed Gaussian moments
# ---------------------------------------------------------------------------

def gaussian_fourier_window(mu: float, nu: float, T: float) -> complex:
    """I(mu, nu; T) = int_0^T exp(-mu t^2) exp(-i nu t) dt.

    Closed form through the error function, rewritten in terms of w(z) so
    that exp(-nu^2 / 4 mu) never has to be formed on its own.
    """
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    s = math.sqrt(mu)
    x = s * T
    if nu == 0:
        return _SQRT_PI / (2 * s) * math.erf(x)
    y = nu / (2 * s)
    if nu > 0:
        # erf(x + iy) e^{-y^2} - erf(iy) e^{-y^2} = w(-y) - e^{-x^2 - 2ixy} w(-y + ix)
        w0 = faddeeva(complex(-y, 0.0))
        w1 = faddeeva(complex(-y, x))
        return _SQRT_PI / (2 * s) * (w0 - np.exp(-x * x - 2j * x * y) * w1)
    return np.conj(gaussian_fourier_window(mu, -nu, T))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_BVP_EXTRA = 60
_FORWARD_RATIO = 8.0
_BVP_RATIO = 0.25


def _complex_moments_forward(kmax, mu, nu, T, j0):
    # u_k = J_k / T^k obeys (k/T) u_{k-1} - i nu u_k - 2 mu T u_{k+1} = E_k
    e = np.exp(-mu * T * T - 1j * nu * T)
    u = np.empty(kmax + 1, dtype=complex)
    u[0] = j0
    if kmax >= 1:
        u[1] = (-1j * nu * u[0] - (e - 1.0)) / (2 * mu * T)
    for k in range(1, kmax):
        u[k + 1] = ((k / T) * u[k - 1] - 1j * nu * u[k] - e) / (2 * mu * T)
    return u


def _complex_moments_bvp(kmax, mu, nu, T, j0):
    # same scaled recurrence solved as a boundary-value problem with
    # u_{M+1} = 0, which suppresses the solution growing like (nu / 2 mu)^k
    from scipy.linalg import solve_banded

    m = kmax + _BVP_EXTRA
    e = np.exp(-mu * T * T - 1j * nu * T)
    ks = np.arange(1, m + 1)
    rhs = np.full(m, e, dtype=complex)
    rhs[0] -= j0 / T
    ab = np.zeros((3, m), dtype=complex)
    ab[0, 1:] = -2 * mu * T
    ab[1, :] = -1j * nu
    ab[2, :-1] = ks[1:] / T
    u = solve_banded((1, 1), ab, rhs)
    return np.concatenate([[j0], u[:kmax]])


def _complex_moments_quadrature(kmax, mu, nu, T):
    width = math.pi / max(nu, 1e-300)
    width = min(width, 0.5 / math.sqrt(mu), T)
    panels = min(max(1, math.ceil(T / width)), 20_000)
    edges = np.linspace(0.0, T, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    base = w * np.exp(-mu * t * t - 1j * nu * t)
    tau = t / T
    out = np.empty(kmax + 1, dtype=complex)
    p = np.ones_like(tau)
    for k in range(kmax + 1):
        out[k] = np.sum(base * p)
        p = p * tau
    return out


def _scaled_complex_moments(kmax, mu, nu, T):
    """u_k = T^-k int_0^T t^k exp(-mu t^2 - i nu t) dt for k = 0..kmax."""
    j0 = gaussian_fourier_window(mu, nu, T)
    ratio = 2 * mu * T / nu
    if ratio >= _FORWARD_RATIO:
        return _complex_moments_forward(kmax, mu, nu, T, j0)
    if ratio <= _BVP_RATIO:
        return _complex_moments_bvp(kmax, mu, nu, T, j0)
    return _complex_moments_quadrature(kmax, mu, nu, T)


def _check_moment_args(mu, nu, T):
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    if nu < 0:
        raise DomainError(f"nu must be nonnegative, got {nu}")
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")


def oscillatory_gaussian_moments(
    r_max: int, mu: float, nu: float, T: float, validate: bool = False
) -> np.ndarray:
    """M_r = int_0^T t^(2r) exp(-mu t^2) cos(nu t) dt for r = 0..r_max.

    With ``nu == 0`` the moments are incomplete gamma functions. Otherwise
    the seed r = 0 comes from :func:`gaussian_fourier_window` and the
    coupled cosine/sine moments follow from integration by parts, run
    forward when the Gaussian is strong (2 mu T / nu >= 8), as a
    boundary-value solve when it is weak (<= 0.25), and replaced by
    composite Gauss-Legendre in between where neither direction is stable.

    ``validate=True`` compares every moment with adaptive quadrature and
    warns through :class:`AccuracyWarning` on disagreement.
    """
    _check_moment_args(mu, nu, T)
    if nu == 0:
        z = mu * T * T
        out = np.array(
            [
                0.5 * math.exp(log_lower_incomplete_gamma(r + 0.5, z) - (r + 0.5) * math.log(mu))
                for r in range(r_max + 1)
            ]
        )
    else:
        u = _scaled_complex_moments(2 * r_max, mu, nu, T)
        out = np.array([u[2 * r].real * T ** (2 * r) for r in range(r_max + 1)])
    if validate:
        _validate_moments(out, mu, nu, T)
    return out


def oscillatory_gaussian_moment(
    r: int, mu: float, nu: float, T: float, validate: bool = False
) -> float:
    """Single moment M_r; see :func:`oscillatory_gaussian_moments`."""
    if r < 0:
        raise DomainError(f"moment order must be nonnegative, got {r}")
    return float(oscillatory_gaussian_moments(r, mu, nu, T, validate)[r])


def _validate_moments(values, mu, nu, T, rtol=1e-8):
    from scipy.integrate import quad

    from scipy.integrate import IntegrationWarning

    limit = max(50, int(4 * nu * T / math.pi) + 50)
    for r, v in enumerate(values):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            ref, _ = quad(
                lambda t: t ** (2 * r) * math.exp(-mu * t * t) * math.cos(nu * t),
                0.0, T, limit=limit, epsabs=0.0, epsrel=1e-12,
            )
        if abs(v - ref) > rtol * max(1.0, abs(ref)):
            warnings.warn(
                f"moment r={r} disagrees with quadrature: {v!r} vs {ref!r}",
                AccuracyWarning,
                stacklevel=3,
            )
