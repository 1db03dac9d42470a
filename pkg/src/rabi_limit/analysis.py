"""Fixed-A coupling sweeps, inflection points and scaling fits.

Along a sweep the drive amplitude A = lam |alpha| is held fixed, so each
coupling lam implies |alpha| = A / lam. Windows are t1 = N tau_R with
tau_R = pi / A.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import metrics
from .errors import GridError, RabiLimitError
from .specfun import _laguerre_with_derivatives

METRICS = ("spin_td", "field_td", "correlation", "entropy")
VARIANTS = ("analytic", "numeric")
LARGE_N_CONSTANT = math.sqrt((9.0 - math.sqrt(21.0)) / 5.0)

# Metric ranges, used to validate curve values.
_RANGES = {"spin_td": 1.0, "field_td": 1.0, "correlation": 2.0, "entropy": math.log(2.0)}


def periods_in(t1: float, A: float) -> int:
    """Integer number of Rabi periods in t1 (t1 = N pi / A)."""
    N = int(round(t1 * A / math.pi))
    if N < 1 or abs(N * math.pi / A - t1) > 1e-9 * max(1.0, t1):
        raise ValueError(f"t1 = {t1} is not an integer number of Rabi periods")
    return N


def evaluate_metric(metric_id: str, variant: str, A: float, n: int, lam: float, t1: float,
                    Delta: float = 0.0, route: str = "displaced", entropy_tol: float = 1e-6) -> float:
    """One metric value at one coupling."""
    if metric_id not in METRICS or variant not in VARIANTS:
        raise ValueError(f"unknown metric {metric_id!r} / variant {variant!r}")
    if variant == "analytic":
        if metric_id == "spin_td":
            return metrics.spin_trace_distance_analytic(n, lam, t1)
        if lam == 0:
            return 0.0
        if metric_id == "field_td":
            return metrics.field_trace_distance_fbrwa(n, lam, A / lam, t1)
        N = periods_in(t1, A)
        if metric_id == "correlation":
            return metrics.correlation_analytic(n, lam, A / lam, N)
        return metrics.entropy_analytic(n, lam, N, A, tol=entropy_tol)
    if metric_id == "spin_td":
        return metrics.spin_trace_distance_numeric(A, n, lam, t1, Delta, route)
    if metric_id == "field_td":
        return metrics.field_trace_distance_numeric(A, n, lam, t1, Delta, route)
    if metric_id == "correlation":
        return metrics.correlation_numeric(A, n, lam, t1, Delta=Delta, route=route)
    return metrics.entropy_numeric(A, n, lam, t1, Delta=Delta, route=route)


@dataclass(frozen=True)
class MetricCurve:
    """Metric values on an increasing coupling grid; invalid points hold NaN."""

    metric_id: str
    A: float
    n: int
    t1: float
    Delta: float
    lambdas: np.ndarray
    values: np.ndarray
    variant: str = "analytic"
    errors: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if lam.shape != val.shape or lam.ndim != 1:
            raise ValueError("lambdas and values must be matching vectors")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("coupling grid must be strictly increasing")
        top = _RANGES.get(self.metric_id, math.inf)
        ok = val[np.isfinite(val)]
        if np.any(ok < -1e-9) or np.any(ok > top + 1e-9):
            raise ValueError(f"{self.metric_id} values leave [0, {top}]")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", val)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas.tolist(), self.values.tolist()))


def _point(args):
    try:
        return evaluate_metric(*args), None
    except (RabiLimitError, ValueError, FloatingPointError) as exc:
        return math.nan, f"{type(exc).__name__}: {exc}"


def run_sweep(metric_id: str, A: float, n: int, lambda_grid, t1: float, Delta: float = 0.0,
              variant: str = "analytic", route: str = "displaced", workers: int = 1,
              entropy_tol: float = 1e-6) -> MetricCurve:
    """Evaluate a metric over a coupling grid at fixed A.

    The grid is sorted and deduplicated; failing points become NaN with the
    error message kept in ``errors``. With ``workers > 1`` points run in a
    process pool and are reassembled in grid order.
    """
    grid = np.unique(np.asarray(lambda_grid, dtype=float))
    if grid.size == 0 or grid[0] < 0:
        raise ValueError("coupling grid must be nonempty and nonnegative")
    tasks = [(metric_id, variant, A, n, float(lam), t1, Delta, route, entropy_tol) for lam in grid]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_point, tasks))
    else:
        results = [_point(t) for t in tasks]
    values = np.array([r[0] for r in results])
    errors = {float(lam): r[1] for lam, r in zip(grid, results) if r[1] is not None}
    return MetricCurve(metric_id, A, n, t1, Delta, grid, values, variant, errors)


# ---------------------------------------------------------------------------
# Inflection points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InflectionResult:
    lambda_star: float | None
    method: str
    window: int | None = None
    residual: float | None = None

    @property
    def found(self) -> bool:
        return self.lambda_star is not None


def _local_curvatures(lam, val, window):
    """Second derivative of a least-squares quadratic on each sliding window."""
    half = window // 2
    centers, curv, resid = [], [], []
    for i in range(half, lam.size - half):
        x = lam[i - half:i + half + 1] - lam[i]
        y = val[i - half:i + half + 1]
        scale = np.max(np.abs(x))
        coef, res, *_ = np.polyfit(x / scale, y, 2, full=True)
        centers.append(lam[i])
        curv.append(2.0 * coef[0] / scale**2)
        resid.append(math.sqrt(res[0] / window) if res.size else 0.0)
    return np.array(centers), np.array(curv), np.array(resid)


def inflection_numeric(curve: MetricCurve, window: int = 7) -> InflectionResult:
    """Smallest-coupling inflection of a curve in linear lam.

    Moving quadratic fits give the sign of the curvature; the first sign
    change is refined by bisection on the second derivative of a cubic
    spline through the data.
    """
    mask = curve.valid
    lam, val = curve.lambdas[mask], curve.values[mask]
    if lam.size < max(15, window + 2):
        raise GridError(f"inflection search needs at least 15 valid points, got {lam.size}")
    if lam[-1] / lam[0] < 10:
        raise GridError("inflection search needs a grid spanning at least one decade")
    centers, curv, resid = _local_curvatures(lam, val, window)
    # curvature below roundoff of the fits carries no sign
    floor = 1e-9 * np.max(np.abs(val)) / (lam[-1] - lam[0]) ** 2
    keep = np.nonzero(np.abs(curv) > floor)[0]
    flips = np.nonzero(np.sign(curv[keep[:-1]]) != np.sign(curv[keep[1:]]))[0]
    if flips.size == 0:
        return InflectionResult(None, "numeric", window, float(resid.max()))
    i, j = int(keep[flips[0]]), int(keep[flips[0] + 1])
    lo, hi = centers[i], centers[j]
    spline = CubicSpline(lam, val)
    d2 = lambda x: float(spline(x, 2))
    f_lo = d2(lo)
    f_hi = d2(hi)
    if f_lo * f_hi > 0:
        # spline and local fits disagree on the bracket; take the fit crossing
        root = lo + (hi - lo) * curv[i] / (curv[i] - curv[j])
    else:
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            f_mid = d2(mid)
            if f_mid == 0 or hi - lo < 1e-15 * hi:
                break
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        root = 0.5 * (lo + hi)
    return InflectionResult(float(root), "numeric", window, float(resid[max(0, i - 1):j + 2].max()))


def taylor_coefficients(n: int, t: float) -> tuple[float, float, float]:
    """D ~ a lam^2 - b lam^4 + c lam^6 for the analytic spin trace distance."""
    a = (2 * n + 1) * t**2 / 4
    b = (2 * n * n + 2 * n + 1) * t**4 / 16
    c = (4 * n**3 + 6 * n * n + 8 * n + 3) * t**6 / 288
    return a, b, c


def inflection_taylor(n: int, t: float) -> InflectionResult:
    """Smaller positive root of 2a - 12 b lam^2 + 30 c lam^4 = 0; absent if none is real."""
    if n < 0 or t <= 0:
        raise ValueError("need n >= 0 and t > 0")
    a, b, c = taylor_coefficients(n, t)
    disc = 144 * b * b - 240 * a * c
    if disc < 0:
        return InflectionResult(None, "taylor")
    lam2 = (12 * b - math.sqrt(disc)) / (60 * c)
    return InflectionResult(math.sqrt(lam2) if lam2 > 0 else None, "taylor")


def inflection_large_n(n: int, t: float) -> InflectionResult:
    """lam_* = sqrt((9 - sqrt 21)/5) / (t sqrt n)."""
    if n < 1:
        raise ValueError("the large-n form needs n >= 1")
    return InflectionResult(LARGE_N_CONSTANT / (t * math.sqrt(n)), "large_n")


def spin_td_derivatives(n: int, lam, t: float):
    """First and second lam-derivatives of (1/2)[1 - L_n(x) e^{-x/2}], x = lam^2 t^2."""
    lam = np.asarray(lam, dtype=float)
    x = (lam * t) ** 2
    L, L1, L2 = _laguerre_with_derivatives(n, x)
    e = np.exp(-0.5 * x)
    g1 = e * (L1 - 0.5 * L)
    g2 = e * (L2 - L1 + 0.25 * L)
    d1 = -lam * t * t * g1
    d2 = -t * t * g1 - 2.0 * lam * lam * t**4 * g2
    return d1, d2


# ---------------------------------------------------------------------------
# Scaling fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    residual: float


def fit_power_law(points) -> PowerLawFit:
    """Least-squares line through (ln n, ln y)."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4 or pts.shape[1] != 2:
        raise GridError("power-law fit needs at least four (n, value) pairs")
    if np.any(pts <= 0):
        raise GridError("power-law fit needs positive data")
    if np.unique(pts[:, 0]).size < 2:
        raise GridError("power-law fit needs distinct abscissae")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, icpt = np.polyfit(x, y, 1)
    res = y - (slope * x + icpt)
    return PowerLawFit(float(slope), float(math.exp(icpt)), float(math.sqrt(np.mean(res**2))))


def analytic_spin_curve(n: int, t1: float, lambda_grid, A: float = 0.2) -> MetricCurve:
    lam = np.unique(np.asarray(lambda_grid, dtype=float))
    vals = np.array([metrics.spin_trace_distance_analytic(n, float(l), t1) for l in lam])
    return MetricCurve("spin_td", A, n, t1, 0.0, lam, vals)


def scaling_from_analytic(ns, t1: float, lambda_grid, A: float = 0.2):
    """lam_*(n) from analytic spin-TD curves, its power-law fit, and the fit of the slope at lam_*."""
    stars, slopes = [], []
    for n in ns:
        res = inflection_numeric(analytic_spin_curve(n, t1, lambda_grid, A))
        if not res.found:
            raise GridError(f"no inflection found for n={n}")
        stars.append((n, res.lambda_star))
        slopes.append((n, float(spin_td_derivatives(n, res.lambda_star, t1)[0])))
    return stars, fit_power_law(stars), fit_power_law(slopes)
