"""Fixed points, stability and pseudo-arclength continuation for black-box maps.

A map is any callable ``phi(x, p) -> ndarray`` with ``x`` a 1-d array and ``p`` a
scalar parameter.  Optional attributes are honored when present:

``simplex``
    ``x`` holds densities; finite-difference stencils and Newton updates are kept
    inside ``{x >= 0, sum(x) <= 1}``.
``frozen()``
    context manager under which evaluations share common random numbers.
``common_random_numbers``
    if true the map is deterministic, so repeated evaluations may be cached.
``last_stderr``
    ensemble standard error of the latest evaluation, used for the noise-floor check.
"""

from __future__ import annotations

import cmath
import logging
import time
import warnings
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

CoarseMap = Callable[[np.ndarray, float], np.ndarray]


class ConvergenceError(RuntimeError):
    def __init__(self, message, x=None, p=None, residual=None):
        super().__init__(message)
        self.x = x
        self.p = p
        self.residual = residual


class SingularJacobianError(ConvergenceError):
    """``I - dPhi/dx`` is numerically singular, typically close to a fold."""


class NoiseFloorWarning(RuntimeWarning):
    """The requested tolerance is below twice the map's estimated standard error."""


@dataclass(frozen=True)
class ContinuationConfig:
    ds: float = 0.005
    newton_tol: float = 1e-6
    newton_max_iter: int = 20
    fd_step: float = 5e-3
    n_points: int = 200
    damping: float = 1.0
    max_halvings: int = 5
    p_min: float = -np.inf
    p_max: float = np.inf
    max_seconds: float | None = None  # wall-clock budget for trace_branch

    def __post_init__(self):
        if min(self.ds, self.newton_tol, self.fd_step) <= 0:
            raise ValueError("ds, newton_tol and fd_step must be positive")
        if self.newton_max_iter < 1 or self.n_points < 1:
            raise ValueError("newton_max_iter and n_points must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ValueError("max_seconds must be positive")


class Derivatives(NamedTuple):
    phi: np.ndarray
    dphi_dx: np.ndarray
    dphi_dp: np.ndarray


@dataclass
class FixedPoint:
    x: np.ndarray
    p: float
    residual: float
    jacobian: np.ndarray
    eigenvalues: tuple
    stable: bool
    dphi_dp: np.ndarray = field(repr=False)
    iterations: int = 0

    @property
    def max_modulus(self) -> float:
        return max(abs(v) for v in self.eigenvalues)

    @property
    def leading_eigenvalue(self) -> complex:
        """Algebraically largest eigenvalue."""
        return self.eigenvalues[0]

    @classmethod
    def from_derivatives(cls, x, p, d: Derivatives, iterations=0):
        ev = eigenvalues(d.dphi_dx)
        return cls(np.array(x, dtype=float), float(p),
                   float(np.linalg.norm(np.asarray(x) - d.phi)), d.dphi_dx, ev,
                   bool(max(abs(v) for v in ev) < 1.0), d.dphi_dp, iterations)


@dataclass
class ContinuationPoint(FixedPoint):
    arclength: float = 0.0

    @classmethod
    def from_fixed_point(cls, fp: FixedPoint, arclength: float) -> "ContinuationPoint":
        return cls(fp.x, fp.p, fp.residual, fp.jacobian, fp.eigenvalues, fp.stable,
                   fp.dphi_dp, fp.iterations, arclength)


@dataclass(frozen=True)
class Fold:
    index: int  # branch point closest to the turning point
    p: float
    x: np.ndarray
    leading_eigenvalue: float


@dataclass
class Branch:
    points: list
    folds: list
    status: str = "complete"

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, k):
        return self.points[k]


def eigenvalues_2x2(m) -> tuple[complex, complex]:
    """Roots of ``l**2 - tr l + det``, sorted by descending real part."""
    (a, b), (c, d) = np.asarray(m, dtype=float)
    half_tr = 0.5 * (a + d)
    root = cmath.sqrt(half_tr * half_tr - (a * d - b * c))
    pair = [complex(half_tr + root), complex(half_tr - root)]
    pair.sort(key=lambda z: (z.real, z.imag), reverse=True)
    return pair[0], pair[1]


def eigenvalues(m) -> tuple:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape == (2, 2):
        return eigenvalues_2x2(m)
    ev = [complex(v) for v in np.linalg.eigvals(m)]
    ev.sort(key=lambda z: (z.real, z.imag), reverse=True)
    return tuple(ev)


def _crn(phi):
    frozen = getattr(phi, "frozen", None)
    return frozen() if frozen is not None else nullcontext()


def _inside(phi, x) -> bool:
    if not getattr(phi, "simplex", False):
        return True
    return bool(np.all(x >= 0) and x.sum() <= 1)


def _project(phi, x):
    if not getattr(phi, "simplex", False):
        return x
    x = np.clip(x, 0.0, 1.0)
    total = x.sum()
    return x / total if total > 1 else x


class _Evaluator:
    """Wraps a map with a memo for deterministic maps."""

    def __init__(self, phi):
        self.phi = phi
        self.cache = {} if getattr(phi, "common_random_numbers", True) else None

    def __call__(self, x, p):
        x = np.asarray(x, dtype=float)
        if self.cache is None:
            return np.asarray(self.phi(x, p), dtype=float)
        key = (x.tobytes(), float(p))
        if key not in self.cache:
            self.cache[key] = np.asarray(self.phi(x, p), dtype=float)
        return self.cache[key]


def fd_jacobian(phi: CoarseMap, x, p: float, h: float) -> Derivatives:
    """Central differences for ``dPhi/dx`` (column by column) and ``dPhi/dp``.

    A stencil point that would leave the domain is replaced by the centre point,
    giving a one-sided difference.  If neither side fits, the step is halved
    for that column until one does.  All evaluations share common random numbers.
    """
    ev = phi if isinstance(phi, _Evaluator) else _Evaluator(phi)
    x = np.asarray(x, dtype=float)
    n = len(x)
    with _crn(ev.phi):
        f0 = ev(x, p)
        jac = np.empty((len(f0), n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            jac[:, k] = _difference(ev, x, p, e, h, f0)
        lo_ok = not getattr(ev.phi, "simplex", False) or p - h >= 0
        hi_ok = not getattr(ev.phi, "simplex", False) or p + h <= 1
        f_hi = ev(x, p + h) if hi_ok else f0
        f_lo = ev(x, p - h) if lo_ok else f0
        dp = (f_hi - f_lo) / (h * (hi_ok + lo_ok))
    return Derivatives(f0, jac, dp)


def _difference(ev, x, p, e, h, f0):
    # Near a corner of the simplex neither side may fit; shrink until one does.
    for _ in range(8):
        up, down = x + e, x - e
        up_ok, down_ok = _inside(ev.phi, up), _inside(ev.phi, down)
        if up_ok or down_ok:
            break
        e, h = e / 2, h / 2
    else:
        raise ValueError(f"finite-difference step {h} does not fit at x={x}")
    f_up = ev(up, p) if up_ok else f0
    f_down = ev(down, p) if down_ok else f0
    return (f_up - f_down) / (h * (up_ok + down_ok))


def _check_noise(phi, tol):
    se = getattr(phi, "last_stderr", None)
    if se is not None and np.all(np.isfinite(se)) and tol < 2 * float(np.linalg.norm(se)):
        warnings.warn(
            f"tolerance {tol:g} is below twice the ensemble standard error "
            f"{float(np.linalg.norm(se)):.2g}", NoiseFloorWarning, stacklevel=3)


def newton_fixed_point(phi: CoarseMap, x0, p: float, cfg: ContinuationConfig) -> FixedPoint:
    """Damped Newton on ``G(x) = x - Phi(x, p)`` with backtracking.

    The step is halved (up to four times) when it fails to reduce ``|G|``.  Raises
    :class:`SingularJacobianError` if ``I - dPhi/dx`` is singular and
    :class:`ConvergenceError` after ``cfg.newton_max_iter`` iterations; both carry
    the last iterate and residual.
    """
    if hasattr(x0, "as_array"):
        x0 = x0.as_array()
    ev = _Evaluator(phi)
    x = _project(phi, np.array(x0, dtype=float))
    res = np.inf
    for it in range(cfg.newton_max_iter + 1):
        d = fd_jacobian(ev, x, p, cfg.fd_step)
        g = x - d.phi
        res = float(np.linalg.norm(g))
        if it == 0:
            _check_noise(phi, cfg.newton_tol)
        if res <= cfg.newton_tol:
            return FixedPoint.from_derivatives(x, p, d, it)
        if it == cfg.newton_max_iter:
            break
        a = np.eye(len(x)) - d.dphi_dx
        sv = np.linalg.svd(a, compute_uv=False)
        if not sv[-1] > 1e-10 * max(1.0, sv[0]):
            raise SingularJacobianError(
                f"singular I - dPhi/dx at p={p}", x=x, p=p, residual=res)
        dx = np.linalg.solve(a, -g)
        step = cfg.damping
        with _crn(phi):
            for _ in range(5):
                trial = _project(phi, x + step * dx)
                if np.linalg.norm(trial - ev(trial, p)) < res:
                    break
                step *= 0.5
        x = trial
    raise ConvergenceError(
        f"Newton did not converge in {cfg.newton_max_iter} iterations "
        f"(residual {res:.3g})", x=x, p=p, residual=res)


def _corrector(ev, z1, tangent, ds, start: FixedPoint, cfg):
    """Solve ``x = Phi(x, p)`` with ``tangent . (z - z1) = ds``.

    Starts as a chord iteration with the derivatives of ``start``; switches to fresh
    finite-difference derivatives once the chord iteration stalls.
    """
    n = len(z1) - 1
    z = z1 + ds * tangent
    jac, dp = start.jacobian, start.dphi_dp
    prev = np.inf
    fresh = False
    for it in range(cfg.newton_max_iter):
        x, p = z[:n], z[n]
        if not _inside(ev.phi, x):
            z[:n] = x = _project(ev.phi, x)
        f = ev(x, p)
        r = np.append(x - f, tangent @ (z - z1) - ds)
        size = float(np.linalg.norm(r))
        if np.linalg.norm(r[:n]) <= cfg.newton_tol and abs(r[n]) <= cfg.newton_tol:
            return z, it
        if it > 0 and size > 0.5 * prev and not fresh:
            fresh = True
        if fresh:
            d = fd_jacobian(ev, x, p, cfg.fd_step)
            jac, dp = d.dphi_dx, d.dphi_dp
        prev = size
        m = np.zeros((n + 1, n + 1))
        m[:n, :n] = np.eye(n) - jac
        m[:n, n] = -dp
        m[n] = tangent
        try:
            delta = np.linalg.solve(m, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular bordered system", x=x, p=p,
                                   residual=size) from exc
        z = z + cfg.damping * delta
    raise ConvergenceError("corrector did not converge", x=z[:n], p=z[n], residual=prev)


def arclength_step(phi: CoarseMap, prev: ContinuationPoint, prev2: ContinuationPoint,
                   cfg: ContinuationConfig, ds: float | None = None,
                   _ev=None) -> ContinuationPoint:
    """One pseudo-arclength step beyond ``prev`` along the secant ``prev2 -> prev``.

    The predictor moves ``ds`` along the unit secant; the corrector keeps the new
    point on the hyperplane at distance ``ds`` orthogonal to it, so it passes folds.
    On corrector failure ``ds`` is halved, up to ``cfg.max_halvings`` times.
    """
    ev = _ev or _Evaluator(phi)
    z1 = np.append(prev.x, prev.p)
    z0 = np.append(prev2.x, prev2.p)
    secant = z1 - z0
    norm = np.linalg.norm(secant)
    if norm == 0:
        raise ValueError("the two previous points coincide")
    tangent = secant / norm
    step = cfg.ds if ds is None else ds
    last_error = None
    for _ in range(cfg.max_halvings + 1):
        try:
            with _crn(phi):
                z, iters = _corrector(ev, z1, tangent, step, prev, cfg)
                d = fd_jacobian(ev, z[:-1], z[-1], cfg.fd_step)
        except (ConvergenceError, ValueError) as exc:
            last_error = exc
            step *= 0.5
            continue
        fp = FixedPoint.from_derivatives(z[:-1], z[-1], d, iters)
        return ContinuationPoint.from_fixed_point(
            fp, prev.arclength + float(np.linalg.norm(z - z1)))
    raise ConvergenceError(
        f"continuation step failed after {cfg.max_halvings} halvings: {last_error}",
        x=prev.x, p=prev.p, residual=getattr(last_error, "residual", None))


def trace_branch(phi: CoarseMap, seed_points, cfg: ContinuationConfig) -> Branch:
    """Continue from two converged fixed points, in the direction first -> second.

    Stops after ``cfg.n_points`` steps, when the parameter leaves
    ``[cfg.p_min, cfg.p_max]``, once ``cfg.max_seconds`` have elapsed, or on a
    failed step (status ``"aborted: ..."``, partial branch returned).
    """
    started = time.monotonic()
    first, second = seed_points
    ev = _Evaluator(phi)
    pts = [ContinuationPoint.from_fixed_point(first, 0.0)]
    dist = float(np.linalg.norm(np.append(second.x - first.x, second.p - first.p)))
    pts.append(ContinuationPoint.from_fixed_point(second, dist))
    status = "complete"
    for _ in range(cfg.n_points):
        try:
            nxt = arclength_step(phi, pts[-1], pts[-2], cfg, _ev=ev)
        except ConvergenceError as exc:
            status = f"aborted: {exc}"
            break
        pts.append(nxt)
        log.info("point %d: p=%.5f x=%s |lambda|max=%.4f", len(pts) - 1, nxt.p,
                 np.array2string(nxt.x, precision=4), nxt.max_modulus)
        if not cfg.p_min <= nxt.p <= cfg.p_max:
            status = "left parameter window"
            break
        if cfg.max_seconds is not None and time.monotonic() - started > cfg.max_seconds:
            status = "time budget exhausted"
            break
    return Branch(pts, detect_folds(pts), status)


def detect_folds(points) -> list[Fold]:
    """Turning points where the parameter increment changes sign.

    The fold is placed at the vertex of the parabola ``p(s)`` through the three
    points around the sign change; ``x`` and the leading eigenvalue are interpolated
    along arclength.
    """
    folds = []
    p = np.array([pt.p for pt in points])
    s = np.array([pt.arclength for pt in points])
    dp = np.diff(p)
    for k in range(1, len(dp)):
        if dp[k - 1] * dp[k] >= 0:
            continue
        tri = slice(k - 1, k + 2)
        a, b, c = np.polyfit(s[tri] - s[k], p[tri], 2)
        if a != 0:
            s_star = float(np.clip(-b / (2 * a), s[k - 1] - s[k], s[k + 1] - s[k]))
        else:
            s_star = 0.0
        p_star = float(a * s_star ** 2 + b * s_star + c)
        xs = np.array([pt.x for pt in points[tri]])
        lead = np.array([pt.leading_eigenvalue.real for pt in points[tri]])
        ss = s[tri] - s[k]
        x_star = np.array([np.interp(s_star, ss, xs[:, j]) for j in range(xs.shape[1])])
        folds.append(Fold(k, p_star, x_star, float(np.interp(s_star, ss, lead))))
    return folds
