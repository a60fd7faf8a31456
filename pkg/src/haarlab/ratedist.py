"""Rate-distortion functions on compact groups.

For the uniform source the convex conjugate of the rate-distortion function is
``log Z(beta)`` with ``Z(beta) = int exp(beta d(g, e)) dU(g)``. A slope
``beta <= 0`` yields the point

    delta = Z'(beta) / Z(beta),   R = beta * delta - log Z(beta).

On SO(2) with the squared Euclidean distortion ``Z(beta) = exp(2 beta) I0(-2 beta)``.
Arbitrary sources are handled by Blahut-Arimoto over the full group as
reproduction alphabet. Rates are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .distortion import d_crit, distortion_matrix
from .errors import NoConvergence, RangeError
from .measures import divergence, uniform

__all__ = [
    "RDPoint",
    "RDCurve",
    "BAResult",
    "bessel_i",
    "bessel_i_scaled",
    "partition_function",
    "log_partition_function",
    "uniform_rd_point",
    "uniform_rate_at",
    "blahut_arimoto",
    "blahut_arimoto_many",
    "rd_curve",
    "sandwich_check",
    "beta_grid",
    "parse_beta_grid",
    "interpolate_rate",
]

BESSEL_SERIES_MAX = 30.0
BESSEL_MAX_ARG = 700.0


@dataclass(frozen=True)
class RDPoint:
    beta: float
    delta: float
    rate: float


@dataclass
class RDCurve:
    points: list
    source: dict = field(default_factory=dict)

    @property
    def betas(self):
        return np.array([p.beta for p in self.points])

    @property
    def deltas(self):
        return np.array([p.delta for p in self.points])

    @property
    def rates(self):
        return np.array([p.rate for p in self.points])

    def is_convex(self, tol=1e-9):
        """Slopes between consecutive points (ordered by delta) are nondecreasing."""
        d, r = self.deltas, self.rates
        order = np.argsort(d)
        d, r = d[order], r[order]
        keep = np.concatenate([[True], np.diff(d) > 1e-12])
        d, r = d[keep], r[keep]
        if len(d) < 3:
            return True
        slopes = np.diff(r) / np.diff(d)
        return bool(np.all(np.diff(slopes) >= -tol * np.maximum(1.0, np.abs(slopes[1:]))))


# -- modified Bessel functions ------------------------------------------------

def _bessel_series(j, x):
    if x == 0.0:
        return 1.0 if j == 0 else 0.0
    half = x / 2.0
    term = half**j / math.factorial(j)
    total = term
    m = 0
    q = half * half
    while True:
        m += 1
        term *= q / (m * (m + j))
        total += term
        if term <= 1e-17 * total:  # also stops when x/2 underflows
            return total


def _bessel_asymptotic_scaled(j, x):
    """``exp(-x) I_j(x)`` for large positive x."""
    mu = 4.0 * j * j
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(nxt) >= abs(term) or nxt == 0.0:
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total / math.sqrt(2 * math.pi * x)


def bessel_i_scaled(order, x):
    """``exp(-|x|) I_order(x)`` for order 0 or 1; no overflow limit."""
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are supported")
    x = float(x)
    sign = -1.0 if (order == 1 and x < 0) else 1.0
    ax = abs(x)
    if ax <= BESSEL_SERIES_MAX:
        val = _bessel_series(order, ax) * math.exp(-ax)
    else:
        val = _bessel_asymptotic_scaled(order, ax)
    return sign * val


def bessel_i(order, x):
    """Modified Bessel function of the first kind, orders 0 and 1.

    Power series up to ``|x| = 30``, the large-argument expansion beyond.
    """
    x = float(x)
    if abs(x) > BESSEL_MAX_ARG:
        raise RangeError(f"|x| = {abs(x)} exceeds {BESSEL_MAX_ARG}")
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are supported")
    if abs(x) <= BESSEL_SERIES_MAX:
        val = _bessel_series(order, abs(x))
        return -val if (order == 1 and x < 0) else val
    return bessel_i_scaled(order, x) * math.exp(abs(x))


# -- uniform source: partition function ---------------------------------------

def log_partition_function(spec, beta):
    beta = float(beta)
    if beta == 0.0:
        return 0.0
    if spec.kind == "so2":
        x = -2.0 * beta
        return 2.0 * beta + math.log(bessel_i_scaled(0, x)) + abs(x)
    if spec.is_circle:
        x = np.linspace(0, 2 * np.pi, 1 << 14, endpoint=False)
        return float(logsumexp(beta * spec.profile(x)) - math.log(len(x)))
    v = spec.profile_values()
    return float(logsumexp(beta * v) - math.log(len(v)))


def partition_function(spec, beta):
    """``Z(beta) = int exp(beta d0(g)) dU(g)``."""
    if spec.kind == "so2":
        return math.exp(2.0 * beta) * bessel_i(0, -2.0 * beta)
    return math.exp(log_partition_function(spec, beta))


def uniform_rd_point(spec, beta):
    """Point of the uniform source's rate-distortion curve at slope ``beta <= 0``."""
    beta = float(beta)
    if beta > 0:
        raise ValueError("beta must be <= 0")
    if spec.kind == "so2":
        if math.isinf(beta):
            return RDPoint(beta, 0.0, math.inf)
        x = -2.0 * beta
        i0 = bessel_i_scaled(0, x)
        i1 = bessel_i_scaled(1, x)
        delta = 2.0 - 2.0 * i1 / i0
        rate = beta * delta - math.log(i0)
        return RDPoint(beta, delta, max(rate, 0.0))
    if spec.is_circle:
        xs = np.linspace(0, 2 * np.pi, 1 << 14, endpoint=False)
        v = spec.profile(xs)
    else:
        v = spec.profile_values()
    if math.isinf(beta):
        mult = int(np.sum(v == v.min()))
        return RDPoint(beta, float(v.min()), math.log(len(v) / mult))
    w = beta * v
    lse = logsumexp(w)
    p = np.exp(w - lse)
    delta = float(p @ v)
    log_z = float(lse - math.log(len(v)))
    rate = beta * delta - log_z
    return RDPoint(beta, delta, max(rate, 0.0))


def uniform_rate_at(spec, delta):
    """R_U(delta), inverting the slope parametrization numerically."""
    if delta >= d_crit(spec):
        return 0.0
    if delta <= 0.0:
        return uniform_rd_point(spec, -math.inf).rate
    lo = -1.0
    while uniform_rd_point(spec, lo).delta > delta:
        lo *= 2.0
        if lo < -1e8:
            return uniform_rd_point(spec, -math.inf).rate
    b = brentq(lambda t: uniform_rd_point(spec, t).delta - delta, lo, 0.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return uniform_rd_point(spec, b).rate


# -- Blahut-Arimoto -----------------------------------------------------------

@dataclass
class BAResult:
    point: RDPoint
    kernel: np.ndarray  # kernel[i, j] = q(j | i)
    marginal: np.ndarray
    iterations: int
    gap: float  # certified bound on rate minus R_P(delta) at the returned point
    objective: list


BA_WARMUP = 300
# Newton steps below this size are rounding noise of the KKT solve
NEWTON_STALL = 1e-10


def _ba_batch(p, D, betas, tol, max_iter, gap_tol, r0=None):
    """Plain Blahut-Arimoto on a batch: ``p`` is (B, n), ``betas`` (B,), ``D`` (n, m).

    Returns a dict of per-instance arrays. ``iterations`` is -1 for instances
    that did not meet the stopping rule within ``max_iter``; ``r`` then holds
    their last marginal. ``trace`` is the objective of instance 0.
    """
    B, n = p.shape
    m = D.shape[1]
    A = np.exp(betas[:, None, None] * D[None, :, :])
    AD = A * D[None, :, :]
    r = np.full((B, m), 1.0 / m) if r0 is None else np.array(r0, dtype=float)
    prev_rate = np.full(B, np.inf)
    prev_delta = np.full(B, np.inf)
    out = {
        "delta": np.full(B, np.nan),
        "rate": np.full(B, np.nan),
        "gap": np.full(B, np.inf),
        "iterations": np.full(B, -1),
        "r_kernel": np.zeros((B, m)),
        "change": np.full(B, np.inf),
    }
    active = np.ones(B, dtype=bool)
    trace = []
    for it in range(1, max_iter + 1):
        c = np.matmul(A, r[:, :, None])[:, :, 0]
        w = p / c
        g = np.matmul(w[:, None, :], A)[:, 0, :]
        log_c = np.log(c)
        trace.append(float(-p[0] @ log_c[0]))
        delta = np.sum(r * np.matmul(w[:, None, :], AD)[:, 0, :], axis=1)
        r_new = r * g
        with np.errstate(divide="ignore", invalid="ignore"):
            log_g = np.log(g)
            mi = np.where(r_new > 0, r_new * log_g, 0.0).sum(axis=1)
        rate = np.maximum(betas * delta - mi - np.sum(p * log_c, axis=1), 0.0)
        gap = np.max(log_g, axis=1)
        change = np.maximum(np.abs(rate - prev_rate), np.abs(delta - prev_delta))
        done = active & (change < tol)
        if gap_tol is not None:
            done &= gap < gap_tol
        if done.any():
            out["delta"][done] = delta[done]
            out["rate"][done] = rate[done]
            out["gap"][done] = np.maximum(gap[done], 0.0)
            out["iterations"][done] = it
            out["r_kernel"][done] = r[done]
            active &= ~done
        out["change"] = np.where(active, change, out["change"])
        prev_rate, prev_delta = rate, delta
        r = np.where(active[:, None], r_new / r_new.sum(axis=1, keepdims=True), r)
        if not active.any():
            break
    out["r"] = r
    out["trace"] = trace
    return out


def _point_from_marginal(p, A, D, beta, r):
    """(delta, rate, gap) of the BA step taken from reproduction marginal ``r``."""
    c = A @ r
    w = p / c
    g = A.T @ w
    delta = float(r @ ((A * D).T @ w))
    r_new = r * g
    with np.errstate(divide="ignore"):
        log_g = np.log(g)
    pos = r_new > 0
    rate = beta * delta - float(r_new[pos] @ log_g[pos]) - float(p @ np.log(c))
    return delta, max(rate, 0.0), max(float(np.max(log_g)), 0.0)


def _newton_polish(p, A, r0, gap_tol, max_steps=500):
    """Minimize ``-sum_i p_i log (A r)_i`` over the simplex by active-set Newton.

    Starts from a BA iterate; returns the marginal once the duality gap
    ``log max_j (A^T (p / A r))_j`` is below ``gap_tol``, else None.
    """
    m = A.shape[1]
    r = r0.copy()
    support = r > 1e-12 * r.max()
    r[~support] = 0.0
    r /= r.sum()

    def objective(x):
        return -float(p @ np.log(A @ x))

    f = objective(r)
    # once certified, a few more steps settle delta; ill-conditioned KKT
    # systems leave step noise well above 1e-14 that never goes away
    certified = stalls = 0
    for _ in range(max_steps):
        c = A @ r
        w = p / c
        g = A.T @ w
        gap = float(np.log(np.max(g)))
        if gap < gap_tol:
            certified += 1
            if certified > 3:
                return r
        idx = np.flatnonzero(support)
        k = len(idx)
        H = (A[:, idx] * (w / c)[:, None]).T @ A[:, idx]
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = H
        K[:k, k] = 1.0
        K[k, :k] = 1.0
        rhs = np.concatenate([g[idx], [0.0]])
        d = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
        slope = max(float(d @ H @ d), 0.0)  # equals g.d when sum(d) = 0
        if np.max(np.abs(d)) < NEWTON_STALL:
            # the face is solved; take the tiny step, then test the certificate
            r = r.copy()
            r[idx] = np.maximum(r[idx] + d, 0.0)
            r /= r.sum()
            f = objective(r)
            g = A.T @ (p / (A @ r))
            gap = float(np.log(np.max(g)))
            if gap < gap_tol:
                return r
            outside = np.flatnonzero(~support)
            if len(outside):
                j = outside[np.argmax(g[outside])]
                if g[j] > 1.0:
                    support[j] = True
                    continue
            # stationarity needs g = 1 on the support; drop the worst violator
            lo = idx[np.argmin(g[idx])]
            if k > 1 and g[lo] < 1.0 - 1e-12:
                r[lo] = 0.0
                support[lo] = False
                r /= r.sum()
                f = objective(r)
                continue
            stalls += 1
            if stalls > 5:
                return None
            continue
        neg = d < 0
        t_max = float(np.min(-r[idx][neg] / d[neg])) if neg.any() else np.inf
        t = min(1.0, t_max)
        while True:
            trial = r.copy()
            trial[idx] = np.maximum(r[idx] + t * d, 0.0)
            trial /= trial.sum()
            f_new = objective(trial)
            # below ~1e-10 the decrease is lost in the rounding of f
            if slope < 1e-10 or f_new <= f - 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if t == t_max:
            hit = idx[np.argmin(np.where(neg, -r[idx] / np.where(neg, d, -1.0), np.inf))]
            trial[hit] = 0.0
            support[hit] = False
            trial /= trial.sum()
            f_new = objective(trial)
        r, f = trial, f_new
    c = A @ r
    return r if float(np.log(np.max(A.T @ (p / c)))) < gap_tol else None


def _solve_many(masses, D, betas, tol, max_iter, gap_tol, accelerate):
    if not accelerate:
        out = _ba_batch(masses, D, betas, tol, max_iter, gap_tol)
        return out
    out = _ba_batch(masses, D, betas, tol, min(max_iter, BA_WARMUP), None)
    target = 1e-10 if gap_tol is None else gap_tol
    for b in range(len(betas)):
        if out["iterations"][b] > 0 and out["gap"][b] < target:
            continue
        A = np.exp(betas[b] * D)
        start = out["r_kernel"][b] if out["iterations"][b] > 0 else out["r"][b]
        r = _newton_polish(masses[b], A, start, target)
        if r is None:
            # rare degenerate faces: finish with plain iterations from the warm start
            rest = _ba_batch(masses[b:b + 1], D, betas[b:b + 1], tol, max(max_iter - BA_WARMUP, 1),
                             target, r0=out["r"][b:b + 1])
            for key in ("delta", "rate", "gap", "r_kernel", "r", "change"):
                out[key][b] = rest[key][0]
            out["iterations"][b] = rest["iterations"][0] + BA_WARMUP if rest["iterations"][0] > 0 else -1
            continue
        delta, rate, gap = _point_from_marginal(masses[b], A, D, betas[b], r)
        out["delta"][b], out["rate"][b], out["gap"][b] = delta, rate, gap
        out["r_kernel"][b] = r
        out["r"][b] = r
        out["iterations"][b] = max(out["iterations"][b], BA_WARMUP)
    return out


def _kernel(D, beta, r):
    q = np.exp(beta * D) * r[None, :]
    return q / q.sum(axis=1, keepdims=True)


def blahut_arimoto(P, spec, beta, tol=1e-10, max_iter=100_000, gap_tol=None, track=False,
                   accelerate=True):
    """Rate-distortion point of source ``P`` at slope ``beta <= 0``.

    Alternates ``q(j|i) ∝ r_j exp(beta d(i, j))`` and ``r_j = sum_i P_i q(j|i)``
    starting from the uniform reproduction marginal, and stops once rate and
    distortion both change by less than ``tol``.

    The BA fixed point minimizes ``-sum_i P_i log sum_j r_j exp(beta d(i, j))``
    over marginals ``r``. With ``accelerate`` (default) instances that have not
    settled after a short warm-up are finished by a Newton solve of that
    problem; the result is accepted only when the duality gap
    ``log max_j c_j`` is below ``gap_tol`` (1e-10 by default). The returned
    rate exceeds ``R_P(delta)`` by at most ``gap``.

    ``track=True`` records the objective per plain iteration; it never
    increases.
    """
    if beta > 0:
        raise ValueError("beta must be <= 0")
    D = distortion_matrix(spec)
    if track:
        accelerate = False
    out = _solve_many(P.mass[None, :], D, np.array([float(beta)]), tol, max_iter, gap_tol, accelerate)
    if out["iterations"][0] < 0:
        raise NoConvergence(float(out["change"][0]), float(beta))
    return BAResult(
        RDPoint(float(beta), float(out["delta"][0]), float(out["rate"][0])),
        _kernel(D, float(beta), out["r_kernel"][0]),
        out["r"][0],
        int(out["iterations"][0]),
        float(out["gap"][0]),
        out["trace"] if track else [],
    )


def blahut_arimoto_many(masses, spec, betas, tol=1e-10, max_iter=100_000, gap_tol=None,
                        accelerate=True):
    """Blahut-Arimoto over many (source, slope) pairs on one group.

    ``masses`` is (B, order) and ``betas`` (B,). Returns a list of
    :class:`RDPoint` and the array of certified gaps. Raises
    :class:`NoConvergence` naming the first stalled slope.
    """
    masses = np.atleast_2d(np.asarray(masses, dtype=float))
    betas = np.broadcast_to(np.asarray(betas, dtype=float), (masses.shape[0],)).copy()
    if np.any(betas > 0):
        raise ValueError("beta must be <= 0")
    D = distortion_matrix(spec)
    out = _solve_many(masses, D, betas, tol, max_iter, gap_tol, accelerate)
    bad = np.flatnonzero(out["iterations"] < 0)
    if len(bad):
        raise NoConvergence(float(out["change"][bad[0]]), float(betas[bad[0]]))
    points = [RDPoint(float(b), float(d), float(r)) for b, d, r in zip(betas, out["delta"], out["rate"])]
    return points, out["gap"]


def _is_uniform(P, tol=1e-12):
    return bool(np.max(np.abs(P.mass - 1.0 / len(P.mass))) <= tol)


def rd_curve(P, spec, betas, tol=1e-10, max_iter=100_000, closed_form=True):
    """Rate-distortion curve traced over a grid of slopes.

    The uniform source uses the closed form unless ``closed_form`` is False;
    any other source is solved by Blahut-Arimoto per slope.
    """
    betas = np.asarray(betas, dtype=float)
    if np.any(betas > 0):
        raise ValueError("all beta must be <= 0")
    use_closed = closed_form and (P is None or _is_uniform(P))
    if use_closed:
        points = [uniform_rd_point(spec, b) for b in betas]
    else:
        masses = np.repeat(P.mass[None, :], len(betas), axis=0)
        points, _ = blahut_arimoto_many(masses, spec, betas, tol=tol, max_iter=max_iter)
    source = {"spec": spec.kind, "order": None if spec.is_circle else spec.group.order,
              "uniform": use_closed}
    return RDCurve(points, source)


def interpolate_rate(curve, delta):
    """Piecewise-linear rate of a curve at ``delta`` (clamped to its range)."""
    d, r = curve.deltas, curve.rates
    order = np.argsort(d)
    return np.interp(delta, d[order], r[order])


def sandwich_check(P, spec, betas, eps=1e-6, tol=1e-10, gap_tol=1e-7):
    """Check ``R_U - D(P||U) <= R_P <= R_U`` at the BA points of ``P``.

    ``R_U`` is evaluated exactly at each distortion reached by ``P``. The
    upper inequality uses the certified lower end ``rate - gap`` of the BA
    estimate. Violations are reported, not raised.
    """
    D = divergence(P, uniform(P.group))
    betas = np.asarray(betas, dtype=float)
    masses = np.repeat(P.mass[None, :], len(betas), axis=0)
    points, gaps = blahut_arimoto_many(masses, spec, betas, tol=tol, gap_tol=gap_tol)
    rows = []
    violations = []
    for pt, gap in zip(points, gaps):
        ru = uniform_rate_at(spec, pt.delta)
        row = {"beta": pt.beta, "delta": pt.delta, "rate_P": pt.rate, "rate_U": ru,
               "lower": ru - D, "gap": float(gap)}
        rows.append(row)
        if pt.rate < max(0.0, ru - D) - eps or pt.rate - gap > ru + eps:
            violations.append(row)
    return {"divergence": D, "rows": rows, "violations": violations, "eps": eps}


# -- grids --------------------------------------------------------------------

def beta_grid(lo, hi, count, spacing="log", include_zero=None):
    """Slope grid on ``[lo, hi]`` with ``lo < hi <= 0``.

    Log spacing cannot reach 0; when ``hi == 0`` it spans ``lo`` to
    ``lo * 1e-4`` and, if ``include_zero`` (default: True for ``hi == 0``),
    replaces the last point by 0 so the curve ends at ``(d_crit, 0)``.
    """
    if not lo < hi <= 0:
        raise ValueError("need lo < hi <= 0")
    if count < 1:
        raise ValueError("count must be positive")
    if spacing == "linear":
        return np.linspace(lo, hi, count)
    if spacing != "log":
        raise ValueError(f"unknown spacing {spacing!r}")
    if include_zero is None:
        include_zero = hi == 0
    top = hi if hi < 0 else lo * 1e-4
    if include_zero and hi == 0:
        if count == 1:
            return np.array([0.0])
        return np.concatenate([_log_points(lo, top, count - 1), [0.0]])
    return _log_points(lo, top, count)


def _log_points(lo, top, count):
    g = -np.logspace(math.log10(-lo), math.log10(-top), count)
    g[0] = lo
    if count > 1:
        g[-1] = top
    return g


def parse_beta_grid(text):
    """``log:-20..0:40`` or ``linear:-5..-0.1:20``."""
    try:
        spacing, rest = text.split(":", 1)
        rng, count = rest.rsplit(":", 1)
        lo, hi = rng.split("..")
        return beta_grid(float(lo), float(hi), int(count), spacing)
    except ValueError as exc:
        raise ValueError(f"cannot parse beta grid {text!r}: {exc}") from None


def rate_bounds(spec):
    """(0, zero-distortion rate) for the uniform source."""
    return 0.0, uniform_rd_point(spec, -math.inf).rate

