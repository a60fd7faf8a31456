"""Convergence of convolution powers P^{*n} to the Haar measure.

Tracks divergence, total variation, transport distance and minimum density
along the walk, detects subgroup/coset obstructions, fits exponential decay
rates and checks the quantitative bounds that drive the convergence proofs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circle import divergence_exact, divergence_quadratic, n_fold_fourier
from .errors import InsufficientData, PreconditionFailed
from .groups import Subgroup, subgroup_closure
from .measures import (
    convolve,
    density,
    divergence,
    support,
    total_variation,
    uniform,
)
from .distortion import transport_distance
from .ratedist import blahut_arimoto_many, uniform_rate_at

__all__ = [
    "ConvergenceSeries",
    "ObstructionReport",
    "detect_obstruction",
    "support_period",
    "run_series",
    "run_series_fourier",
    "fit_rate",
    "decay_bound_check",
    "one_bit_floor_check",
    "pointwise_density_check",
    "rd_convergence_check",
    "ONE_BIT",
]

ONE_BIT = math.log(2.0)
DECAY_SLACK = 1e-12
FIT_FLOOR = 1e-20


@dataclass
class ConvergenceSeries:
    n_values: np.ndarray
    divergence: np.ndarray
    tv: Optional[np.ndarray] = None
    transport: Optional[np.ndarray] = None
    min_density: Optional[np.ndarray] = None
    quadratic: Optional[np.ndarray] = None
    supports: list = field(default_factory=list)

    def __len__(self):
        return len(self.n_values)

    def columns(self):
        cols = {"n": self.n_values, "divergence_nats": self.divergence}
        for name in ("tv", "transport", "min_density", "quadratic"):
            val = getattr(self, name)
            if val is not None:
                cols["divergence_quadratic" if name == "quadratic" else name] = val
        return cols


@dataclass(frozen=True)
class ObstructionReport:
    verdict: str  # converges | subgroup_supported | coset_supported
    subgroup: Optional[Subgroup] = None
    coset_rep: Optional[int] = None
    period: Optional[int] = None

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "subgroup": None if self.subgroup is None else list(self.subgroup.members),
            "coset_rep": self.coset_rep,
            "period": self.period,
        }


def _next_support(G, current, step):
    return frozenset(G.mul(a, b) for a in current for b in step)


def support_period(P, cap=None):
    """Cycle length of the support sequence supp(P^{*n})."""
    G = P.group
    S = frozenset(support(P))
    cap = cap or 4 * G.order + 10
    seen = {}
    cur = S
    for n in range(1, cap + 1):
        if cur in seen:
            return n - seen[cur]
        seen[cur] = n
        cur = _next_support(G, cur, S)
    raise RuntimeError("support sequence did not cycle")


def detect_obstruction(P):
    """Classify whether the support of P sits inside a coset of a proper subgroup."""
    G = P.group
    S = support(P)
    if not S:
        raise ValueError("empty support")
    x0 = S[0]
    x0_inv = G.inv(x0)
    F = subgroup_closure(G, [G.mul(x0_inv, s) for s in S])
    if F.is_whole():
        return ObstructionReport("converges")
    if x0 in F:
        return ObstructionReport("subgroup_supported", subgroup=F)
    if F.is_normal():
        period, x = 1, x0
        while x not in F:
            x = G.mul(x, x0)
            period += 1
    else:
        period = support_period(P)
    return ObstructionReport("coset_supported", subgroup=F, coset_rep=x0, period=period)


def run_series(P, N, spec=None):
    """Record divergence, TV, min density (and transport with ``spec``) for n = 1..N.

    Uses one convolution per step so every intermediate power is kept.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    G = P.group
    U = uniform(G)
    div, tv, mind, trans, supps = [], [], [], [], []
    Pn = P
    for n in range(1, N + 1):
        if n > 1:
            Pn = convolve(Pn, P)
        div.append(divergence(Pn, U))
        tv.append(total_variation(Pn, U))
        mind.append(float(np.min(density(Pn))))
        supps.append(support(Pn))
        if spec is not None:
            trans.append(transport_distance(Pn, U, spec)["value"])
    return ConvergenceSeries(
        n_values=np.arange(1, N + 1),
        divergence=np.array(div),
        tv=np.array(tv),
        transport=np.array(trans) if spec is not None else None,
        min_density=np.array(mind),
        supports=supps,
    )


def run_series_fourier(A, N):
    """Exact and quadratic divergence of the n-fold powers of a circle density."""
    exact, quad = [], []
    for n in range(1, N + 1):
        An = n_fold_fourier(A, n)
        exact.append(divergence_exact(An))
        quad.append(divergence_quadratic(An))
    return ConvergenceSeries(np.arange(1, N + 1), np.array(exact), quadratic=np.array(quad))


def fit_rate(series, burn_in=1, last=None, floor=FIT_FLOOR):
    """Least-squares fit of ``log D_n = a + n log rho`` over ``burn_in <= n <= last``.

    Entries at or below ``floor`` are dropped; that is where double precision
    leaves nothing but rounding in a divergence.
    """
    n = np.asarray(series.n_values, dtype=float)
    d = np.asarray(series.divergence, dtype=float)
    mask = n >= burn_in
    if last is not None:
        mask &= n <= last
    pos = mask & (d > floor)
    if pos.sum() < 5:
        raise InsufficientData(f"{int(pos.sum())} usable points after burn-in {burn_in}")
    x, y = n[pos], np.log(d[pos])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    rho = math.exp(slope)
    return {"rho": rho, "r2": r2, "no_decay": rho > 1.0 - 1e-9, "points": int(pos.sum())}


def decay_bound_check(P, N, slack=DECAY_SLACK):
    """Compare D(P^{*n}) with ``(1 - c)^(n-1) D(P)`` where ``c = min dP/dU``."""
    c = float(np.min(density(P)))
    if c <= 0:
        raise PreconditionFailed("min density is 0; the decay bound is vacuous")
    c = min(c, 1.0)
    series = run_series(P, N)
    d1 = series.divergence[0]
    bound = np.array([(1.0 - c) ** (n - 1) * d1 for n in series.n_values])
    margin = bound + slack - series.divergence
    return {
        "c": c,
        "n": series.n_values,
        "divergence": series.divergence,
        "bound": bound,
        "margin": margin,
        "holds": bool(np.all(margin >= 0)),
    }


def _one_bit_floor(f):
    """Best proof floor ``2 eps^2 (U{f > eps} - 1/2)`` over eps in (0, max f].

    The floor only jumps at attained density values v; approaching v from
    below gives ``2 v^2 (U{f >= v} - 1/2)``, which is the supremum.
    """
    best, best_eps = 0.0, 0.0
    for v in np.unique(f[f > 0]):
        val = 2.0 * v * v * (np.mean(f >= v) - 0.5)
        if val > best:
            best, best_eps = val, float(v)
    return best, best_eps


def one_bit_floor_check(P):
    """Lower bound on d(P*P)/dU when D(P||U) is below one bit."""
    D = divergence(P, uniform(P.group))
    f = density(P)
    floor, eps = _one_bit_floor(f)
    min_pp = float(np.min(density(convolve(P, P))))
    report = {
        "D_nats": D,
        "floor": floor,
        "eps": eps,
        "min_density_PP": min_pp,
        "holds": bool(floor > 0 and min_pp >= floor * (1 - 1e-12)),
    }
    if D >= ONE_BIT - 1e-12:
        raise PreconditionFailed(f"D = {D:.6f} nats is not below one bit", report)
    return report


def pointwise_density_check(P, N, eps):
    """Fraction of elements with |dP^{*n}/dU - 1| >= eps against the bound TV / eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    U = uniform(P.group)
    rows = []
    Pn = P
    for n in range(1, N + 1):
        if n > 1:
            Pn = convolve(Pn, P)
        frac = float(np.mean(np.abs(density(Pn) - 1.0) >= eps))
        tv = total_variation(Pn, U)
        rows.append({"n": n, "fraction": frac, "tv": tv, "bound": tv / eps,
                     "holds": frac <= tv / eps + 1e-15})
    return {"rows": rows, "holds": all(r["holds"] for r in rows)}


def rd_convergence_check(P, spec, betas, n_list, eps=1e-6):
    """Sup over the slope grid of |R_{P^{*n}}(delta) - R_U(delta)| for each n."""
    betas = np.asarray(betas, dtype=float)
    U = uniform(P.group)
    rows = []
    cache = {1: P}
    for n in sorted(n_list):
        Pn = _power(P, n, cache)
        D = divergence(Pn, U)
        masses = np.repeat(Pn.mass[None, :], len(betas), axis=0)
        points, gaps = blahut_arimoto_many(masses, spec, betas)
        diffs = [abs(pt.rate - uniform_rate_at(spec, pt.delta)) for pt in points]
        sup_gap = float(max(diffs))
        rows.append({"n": n, "sup_gap": sup_gap, "divergence": D,
                     "within_sandwich": sup_gap <= D + eps + float(np.max(gaps))})
    return {"verdict": detect_obstruction(P).verdict, "rows": rows}


def _power(P, n, cache):
    if n in cache:
        return cache[n]
    k = max(m for m in cache if m <= n)
    Q = cache[k]
    while k < n:
        Q = convolve(Q, P)
        k += 1
        cache[k] = Q
    return Q

