"""Probability distributions on finite groups.

All divergences are in nats. Convolution follows
``(P*Q)(g) = sum_h P(g h^-1) Q(h)``, so that ``delta_a * delta_b = delta_{ab}``
and ``translate(g, P) = delta_g * P``.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import GroupMismatch, InfiniteTerm
from .groups import FiniteGroup, Subgroup, left_coset, subgroup_closure

__all__ = [
    "GroupDistribution",
    "uniform",
    "point_mass",
    "uniform_on",
    "divergence",
    "entropy",
    "total_variation",
    "convolve",
    "translate",
    "n_fold",
    "haar_check",
    "uniform_on_coset",
    "compensation_identity_residual",
    "support",
    "density",
    "distribution_to_json",
    "distribution_from_json",
    "RENORM_TOL",
    "EQUAL_TOL",
]

RENORM_TOL = 1e-12
EQUAL_TOL = 1e-10
# cyclic convolutions switch to FFT above this order
_FFT_THRESHOLD = 256


class GroupDistribution:
    """Probability mass function on the elements of a finite group.

    Mass is renormalized at construction; entries must be non-negative.
    """

    __slots__ = ("group", "mass")

    def __init__(self, group: FiniteGroup, mass):
        m = np.array(mass, dtype=float)
        if m.shape != (group.order,):
            raise ValueError(f"mass must have length {group.order}, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("mass entries must be finite")
        if np.any(m < 0):
            raise ValueError(f"negative mass {m.min():.3e}")
        total = m.sum()
        if total <= 0:
            raise ValueError("mass sums to zero")
        if abs(total - 1.0) > RENORM_TOL:
            m = m / total
        m.setflags(write=False)
        self.group = group
        self.mass = m

    def __repr__(self):
        return f"GroupDistribution({self.group!r}, {np.array2string(self.mass, precision=4)})"

    def __len__(self):
        return self.group.order

    def allclose(self, other, tol=EQUAL_TOL):
        _same_group(self, other)
        return bool(np.max(np.abs(self.mass - other.mass)) <= tol)


def _same_group(P, Q):
    if P.group is not Q.group:
        if P.group.order != Q.group.order or not np.array_equal(P.group.table, Q.group.table):
            raise GroupMismatch(f"{P.group!r} vs {Q.group!r}")


def uniform(G):
    return GroupDistribution(G, np.full(G.order, 1.0 / G.order))


def point_mass(G, g):
    m = np.zeros(G.order)
    m[g] = 1.0
    return GroupDistribution(G, m)


def uniform_on(G, elements):
    elements = sorted({int(e) for e in elements})
    m = np.zeros(G.order)
    m[elements] = 1.0 / len(elements)
    return GroupDistribution(G, m)


def support(P):
    return tuple(int(i) for i in np.flatnonzero(P.mass > 0))


def density(P):
    """Radon-Nikodym derivative dP/dU as an array."""
    return P.group.order * P.mass


def _kl(p, q):
    # Bregman form sum q*((1+u)log1p(u) - u), u = p/q - 1: equal to sum p log(p/q)
    # for normalized p, q, but every term is >= 0 and stays accurate as p -> q.
    pos = p > 0
    if np.any(q[pos] <= 0):
        return np.inf
    both = pos & (q > 0)
    pb, qb = p[both], q[both]
    u = (pb - qb) / qb
    near = np.abs(u) < 0.5
    terms = np.empty_like(u)
    terms[near] = qb[near] * ((1 + u[near]) * np.log1p(u[near]) - u[near])
    far = ~near
    terms[far] = pb[far] * np.log(pb[far] / qb[far]) - pb[far] + qb[far]
    # q-only entries contribute q each (the p = 0 limit of the term)
    missing = np.sum(q[(q > 0) & ~pos])
    return float(np.sum(terms) + missing)


def divergence(P, Q):
    """Information divergence D(P||Q) in nats; ``inf`` without absolute continuity."""
    _same_group(P, Q)
    return _kl(P.mass, Q.mass)


def entropy(P):
    p = P.mass[P.mass > 0]
    return float(-np.sum(p * np.log(p)))


def total_variation(P, Q):
    """Variation norm sum |P - Q|, in [0, 2]."""
    _same_group(P, Q)
    return float(np.sum(np.abs(P.mass - Q.mass)))


def _convolve_mass(G, p, q):
    if G.cyclic and G.order > _FFT_THRESHOLD:
        out = np.fft.irfft(np.fft.rfft(p) * np.fft.rfft(q), n=G.order)
        return np.clip(out, 0.0, None)
    # (P*Q)(g) = sum over pairs (a, h) with a*h = g of P(a)Q(h)
    return np.bincount(G.table.ravel(), weights=np.outer(p, q).ravel(), minlength=G.order)


def convolve(P, Q):
    _same_group(P, Q)
    return GroupDistribution(P.group, _convolve_mass(P.group, P.mass, Q.mass))


def translate(g, P):
    """Left translation ``g*P``."""
    G = P.group
    m = np.zeros(G.order)
    for h in range(G.order):
        m[G.mul(g, h)] = P.mass[h]
    return GroupDistribution(G, m)


def right_translate(P, g):
    G = P.group
    m = np.zeros(G.order)
    for h in range(G.order):
        m[G.mul(h, g)] = P.mass[h]
    return GroupDistribution(G, m)


def n_fold(P, n):
    """n-fold convolution power by repeated squaring."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    result = None
    base = P
    while n:
        if n & 1:
            result = base if result is None else convolve(result, base)
        n >>= 1
        if n:
            base = convolve(base, base)
    return result


def haar_check(P, tol=EQUAL_TOL):
    """Decide whether ``P`` is the Haar measure.

    Translation invariance is the test. Idempotency plus full support is
    evaluated too; ``equivalent`` reports whether both verdicts agree.
    """
    G = P.group
    evidence = None
    invariant = True
    for g in range(G.order):
        if not translate(g, P).allclose(P, tol):
            invariant = False
            evidence = f"translation by {G.label(g)} changes P"
            break
    full = bool(np.all(P.mass > tol / G.order))
    idem = convolve(P, P).allclose(P, tol)
    equiv = idem and full
    if evidence is None and not equiv:
        evidence = "not idempotent" if not idem else "no full support"
    return {
        "is_haar": invariant,
        "evidence": evidence,
        "idempotent": idem,
        "full_support": full,
        "equivalent": invariant == equiv,
    }


def uniform_on_coset(G, F: Subgroup, rep):
    return uniform_on(G, left_coset(G, rep, F))


def compensation_identity_residual(family, weights, reference=None):
    """|LHS - RHS| of the compensation identity for a mixture.

    ``family`` is a list of distributions ``P_x`` on one group, ``weights``
    the mixing distribution over their indices and ``reference`` the measure
    all divergences are taken against (the uniform distribution by default)::

        sum_x w_x D(P_x||R) = D(M||R) + sum_x w_x D(P_x||M),  M = sum_x w_x P_x
    """
    w = np.asarray(weights, dtype=float)
    if len(family) != len(w):
        raise ValueError("weights length must match family size")
    w = w / w.sum()
    for P in family[1:]:
        _same_group(family[0], P)
    G = family[0].group
    if reference is None:
        U = np.full(G.order, 1.0 / G.order)
    else:
        _same_group(family[0], reference)
        U = reference.mass
    mix = sum(wi * P.mass for wi, P in zip(w, family))
    live = w > 0
    lhs_terms = np.array([_kl(P.mass, U) for P in family])
    to_mix = np.array([_kl(P.mass, mix) for P in family])
    if not np.all(np.isfinite(lhs_terms[live])) or not np.all(np.isfinite(to_mix[live])):
        raise InfiniteTerm("a divergence term is infinite")
    lhs = float(np.sum(w[live] * lhs_terms[live]))
    rhs = _kl(mix, U) + float(np.sum(w[live] * to_mix[live]))
    return abs(lhs - rhs)


def idempotent_subgroup(P, tol=EQUAL_TOL):
    """For idempotent ``P``, the subgroup generated by its support."""
    if not convolve(P, P).allclose(P, tol):
        return None
    return subgroup_closure(P.group, support(P))


def distribution_to_json(P, group_ref=None):
    return json.dumps({"group_ref": group_ref or P.group.name, "mass": P.mass.tolist()})


def distribution_from_json(text, group):
    doc = json.loads(text) if isinstance(text, str) else text
    return GroupDistribution(group, doc["mass"])
