"""Right-invariant distortion functions and the transport distance d(P, Q).

A right-invariant distortion is fixed by its profile ``d0(g) = d(g, e)``
through ``d(x, y) = d0(x * y^-1)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .errors import ProfileInvalid, SizeLimit
from .groups import FiniteGroup
from .measures import _same_group

__all__ = [
    "DistortionSpec",
    "Coupling",
    "so2_distortion",
    "so2_spec",
    "table_spec",
    "cosine_spec",
    "distortion_matrix",
    "d_max",
    "d_crit",
    "transport_distance",
    "profile_from_json",
    "parse_profile",
    "TRANSPORT_MAX_ORDER",
]

TRANSPORT_MAX_ORDER = 256
_CIRCLE_GRID = 1 << 14
# the HiGHS default of 1e-7 would let tiny masses go untransported
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def so2_distortion(x, y):
    """Squared Euclidean distance between angles on the unit circle, ``2 - 2cos(x - y)``."""
    return 2.0 - 2.0 * np.cos(np.mod(np.asarray(x) - np.asarray(y), 2 * np.pi))


@dataclass(frozen=True)
class DistortionSpec:
    """Distortion on a finite group (``group`` set, ``profile`` an array) or on
    SO(2) (``group`` is None, ``profile`` a function of the angle)."""

    group: Optional[FiniteGroup]
    profile: object
    kind: str = "table"

    @property
    def is_circle(self):
        return self.group is None

    def d0(self, g):
        if self.is_circle:
            return self.profile(g)
        return float(self.profile[g])

    def profile_values(self):
        if self.is_circle:
            raise TypeError("circle distortion has no finite profile")
        return np.asarray(self.profile, dtype=float)


@dataclass(frozen=True)
class Coupling:
    joint: np.ndarray
    cost: float


def so2_spec():
    return DistortionSpec(None, lambda x: so2_distortion(x, 0.0), kind="so2")


def table_spec(G, values):
    v = np.array(values, dtype=float)
    if v.shape != (G.order,):
        raise ProfileInvalid(f"profile must have {G.order} values, got {v.shape}")
    v.setflags(write=False)
    spec = DistortionSpec(G, v, kind="table")
    _validate(spec)
    return spec


def cosine_spec(G):
    """Profile ``2 - 2cos(2 pi k / n)`` on a cyclic group: SO(2) restricted to Z_n."""
    if not G.cyclic:
        raise ProfileInvalid("cosine profile is defined for cyclic groups only")
    k = np.arange(G.order)
    v = 2.0 - 2.0 * np.cos(2 * np.pi * k / G.order)
    v[0] = 0.0
    v.setflags(write=False)
    spec = DistortionSpec(G, v, kind="cosine")
    _validate(spec)
    return spec


def _validate(spec):
    v = spec.profile_values()
    e = spec.group.identity
    if v[e] != 0:
        raise ProfileInvalid(f"d0(e) = {v[e]} must be 0")
    others = np.delete(v, e)
    if np.any(others <= 0):
        raise ProfileInvalid("d0(g) must be positive for g != e")


def distortion_matrix(spec):
    """``M[i, j] = d0(g_i * g_j^-1)``."""
    if spec.is_circle:
        raise TypeError("distortion_matrix needs a finite-group spec")
    _validate(spec)
    G = spec.group
    v = spec.profile_values()
    idx = G.table[:, G.inverse]  # idx[i, j] = g_i * g_j^-1
    return v[idx]


def d_max(spec):
    if spec.kind == "so2":
        return 4.0
    if spec.is_circle:
        x = np.linspace(0, 2 * np.pi, _CIRCLE_GRID, endpoint=False)
        return float(np.max(spec.profile(x)))
    return float(np.max(spec.profile_values()))


def d_crit(spec):
    """Mean of the profile under the uniform distribution."""
    if spec.kind == "so2":
        return 2.0
    if spec.is_circle:
        x = np.linspace(0, 2 * np.pi, _CIRCLE_GRID, endpoint=False)
        return float(np.mean(spec.profile(x)))
    return float(np.mean(spec.profile_values()))


def _transport_lp(cost, p, q):
    n, m = cost.shape
    rows = np.concatenate([np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)])
    cols = np.concatenate([np.arange(n * m), np.arange(n * m)])
    A = coo_matrix((np.ones(2 * n * m), (rows, cols)), shape=(n + m, n * m)).tocsr()
    b = np.concatenate([p, q])
    res = linprog(cost.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs", options=_LP_OPTIONS)
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return np.clip(res.x.reshape(n, m), 0.0, None), float(res.fun)


def transport_distance(P, Q, spec):
    """Minimal expected distortion over couplings of P and Q, solved exactly."""
    _same_group(P, Q)
    G = P.group
    if G.order > TRANSPORT_MAX_ORDER:
        raise SizeLimit(f"order {G.order} exceeds exact transport bound {TRANSPORT_MAX_ORDER}")
    cost = distortion_matrix(spec)
    joint, value = _transport_lp(cost, P.mass, Q.mass)
    value = max(value, 0.0)
    return {"value": value, "coupling": Coupling(joint, float(np.sum(joint * cost)))}


def profile_from_json(text, G):
    doc = json.loads(text) if isinstance(text, str) else text
    kind = doc.get("type", "table")
    if kind == "cosine":
        return cosine_spec(G)
    if kind == "table":
        return table_spec(G, doc["values"])
    raise ProfileInvalid(f"unknown profile type {kind!r}")


def parse_profile(text, G):
    """``cosine`` / ``hamming`` / ``table:0,1,...``."""
    text = text.strip()
    if text == "cosine":
        return cosine_spec(G)
    if text == "hamming":
        v = np.ones(G.order)
        v[G.identity] = 0.0
        return table_spec(G, v)
    if text.startswith("table:"):
        return table_spec(G, [float(t) for t in text[6:].split(",")])
    raise ProfileInvalid(f"cannot parse profile {text!r}")
