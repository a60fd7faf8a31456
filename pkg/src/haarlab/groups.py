"""Finite groups given by Cayley tables, subgroups, cosets and group actions.

Elements are the dense indices ``0..order-1``. ``table[i, j]`` is the index of
``g_i * g_j``. The identity is discovered from the table, never assumed to be
index 0.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import NotAGroup, UnsupportedSize

__all__ = [
    "FiniteGroup",
    "Subgroup",
    "GroupAction",
    "build_group",
    "builtin_group",
    "cyclic",
    "dihedral",
    "symmetric",
    "cube_rotations",
    "subgroup_closure",
    "coset_analysis",
    "invariant_distributions",
    "group_to_json",
    "group_from_json",
    "parse_group",
]

MAX_SYMMETRIC_N = 5


def _frozen(a, dtype=np.int64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class FiniteGroup:
    """A validated finite group.

    Cyclic groups carry ``cyclic=True`` and build their table lazily so that
    large grids (``Z_4096`` for circle discretization) do not allocate an
    ``order x order`` array unless something asks for it.
    """

    def __init__(self, order, table, identity, inverse, labels=None, name=None, cyclic=False):
        self.order = int(order)
        self._table = None if table is None else _frozen(table)
        self.identity = int(identity)
        self.inverse = _frozen(inverse)
        self.labels = None if labels is None else tuple(str(x) for x in labels)
        self.name = name
        self.cyclic = cyclic

    @property
    def table(self):
        if self._table is None:
            idx = np.arange(self.order)
            self._table = _frozen((idx[:, None] + idx[None, :]) % self.order)
        return self._table

    def mul(self, a, b):
        if self.cyclic:
            return (int(a) + int(b)) % self.order
        return int(self.table[a, b])

    def inv(self, a):
        return int(self.inverse[a])

    def power(self, a, n):
        out = self.identity
        for _ in range(n):
            out = self.mul(out, a)
        return out

    def element_order(self, a):
        k, x = 1, int(a)
        while x != self.identity:
            x = self.mul(x, a)
            k += 1
        return k

    def element_orders(self):
        return sorted(self.element_order(a) for a in range(self.order))

    def is_abelian(self):
        if self.cyclic:
            return True
        return bool(np.array_equal(self.table, self.table.T))

    def label(self, a):
        return self.labels[a] if self.labels else str(a)

    def __len__(self):
        return self.order

    def __repr__(self):
        name = self.name or "FiniteGroup"
        return f"<{name} order={self.order}>"


@dataclass(frozen=True)
class Subgroup:
    parent: FiniteGroup
    members: tuple

    @property
    def size(self):
        return len(self.members)

    def __contains__(self, g):
        return int(g) in self.members

    def is_whole(self):
        return self.size == self.parent.order

    def is_normal(self):
        G = self.parent
        mem = set(self.members)
        for g in range(G.order):
            gi = G.inv(g)
            for f in self.members:
                if G.mul(G.mul(g, f), gi) not in mem:
                    return False
        return True


@dataclass(frozen=True)
class GroupAction:
    group: FiniteGroup
    points: int
    perm: np.ndarray  # perm[g, p] = image of point p under g

    def orbits(self):
        seen = set()
        out = []
        for p in range(self.points):
            if p in seen:
                continue
            orbit = sorted({int(self.perm[g, p]) for g in range(self.group.order)})
            seen.update(orbit)
            out.append(orbit)
        return out


def check_axioms(table):
    """Return ``(identity, inverse)`` or raise :class:`NotAGroup`."""
    t = np.asarray(table)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise NotAGroup(f"table is not square: shape {t.shape}")
    n = t.shape[0]
    if n == 0:
        raise NotAGroup("empty table")
    if not np.issubdtype(t.dtype, np.integer):
        if not np.all(np.equal(np.mod(t, 1), 0)):
            raise NotAGroup("table entries must be integers")
        t = t.astype(np.int64)
    bad = np.argwhere((t < 0) | (t >= n))
    if len(bad):
        i, j = (int(v) for v in bad[0])
        raise NotAGroup("closure fails", (i, j))
    # associativity: t[t[i,j],k] == t[i,t[j,k]]
    left = t[t]  # left[i,j,k] = t[t[i,j], k]
    right = t[:, t]  # right[i,j,k] = t[i, t[j,k]]
    bad = np.argwhere(left != right)
    if len(bad):
        raise NotAGroup("associativity fails", tuple(int(v) for v in bad[0]))
    idx = np.arange(n)
    ident = [e for e in range(n) if np.array_equal(t[e], idx) and np.array_equal(t[:, e], idx)]
    if not ident:
        raise NotAGroup("no identity element")
    e = ident[0]
    inverse = np.empty(n, dtype=np.int64)
    for i in range(n):
        hits = np.flatnonzero(t[i] == e)
        if len(hits) == 0 or t[hits[0], i] != e:
            raise NotAGroup("element has no inverse", (i,))
        inverse[i] = hits[0]
    return e, inverse


def build_group(table, labels=None, name=None):
    """Validate a Cayley table and wrap it as a :class:`FiniteGroup`."""
    t = np.asarray(table)
    e, inverse = check_axioms(t)
    if labels is not None and len(labels) != t.shape[0]:
        raise NotAGroup("labels length does not match order")
    return FiniteGroup(t.shape[0], t.astype(np.int64), e, inverse, labels=labels, name=name)


def cyclic(n):
    if n < 1:
        raise UnsupportedSize(f"cyclic group needs n >= 1, got {n}")
    idx = np.arange(n)
    return FiniteGroup(n, None, 0, (-idx) % n, name=f"Z{n}", cyclic=True)


def _group_from_perms(perms, name):
    """Cayley table of a list of permutations (tuples) closed under composition.

    Composition is ``(g*h)(p) = g(h(p))``.
    """
    index = {p: i for i, p in enumerate(perms)}
    n = len(perms)
    table = np.empty((n, n), dtype=np.int64)
    for i, g in enumerate(perms):
        for j, h in enumerate(perms):
            table[i, j] = index[tuple(g[x] for x in h)]
    labels = ["".join(map(str, p)) if len(p) < 10 else str(p) for p in perms]
    return build_group(table, labels=labels, name=name)


def _perm_closure(generators):
    size = len(generators[0])
    ident = tuple(range(size))
    seen = {ident: None}
    order = [ident]
    queue = deque([ident])
    while queue:
        g = queue.popleft()
        for s in generators:
            h = tuple(s[x] for x in g)
            if h not in seen:
                seen[h] = None
                order.append(h)
                queue.append(h)
    return order


def dihedral(n):
    """Symmetries of the regular n-gon, order 2n, as permutations of vertices."""
    if n < 3:
        raise UnsupportedSize(f"dihedral(n) needs n >= 3, got {n}")
    rot = tuple((k + 1) % n for k in range(n))
    ref = tuple((-k) % n for k in range(n))
    g = _group_from_perms(_perm_closure([rot, ref]), f"D{n}")
    return g


def symmetric(n):
    if not 1 <= n <= MAX_SYMMETRIC_N:
        raise UnsupportedSize(f"symmetric(n) supports 1 <= n <= {MAX_SYMMETRIC_N}, got {n}")
    perms = list(itertools.permutations(range(n)))
    assert len(perms) == factorial(n)
    return _group_from_perms(perms, f"S{n}")


# Faces: 0:+x 1:-x 2:+y 3:-y 4:+z 5:-z
CUBE_QUARTER_TURN_Z = (2, 3, 1, 0, 4, 5)
CUBE_QUARTER_TURN_X = (0, 1, 4, 5, 3, 2)


def cube_rotations():
    """Rotation group of the cube and its action on the six faces."""
    perms = _perm_closure([CUBE_QUARTER_TURN_Z, CUBE_QUARTER_TURN_X])
    if len(perms) != 24:
        raise AssertionError(f"cube rotation closure has {len(perms)} elements")
    G = _group_from_perms(perms, "cube_rotations")
    action = GroupAction(G, 6, _frozen(perms))
    return G, action


def builtin_group(family, n=None):
    """Construct one of the built-in families by name.

    ``family`` is ``"cyclic"``, ``"dihedral"``, ``"symmetric"`` or
    ``"cube_rotations"``.
    """
    if family == "cyclic":
        return cyclic(n)
    if family == "dihedral":
        return dihedral(n)
    if family == "symmetric":
        return symmetric(n)
    if family == "cube_rotations":
        return cube_rotations()[0]
    raise UnsupportedSize(f"unknown group family {family!r}")


def parse_group(text):
    """Parse ``cyclic:6``, ``dihedral:4``, ``symmetric:3`` or ``cube_rotations``."""
    family, _, arg = text.partition(":")
    family = family.strip().lower()
    aliases = {"z": "cyclic", "c": "cyclic", "d": "dihedral", "s": "symmetric", "cube": "cube_rotations"}
    family = aliases.get(family, family)
    if family == "cube_rotations":
        return cube_rotations()[0]
    try:
        n = int(arg)
    except ValueError:
        raise UnsupportedSize(f"cannot parse group spec {text!r}") from None
    return builtin_group(family, n)


def subgroup_closure(G, seed):
    """Smallest subgroup of ``G`` containing every index in ``seed``."""
    seed = {int(s) for s in seed}
    if not seed:
        raise ValueError("seed must be nonempty")
    for s in seed:
        if not 0 <= s < G.order:
            raise IndexError(f"element {s} out of range for order {G.order}")
    members = {G.identity} | seed | {G.inv(s) for s in seed}
    frontier = list(members)
    gens = sorted(members)
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                c = G.mul(a, g)
                if c not in members:
                    members.add(c)
                    nxt.append(c)
        frontier = nxt
    return Subgroup(G, tuple(sorted(members)))


def left_coset(G, rep, F):
    return tuple(sorted(G.mul(rep, f) for f in F.members))


def coset_analysis(G, F):
    """Index of ``F`` in ``G`` and the partition of ``G`` into left cosets."""
    cosets = []
    covered = set()
    for g in range(G.order):
        if g in covered:
            continue
        c = left_coset(G, g, F)
        covered.update(c)
        cosets.append(c)
    return {"index": G.order // F.size, "left_cosets": cosets}


def invariant_distributions(action):
    """Extreme points of the invariant distributions: uniform on each orbit."""
    out = []
    for orbit in action.orbits():
        p = np.zeros(action.points)
        p[orbit] = 1.0 / len(orbit)
        out.append(p)
    return out


def group_to_json(G):
    return json.dumps({"order": G.order, "table": G.table.ravel().tolist(), "labels": list(G.labels) if G.labels else None})


def group_from_json(text):
    doc = json.loads(text) if isinstance(text, str) else text
    n = int(doc["order"])
    table = np.asarray(doc["table"], dtype=np.int64)
    if table.ndim == 1:
        if table.size != n * n:
            raise NotAGroup("table length does not match order")
        table = table.reshape(n, n)
    return build_group(table, labels=doc.get("labels"))
