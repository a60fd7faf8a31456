"""Densities on the circle group SO(2) as truncated cosine series.

A density is ``f(x) = 1 + sum_k a_k cos(k (x + phi_k))`` with respect to the
uniform measure ``dx / 2 pi``. Phases are kept as given and only reduced
modulo 2 pi at evaluation, so ``n * phi_k`` stays exact under n-fold powers.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse, NotADensity, QuadratureFailure
from .groups import cyclic
from .measures import GroupDistribution

__all__ = [
    "FourierDensity",
    "make_density",
    "fourier_convolve",
    "n_fold_fourier",
    "divergence_exact",
    "divergence_quadratic",
    "discretize",
    "parse_fourier",
    "fourier_to_json",
    "fourier_from_json",
    "NEG_TOL",
]

NEG_TOL = 1e-9
QUAD_TOL = 1e-10
QUAD_MAX_POINTS = 2**20


@dataclass(frozen=True)
class FourierDensity:
    amps: tuple = ()
    phases: tuple = ()

    @property
    def K(self):
        return len(self.amps)

    def deviation(self, x):
        """``f(x) - 1``; computed without adding 1 so tiny amplitudes keep precision."""
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        for k, (a, phi) in enumerate(zip(self.amps, self.phases), start=1):
            if a:
                g += a * np.cos(k * np.mod(x + phi, 2 * np.pi))
        return g

    def __call__(self, x):
        return 1.0 + self.deviation(x)

    def is_uniform(self):
        return all(a == 0 for a in self.amps)


def _grid_size(K):
    return max(4096, 8 * K * 1024)


def make_density(amps=(), phases=None):
    """Validated :class:`FourierDensity`.

    Accepts immediately when ``sum |a_k| <= 1``; otherwise scans a dense grid
    and raises :class:`NotADensity` if the minimum falls below ``-1e-9``.
    """
    amps = tuple(float(a) for a in amps)
    phases = tuple(0.0 for _ in amps) if phases is None else tuple(float(p) for p in phases)
    if len(amps) != len(phases):
        raise ValueError("amps and phases must have equal length")
    A = FourierDensity(amps, phases)
    if sum(abs(a) for a in amps) <= 1.0:
        return A
    x = np.linspace(0.0, 2 * np.pi, _grid_size(A.K), endpoint=False)
    f = A(x)
    i = int(np.argmin(f))
    if f[i] < -NEG_TOL:
        raise NotADensity(float(f[i]), float(x[i]))
    return A


def fourier_convolve(A, B):
    """Convolution of two densities: coefficients multiply and halve, phases add.

    A harmonic missing from either factor is treated as amplitude zero.
    """
    K = max(A.K, B.K)
    amps, phases = [], []
    for k in range(K):
        a = A.amps[k] if k < A.K else 0.0
        b = B.amps[k] if k < B.K else 0.0
        pa = A.phases[k] if k < A.K else 0.0
        pb = B.phases[k] if k < B.K else 0.0
        amps.append(a * b / 2.0)
        phases.append(pa + pb)
    return FourierDensity(tuple(amps), tuple(phases))


def n_fold_fourier(A, n):
    """n-fold convolution power: amplitudes ``a_k**n / 2**(n-1)``, phases ``n*phi_k``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return A
    scale = 2.0 ** (n - 1)
    return FourierDensity(tuple(a**n / scale for a in A.amps), tuple(n * p for p in A.phases))


def _entropy_integrand(A, x):
    # f log f - (f - 1) has the same mean as f log f and stays accurate as a -> 0
    g = np.maximum(A.deviation(x), -1.0)
    f = 1.0 + g
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(f > 0, f * np.log1p(g) - g, 1.0)


def _simpson_periodic(A, n):
    x = np.linspace(0.0, 2 * np.pi, n + 1)
    y = _entropy_integrand(A, x)
    h = 2 * np.pi / n
    s = y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()
    return s * h / 3 / (2 * np.pi)


def divergence_exact(A, tol=QUAD_TOL):
    """D(P||U) = (1/2pi) int f log f dx by composite Simpson with grid doubling."""
    if A.is_uniform():
        return 0.0
    n = max(64, 16 * A.K)
    prev = _simpson_periodic(A, n)
    while n < QUAD_MAX_POINTS:
        n *= 2
        cur = _simpson_periodic(A, n)
        if abs(cur - prev) < tol:
            return float(max(cur, 0.0))
        prev = cur
    raise QuadratureFailure(f"Simpson refinement stalled at {n} points")


def divergence_quadratic(A):
    """Small-amplitude approximation ``sum_k a_k**2 / 2``.

    This replaces ``log f`` by ``f - 1`` and therefore equals the chi-square
    distance to U; for vanishing amplitudes the divergence itself tends to
    half of it.
    """
    return 0.5 * float(sum(a * a for a in A.amps))


def discretize(A, M):
    """Sample the density on ``M`` equally spaced angles as a distribution on Z_M."""
    if M < 4 * max(A.K, 1):
        raise GridTooCoarse(f"M={M} is below 4K={4 * A.K}")
    x = 2 * np.pi * np.arange(M) / M
    f = np.maximum(A(x), 0.0)
    return GroupDistribution(cyclic(M), f / f.sum())


_TERM = re.compile(r"^a(\d+)\s*=\s*([-+0-9.eE]+)\s*(?:@\s*([-+0-9.eE]+))?$")


def parse_fourier(text):
    """Parse inline specs like ``"a1=0.5@0.3,a2=0.1@0"`` into a validated density."""
    terms = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        m = _TERM.match(part)
        if not m:
            raise ValueError(f"cannot parse Fourier term {part!r}")
        k = int(m.group(1))
        if k < 1:
            raise ValueError("harmonic index must be >= 1")
        terms[k] = (float(m.group(2)), float(m.group(3) or 0.0))
    K = max(terms, default=0)
    amps = [terms.get(k, (0.0, 0.0))[0] for k in range(1, K + 1)]
    phases = [terms.get(k, (0.0, 0.0))[1] for k in range(1, K + 1)]
    return make_density(amps, phases)


def fourier_to_json(A):
    return json.dumps({"amps": list(A.amps), "phases": list(A.phases)})


def fourier_from_json(text):
    doc = json.loads(text) if isinstance(text, str) else text
    return make_density(doc.get("amps", []), doc.get("phases"))
