import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from haarlab.circle import discretize, make_density
from haarlab.convergence import (
    ConvergenceSeries,
    decay_bound_check,
    detect_obstruction,
    fit_rate,
    one_bit_floor_check,
    pointwise_density_check,
    rd_convergence_check,
    run_series,
    run_series_fourier,
    support_period,
)
from haarlab.distortion import cosine_spec
from haarlab.errors import InsufficientData, PreconditionFailed
from haarlab.groups import cube_rotations, cyclic, dihedral, symmetric
from haarlab.measures import GroupDistribution, density, point_mass, uniform, uniform_on
from haarlab.ratedist import beta_grid

LOG2 = math.log(2)


def iterate_supports(G, S, steps):
    """Support-set iteration oracle: S, S*S, S*S*S, ..."""
    out = [frozenset(S)]
    for _ in range(steps - 1):
        out.append(frozenset(G.mul(a, b) for a in out[-1] for b in S))
    return out


def test_obstruction_examples():
    G = cyclic(6)
    assert detect_obstruction(uniform(G)).verdict == "converges"
    rep = detect_obstruction(uniform_on(G, [0, 2, 4]))
    assert rep.verdict == "subgroup_supported"
    assert rep.subgroup.members == (0, 2, 4)
    rep = detect_obstruction(uniform_on(G, [1, 3, 5]))
    assert rep.verdict == "coset_supported"
    assert rep.subgroup.members == (0, 2, 4)
    assert rep.period == 2
    sup = iterate_supports(G, [1, 3, 5], 4)
    assert sup[0] == sup[2] != sup[1] == sup[3]


def test_two_point_support_generating_z6_converges():
    G = cyclic(6)
    assert detect_obstruction(GroupDistribution(G, [0.5, 0.5, 0, 0, 0, 0])).verdict == "converges"


def test_point_mass_obstructions():
    G = cyclic(5)
    assert detect_obstruction(point_mass(G, 0)).verdict == "subgroup_supported"
    rep = detect_obstruction(point_mass(G, 2))
    assert rep.verdict == "coset_supported"
    assert rep.subgroup.members == (0,)
    assert rep.period == 5


def test_non_normal_coset_period_by_support_iteration():
    S3 = symmetric(3)
    t = [g for g in range(6) if S3.element_order(g) == 2]
    # support {t0} lies in the coset t0 * {e}, period 2
    rep = detect_obstruction(point_mass(S3, t[0]))
    assert rep.verdict == "coset_supported" and rep.period == 2
    assert support_period(point_mass(S3, t[0])) == 2


@pytest.mark.parametrize("G", [cyclic(8), dihedral(4), symmetric(3), cube_rotations()[0]], ids=lambda g: g.name)
def test_coset_period_matches_support_iteration(G, rng):
    for _ in range(10):
        k = int(rng.integers(1, 3))
        S = sorted(rng.choice(G.order, size=k, replace=False).tolist())
        rep = detect_obstruction(uniform_on(G, S))
        if rep.verdict != "coset_supported":
            continue
        assert set(S) <= {G.mul(rep.coset_rep, f) for f in rep.subgroup.members}
        assert not rep.subgroup.is_whole()
        seq = iterate_supports(G, S, 4 * G.order)
        first = next(i for i in range(1, len(seq)) if seq[i] == seq[0]) if seq[0] in seq[1:] else None
        if first is not None:
            assert first == rep.period


def test_full_support_series_decreases_to_zero(rng):
    G = cyclic(6)
    P = GroupDistribution(G, rng.dirichlet(np.ones(6)))
    s = run_series(P, 30)
    live = s.divergence > 1e-13
    assert np.all(np.diff(s.divergence)[live[1:]] < 0)
    assert np.all(np.diff(s.divergence) <= 1e-15)
    assert s.divergence[-1] < 1e-12
    # Pinsker becomes tight as one character dominates, so allow rounding
    assert np.all(0.5 * s.tv**2 <= s.divergence * (1 + 1e-9) + 1e-15)


def test_subgroup_uniform_series_is_constant():
    G = cyclic(6)
    s = run_series(uniform_on(G, [0, 2, 4]), 40)
    assert np.allclose(s.divergence, LOG2, atol=1e-12)


def test_coset_series_constant_and_alternating():
    G = cyclic(6)
    s = run_series(uniform_on(G, [1, 3, 5]), 40)
    assert np.allclose(s.divergence, LOG2, atol=1e-12)
    odd = {1, 3, 5}
    for n, supp in zip(s.n_values, s.supports):
        assert set(supp) == (odd if n % 2 else {0, 2, 4})


def test_series_transport_column():
    G = cyclic(8)
    P = GroupDistribution(G, [0.4, 0.3, 0.1, 0, 0, 0, 0.1, 0.1])
    s = run_series(P, 12, cosine_spec(G))
    assert s.transport is not None and len(s.transport) == 12
    assert s.transport[-1] < s.transport[0]
    assert np.all(s.transport >= -1e-12)


def test_fourier_series_examples():
    s = run_series_fourier(make_density([]), 5)
    assert np.all(s.divergence == 0) and np.all(s.quadratic == 0)
    s = run_series_fourier(make_density([0.8]), 20)
    n = s.n_values
    assert np.allclose(s.quadratic, 2 * 0.4 ** (2 * n), rtol=1e-13)
    assert np.all(s.divergence >= 0)


def test_discretized_series_matches_fourier_series():
    A = make_density([0.6, 0.2], [0.4, 1.0])
    disc = run_series(discretize(A, 4096), 10)
    exact = run_series_fourier(A, 10)
    assert np.max(np.abs(disc.divergence - exact.divergence)) < 1e-5


def test_fit_rate_examples(rng):
    s = run_series_fourier(make_density([0.8]), 20)
    fit = fit_rate(s, burn_in=5)
    assert fit["rho"] == pytest.approx(0.16, rel=0.02)
    const = run_series(uniform_on(cyclic(6), [0, 2, 4]), 12)
    fit = fit_rate(const, burn_in=1)
    assert fit["rho"] == pytest.approx(1.0) and fit["no_decay"]
    P = GroupDistribution(cyclic(6), rng.dirichlet(np.ones(6)))
    fit = fit_rate(run_series(P, 30), burn_in=3)
    assert 0 < fit["rho"] < 1 and fit["r2"] > 0.99


def test_fit_rate_insufficient_data():
    s = ConvergenceSeries(np.arange(1, 5), np.array([1.0, 0.5, 0.25, 0.125]))
    with pytest.raises(InsufficientData):
        fit_rate(s, burn_in=1)


def test_decay_bound_examples():
    r = decay_bound_check(uniform(cyclic(5)), 6)
    assert r["c"] == pytest.approx(1.0)
    assert np.all(r["divergence"] <= 1e-15) and r["holds"]
    r = decay_bound_check(GroupDistribution(cyclic(4), [0.4, 0.3, 0.2, 0.1]), 20)
    assert r["c"] == pytest.approx(0.4)
    assert r["holds"] and np.all(r["margin"][1:] > 0)
    eps = 1e-4
    m = np.full(4, eps)
    m[0] = 1 - 3 * eps
    r = decay_bound_check(GroupDistribution(cyclic(4), m), 20)
    assert r["holds"]
    assert r["bound"][-1] > 0.99 * r["bound"][0]


def test_decay_bound_precondition():
    with pytest.raises(PreconditionFailed):
        decay_bound_check(uniform_on(cyclic(4), [0, 1]), 5)


@given(st.sampled_from([cyclic(3), cyclic(7), dihedral(4), symmetric(3)]), st.data())
def test_decay_bound_property(G, data):
    m = data.draw(st.lists(st.floats(1e-3, 1.0), min_size=G.order, max_size=G.order))
    assert decay_bound_check(GroupDistribution(G, m), 12)["holds"]


def test_one_bit_examples():
    r = one_bit_floor_check(uniform(cyclic(6)))
    assert r["floor"] > 0 and r["min_density_PP"] == pytest.approx(1.0) and r["holds"]
    G = cyclic(6)
    # tilt U until D = 0.5 nats
    from scipy.optimize import brentq

    from haarlab.measures import divergence

    base = np.array([6.0, 1, 1, 1, 1, 1])
    tilt = lambda t: GroupDistribution(G, base**t)
    t = brentq(lambda t: divergence(tilt(t), uniform(G)) - 0.5, 0.0, 5.0)
    P = tilt(t)
    r = one_bit_floor_check(P)
    assert r["D_nats"] == pytest.approx(0.5)
    assert r["holds"]


def test_one_bit_boundary_case():
    G = cyclic(6)
    with pytest.raises(PreconditionFailed) as exc:
        one_bit_floor_check(uniform_on(G, [0, 2, 4]))
    rep = exc.value.report
    assert rep["D_nats"] == pytest.approx(LOG2, abs=1e-12)
    assert rep["min_density_PP"] == 0.0


@given(st.sampled_from([cyclic(2), cyclic(5), cyclic(8), dihedral(3), dihedral(6)]), st.data())
def test_one_bit_property(G, data):
    m = data.draw(st.lists(st.floats(0.0, 1.0), min_size=G.order, max_size=G.order).filter(lambda v: sum(v) > 0.05))
    P = GroupDistribution(G, m)
    try:
        r = one_bit_floor_check(P)
    except PreconditionFailed:
        return
    assert r["floor"] > 0
    assert r["min_density_PP"] >= r["floor"] * (1 - 1e-12)


def test_one_bit_floor_is_best_over_eps(rng):
    G = cyclic(8)
    P = GroupDistribution(G, rng.dirichlet(np.full(8, 4.0)))
    r = one_bit_floor_check(P)
    f = density(P)
    grid = np.linspace(1e-6, f.max(), 20001)
    brute = max(2 * e * e * (np.mean(f > e) - 0.5) for e in grid)
    assert r["floor"] >= brute - 1e-9
    assert r["floor"] <= brute + 1e-3


def test_pointwise_density_examples(rng):
    r = pointwise_density_check(uniform(cyclic(5)), 6, 0.1)
    assert all(row["fraction"] == 0 for row in r["rows"])
    P = GroupDistribution(cyclic(8), rng.dirichlet(np.ones(8)))
    r = pointwise_density_check(P, 40, 0.1)
    assert r["holds"]
    fr = [row["fraction"] for row in r["rows"]]
    n0 = next(i for i, v in enumerate(fr) if v == 0)
    assert all(v == 0 for v in fr[n0:])
    with pytest.raises(ValueError):
        pointwise_density_check(P, 3, 0.0)


def test_rd_convergence_examples(rng):
    G = cyclic(6)
    spec = cosine_spec(G)
    betas = beta_grid(-10, -0.05, 8)
    r = rd_convergence_check(uniform(G), spec, betas, [1])
    assert r["rows"][0]["sup_gap"] <= 1e-8
    P = GroupDistribution(G, rng.dirichlet(np.ones(6)))
    r = rd_convergence_check(P, spec, betas, [1, 2, 4, 8, 16, 40])
    assert r["verdict"] == "converges"
    gaps = [row["sup_gap"] for row in r["rows"]]
    assert all(row["within_sandwich"] for row in r["rows"])
    assert all(b <= a + 1e-8 for a, b in zip(gaps, gaps[1:]))
    last = r["rows"][-1]
    assert last["divergence"] < 1e-6 and last["sup_gap"] < 1e-5


def test_rd_non_convergence_witness():
    G = cyclic(6)
    r = rd_convergence_check(uniform_on(G, [0, 2, 4]), cosine_spec(G), beta_grid(-10, -0.05, 8), [1, 5, 20])
    assert r["verdict"] == "subgroup_supported"
    gaps = [row["sup_gap"] for row in r["rows"]]
    assert min(gaps) > 0.05
    assert max(gaps) - min(gaps) < 1e-8


@given(st.sampled_from([cyclic(6), dihedral(4), symmetric(3)]), st.data())
def test_divergence_series_nonincreasing(G, data):
    m = data.draw(st.lists(st.floats(0.0, 1.0), min_size=G.order, max_size=G.order).filter(lambda v: sum(v) > 0.05))
    s = run_series(GroupDistribution(G, m), 15)
    assert np.all(np.diff(s.divergence) <= 1e-12)
    assert np.all(0.5 * s.tv**2 <= s.divergence * (1 + 1e-9) + 1e-15)
