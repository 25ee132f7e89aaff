"""Tests for criteria checks, sweeps, exceptional points, criticality."""

import math

import numpy as np
import pytest

from alphadyn.bessel import BesselOrder, bessel_zero, free_decay_eigenvalue
from alphadyn.eigen import eigenvalues
from alphadyn.operator import RadialGrid, assemble
from alphadyn.profiles import constant_profile, kinematic_profile, scaled
from alphadyn.spectral import (
    FINITENESS_BOUND,
    BracketError,
    SpectralBranch,
    anti_dynamo_check,
    branching_exponent,
    critical_C,
    find_exceptional_points,
    finiteness_norm_check,
    im_bound_check,
    leading_eigenvalues,
    sweep,
)

J_MINUS_1 = bessel_zero(BesselOrder(1, -0.5), 1)  # pi
J_PLUS_1 = bessel_zero(BesselOrder(1, 0.5), 1)  # 4.4934...


# --- anti-dynamo criterion ---


def test_anti_dynamo_constant_threshold_is_first_zero():
    rep = anti_dynamo_check(constant_profile(1.0), l=1)
    # derivative term vanishes, so equality is ||alpha||^2 = j_plus^2 and
    # the threshold is the Bessel zero itself, as a formula identity
    assert rep.threshold_C == J_PLUS_1
    assert rep.satisfied
    assert rep.margin == pytest.approx(J_PLUS_1**2 - 1.0, rel=1e-14)


def test_anti_dynamo_constant_satisfied_below_threshold():
    assert anti_dynamo_check(constant_profile(4.0)).satisfied
    assert not anti_dynamo_check(constant_profile(5.0)).satisfied
    assert not anti_dynamo_check(constant_profile(4.4935)).satisfied


def test_anti_dynamo_zero_profile():
    rep = anti_dynamo_check(constant_profile(0.0), l=1)
    assert rep.satisfied
    assert rep.margin == pytest.approx(J_PLUS_1**2, rel=1e-14)


def test_anti_dynamo_kinematic_derived_threshold():
    rep = anti_dynamo_check(kinematic_profile(1.0), l=1)
    # independent route: solve (s^2 sd^2 / j_minus) u^2 + s^2 u = j_plus^2
    s, sd = 1.916, 1.916 * 8.0
    roots = np.roots([s**2 * sd**2 / J_MINUS_1, s**2, -(J_PLUS_1**2)])
    want = math.sqrt(float(roots[roots > 0][0].real))
    assert rep.threshold_C == pytest.approx(want, rel=1e-10)
    # the derived root sits near 0.514, far from the quoted 1.725
    assert 0.4 < rep.threshold_C < 0.6
    assert rep.quoted_threshold_C == 1.725
    assert rep.quoted_consistent is False


def test_anti_dynamo_threshold_separates_satisfaction():
    thr = anti_dynamo_check(kinematic_profile(1.0)).threshold_C
    assert anti_dynamo_check(kinematic_profile(0.99 * thr)).satisfied
    assert not anti_dynamo_check(kinematic_profile(1.01 * thr)).satisfied


def test_anti_dynamo_margin_monotone_in_amplitude():
    margins = [
        anti_dynamo_check(kinematic_profile(c)).margin
        for c in (0.1, 0.3, 0.5, 0.7, 1.0)
    ]
    assert all(a > b for a, b in zip(margins[:-1], margins[1:]))


def test_anti_dynamo_margin_sign_convention():
    for c in (0.2, 0.514, 1.0, 3.0):
        rep = anti_dynamo_check(kinematic_profile(c))
        assert rep.satisfied == (rep.margin > 0.0)


def test_quoted_threshold_only_for_kinematic_shape():
    assert anti_dynamo_check(constant_profile(2.0)).quoted_threshold_C is None


# --- imaginary-part bound ---


def test_im_bound_constant_profile_real_spectrum():
    op = assemble(1, constant_profile(2.0), RadialGrid(100))
    spec = eigenvalues(op)
    rep = im_bound_check(spec, constant_profile(2.0), matrix_norm=op.norm_inf())
    assert rep.satisfied
    assert rep.alpha_deriv_sup == 0.0
    # all eigenvalues real within the discretization tolerance
    assert np.abs(spec.lambdas.imag).max() <= 1e-6 * op.norm_inf()


def test_im_bound_zero_profile():
    op = assemble(1, constant_profile(0.0), RadialGrid(64))
    spec = eigenvalues(op)
    rep = im_bound_check(spec, constant_profile(0.0), matrix_norm=op.norm_inf())
    assert rep.satisfied
    assert np.abs(spec.lambdas.imag).max() == 0.0


def test_im_bound_kinematic_supercritical():
    p = kinematic_profile(6.8)
    op = assemble(1, p, RadialGrid(100))
    spec = eigenvalues(op)
    rep = im_bound_check(spec, p, matrix_norm=op.norm_inf())
    assert rep.satisfied
    # the bound 8 * 1.916 * 6.8 holds with a wide margin
    assert np.abs(spec.lambdas.imag).max() < 8.0 * 1.916 * 6.8


# --- finiteness norm bound ---


def test_finiteness_bound_value():
    assert FINITENESS_BOUND == pytest.approx(1.3208770003, abs=1e-9)


def test_finiteness_kinematic_threshold():
    rep = finiteness_norm_check(kinematic_profile(0.5))
    assert rep.satisfied
    assert rep.threshold_C == pytest.approx(0.689, abs=1e-3)


def test_finiteness_constant_cases():
    assert not finiteness_norm_check(constant_profile(1.4)).satisfied
    assert finiteness_norm_check(constant_profile(1.3)).satisfied
    assert finiteness_norm_check(constant_profile(0.0)).satisfied


# --- leading eigenvalues and convergence ---


def test_free_decay_leading_eigenvalues():
    lams = leading_eigenvalues(constant_profile(0.0), l=1, n=240, k=4)
    want = sorted(
        [
            free_decay_eigenvalue(BesselOrder(1, -0.5), 1),
            free_decay_eigenvalue(BesselOrder(1, 0.5), 1),
            free_decay_eigenvalue(BesselOrder(1, -0.5), 2),
            free_decay_eigenvalue(BesselOrder(1, 0.5), 2),
        ],
        reverse=True,
    )
    for lam, ref in zip(lams, want):
        assert lam.imag == 0.0
        assert lam.real == pytest.approx(ref, rel=1e-6)


def test_leading_eigenvalue_h2_convergence():
    # without Richardson the error should drop ~4x per grid doubling
    ref = free_decay_eigenvalue(BesselOrder(1, -0.5), 1)
    errs = []
    for n in (60, 120, 240):
        lam = leading_eigenvalues(
            constant_profile(0.0), l=1, n=n, k=1, richardson=False
        )[0]
        errs.append(abs(lam.real - ref))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.15)


def test_richardson_beats_plain():
    ref = free_decay_eigenvalue(BesselOrder(1, 0.5), 1)
    plain = leading_eigenvalues(
        constant_profile(0.0), l=1, n=120, k=2, richardson=False
    )[1]
    rich = leading_eigenvalues(constant_profile(0.0), l=1, n=120, k=2)[1]
    assert abs(rich.real - ref) < 0.05 * abs(plain.real - ref)


# --- sweeps ---


def test_sweep_zero_shape_branches_flat():
    sw = sweep(constant_profile(0.0), np.linspace(0.0, 3.0, 7), l=1, n=64)
    for b in sw:
        assert np.allclose(b.lam_path, b.lam_path[0], rtol=0, atol=1e-10)
        assert b.coalescence_markers == ()


def test_sweep_constant_shape_crossing():
    grid = np.linspace(0.0, 6.0, 31)
    sw = sweep(constant_profile(1.0), grid, l=1, k_leading=3, n=120)
    lead = sw[0]
    re = lead.lam_path.real
    assert np.abs(lead.lam_path.imag).max() < 1e-4
    crossings = np.where(np.diff(np.sign(re)) != 0)[0]
    assert len(crossings) == 1
    i = crossings[0]
    # linear interpolation of the sign change lands on the known critical C
    c_cross = grid[i] + (0.0 - re[i]) * (grid[i + 1] - grid[i]) / (re[i + 1] - re[i])
    assert c_cross == pytest.approx(4.4934, abs=float(grid[1] - grid[0]))


def test_sweep_kinematic_complex_at_onset():
    shape = kinematic_profile(6.78)
    grid = np.linspace(0.6, 1.1, 11)
    sw = sweep(shape, grid, l=1, k_leading=4, n=100)
    b0, b1 = sw[0], sw[1]
    assert b0.coalescence_markers, "leading pair never coalesced"
    # at C* = 1 the leading two form a conjugate pair
    i1 = int(np.argmin(np.abs(grid - 1.0)))
    la, lb = b0.lam_path[i1], b1.lam_path[i1]
    assert abs(la.imag) > 0.1
    assert la.imag == pytest.approx(-lb.imag, rel=1e-6)
    assert la.real == pytest.approx(lb.real, rel=1e-6)


def test_sweep_validates_grid():
    with pytest.raises(ValueError):
        sweep(constant_profile(1.0), [1.0], n=64)
    with pytest.raises(ValueError):
        sweep(constant_profile(1.0), [1.0, 0.5], n=64)


def test_sweep_threads_match_serial():
    grid = np.linspace(0.0, 2.0, 5)
    a = sweep(constant_profile(1.0), grid, n=64, threads=1)
    b = sweep(constant_profile(1.0), grid, n=64, threads=2)
    for ba, bb in zip(a, b):
        assert np.array_equal(ba.lam_path, bb.lam_path)


# --- exceptional points ---


def two_by_two_solver(t):
    return eigenvalues(np.array([[0.0, 1.0], [float(t), 0.0]]))


def two_by_two_branches(ts):
    p0, p1 = [], []
    for t in ts:
        lams = two_by_two_solver(t).lambdas
        p0.append(lams[0])
        p1.append(lams[1])
    ts = np.asarray(ts, dtype=float)
    return [
        SpectralBranch(branch_id=0, c_grid=ts, lam_path=np.array(p0)),
        SpectralBranch(branch_id=1, c_grid=ts, lam_path=np.array(p1)),
    ]


def test_ep_on_analytic_family():
    ts = np.linspace(-1.0, 1.0, 9)
    eps = find_exceptional_points(
        two_by_two_branches(ts), solver=two_by_two_solver, k=2
    )
    assert len(eps) == 1
    ep = eps[0]
    assert ep.c_star == pytest.approx(0.0, abs=1e-4)
    assert abs(ep.lam) < 1e-2
    assert not ep.unresolved


def test_ep_square_root_exponent():
    # lambda = +-sqrt(t): |Im| = sqrt(|t|) on the complex side
    expo = branching_exponent(
        two_by_two_solver,
        0.0,
        deltas=[0.001, 0.003, 0.01, 0.03, 0.1],
        guess=(0.1j, -0.1j),
        k=2,
        side=-1.0,
    )
    assert expo == pytest.approx(0.5, abs=0.1)


def test_ep_kinematic_below_onset():
    shape = kinematic_profile(6.78)
    grid = np.linspace(0.3, 1.0, 8)
    sw = sweep(shape, grid, l=1, k_leading=2, n=100)
    eps = find_exceptional_points(sw, refine_n=200)
    assert len(eps) >= 1
    ep = eps[0]
    assert 0.3 < ep.c_star < 1.0
    # eigenvalue at the coalescence is real to classifier tolerance
    assert abs(ep.lam.imag) < 1e-3 * max(1.0, abs(ep.lam))


def test_ep_none_on_real_family():
    sw = sweep(constant_profile(1.0), np.linspace(0.0, 6.0, 13), n=64)
    assert find_exceptional_points(sw, refine_n=64) == []


# --- critical amplitude ---


def test_critical_constant():
    c, lam = critical_C(constant_profile(1.0), l=1, bracket=(1.0, 6.0), n=120)
    assert c == pytest.approx(4.4934, abs=0.005)
    assert abs(lam.imag) < 1e-6


def test_critical_scaling_linearity():
    c2, _ = critical_C(constant_profile(2.0), l=1, bracket=(0.5, 4.0), n=120)
    assert c2 == pytest.approx(4.4934 / 2.0, abs=0.004)


def test_critical_kinematic_oscillatory():
    c, lam = critical_C(kinematic_profile(1.0), l=1, bracket=(4.0, 10.0), n=120)
    assert c == pytest.approx(6.78, abs=0.05)
    assert abs(lam.imag) > 1.0  # oscillatory onset


def test_critical_bad_bracket():
    with pytest.raises(BracketError):
        critical_C(constant_profile(1.0), l=1, bracket=(0.5, 2.0), n=64)


# --- cross-module consistency ---


def test_anti_dynamo_implies_decay():
    cases = [constant_profile(c) for c in (1.0, 2.0, 3.0, 4.0)]
    cases += [kinematic_profile(c) for c in (0.3, 0.5)]
    for p in cases:
        rep = anti_dynamo_check(p, l=1)
        assert rep.satisfied
        spec = eigenvalues(assemble(1, p, RadialGrid(100)))
        assert spec.lambdas.real.max() < 0.0
