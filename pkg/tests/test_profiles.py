"""Tests for alpha-effect profile representation, evaluation and norms."""

import math

import numpy as np
import pytest

from alphadyn.profiles import (
    AlphaProfile,
    KINEMATIC_COEFFS,
    alpha_deriv,
    alpha_eval,
    constant_profile,
    format_profile_spec,
    kinematic_profile,
    load_profile_file,
    parse_profile_spec,
    polynomial_profile,
    scaled,
    sup_norms,
    tabulated_profile,
)


def test_kinematic_shape_values():
    p = kinematic_profile(1.0)
    assert alpha_eval(p, 0.0) == pytest.approx(1.916, abs=1e-14)
    # 1 - 6 + 5 = 0 at the surface
    assert alpha_eval(p, 1.0) == pytest.approx(0.0, abs=1e-12)
    # interior minimum at r^2 = 3/5: 1.916 * (1 - 3.6 + 1.8)
    assert alpha_eval(p, math.sqrt(0.6)) == pytest.approx(-1.916 * 0.8, rel=1e-12)


def test_kinematic_amplitude_scales_linearly():
    r = np.linspace(0.0, 1.0, 57)
    base = alpha_eval(kinematic_profile(1.0), r)
    assert np.allclose(alpha_eval(kinematic_profile(7.3), r), 7.3 * base, rtol=1e-14)


def test_polynomial_eval_matches_power_sum():
    coeffs = [0.3, -1.2, 0.0, 2.5, -0.7]
    p = polynomial_profile(1.9, coeffs)
    rng = np.random.default_rng(7)
    for r in rng.uniform(0.0, 1.0, 40):
        direct = 1.9 * sum(c * r**k for k, c in enumerate(coeffs))
        assert alpha_eval(p, r) == pytest.approx(direct, rel=1e-13)


def test_polynomial_derivative_exact():
    coeffs = [0.3, -1.2, 0.0, 2.5, -0.7]
    p = polynomial_profile(1.0, coeffs)
    rng = np.random.default_rng(11)
    for r in rng.uniform(0.0, 1.0, 40):
        direct = sum(k * c * r ** (k - 1) for k, c in enumerate(coeffs) if k > 0)
        assert alpha_deriv(p, r) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_derivative_consistent_with_finite_difference():
    p = kinematic_profile(2.0)
    h = 1e-6
    for r in (0.2, 0.5, 0.83):
        fd = (alpha_eval(p, r + h) - alpha_eval(p, r - h)) / (2 * h)
        assert alpha_deriv(p, r) == pytest.approx(fd, rel=1e-7)


def test_scalar_in_scalar_out():
    p = kinematic_profile(1.0)
    assert isinstance(alpha_eval(p, 0.5), float)
    assert isinstance(alpha_deriv(p, 0.5), float)
    out = alpha_eval(p, np.array([0.1, 0.9]))
    assert isinstance(out, np.ndarray) and out.shape == (2,)


def test_domain_enforced():
    p = constant_profile(1.0)
    with pytest.raises(ValueError):
        alpha_eval(p, 1.01)
    with pytest.raises(ValueError):
        alpha_eval(p, -0.01)
    # round-off sized excursions are clipped, not rejected
    assert alpha_eval(p, 1.0 + 1e-15) == 1.0


def test_sup_norms_constant():
    assert sup_norms(constant_profile(-3.5)) == (3.5, 0.0)


def test_sup_norms_kinematic():
    # shape 1.916 (1 - 6 r^2 + 5 r^4): |alpha| max 1.916 at r = 0;
    # derivative 1.916 (-12 r + 20 r^3) peaks at the surface: 1.916 * 8
    a, d = sup_norms(kinematic_profile(1.0))
    assert a == pytest.approx(1.916, rel=1e-12)
    assert d == pytest.approx(1.916 * 8.0, rel=1e-12)


def test_sup_norms_interior_extremum():
    # p(r) = r (1 - r): max 0.25 at r = 1/2, p' = 1 - 2r: max 1 at ends
    a, d = sup_norms(polynomial_profile(1.0, [0.0, 1.0, -1.0]))
    assert a == pytest.approx(0.25, abs=1e-13)
    assert d == pytest.approx(1.0, abs=1e-13)


def test_sup_norms_against_grid_scan():
    rng = np.random.default_rng(23)
    r = np.linspace(0.0, 1.0, 200001)
    for _ in range(10):
        coeffs = rng.uniform(-2.0, 2.0, 6)
        p = polynomial_profile(1.0, coeffs)
        a, d = sup_norms(p)
        assert a >= np.abs(alpha_eval(p, r)).max() - 1e-10
        assert a == pytest.approx(np.abs(alpha_eval(p, r)).max(), rel=1e-6)
        assert d == pytest.approx(np.abs(alpha_deriv(p, r)).max(), rel=1e-6)


def test_scaled_profile():
    p = kinematic_profile(2.0)
    q = scaled(p, -1.5)
    assert q.amplitude == pytest.approx(-3.0)
    assert alpha_eval(q, 0.3) == pytest.approx(-1.5 * alpha_eval(p, 0.3))


def test_tabulated_roundtrip_accuracy():
    grid = np.linspace(0.0, 1.0, 513)
    ref = kinematic_profile(1.0)
    tab = tabulated_profile(1.0, alpha_eval(ref, grid))
    r = np.linspace(0.0, 1.0, 997)
    # linear interpolation error ~ h^2 max|f''| / 8 with h = 1/512
    assert np.max(np.abs(alpha_eval(tab, r) - alpha_eval(ref, r))) < 5e-5
    assert np.max(np.abs(alpha_deriv(tab, r) - alpha_deriv(ref, r))) < 5e-3


def test_tabulated_requires_matching_deriv():
    with pytest.raises(ValueError):
        tabulated_profile(1.0, np.ones(8), deriv=np.ones(5))


def test_profile_kind_validation():
    with pytest.raises(ValueError):
        AlphaProfile(kind="weird")
    with pytest.raises(ValueError):
        AlphaProfile(kind="polynomial")


def test_parse_constant():
    p = parse_profile_spec("constant 2.5")
    assert p.kind == "constant" and p.amplitude == 2.5


def test_parse_poly():
    p = parse_profile_spec("poly 1.916 0:1 2:-6 4:5")
    assert p.kind == "polynomial"
    assert p.amplitude == pytest.approx(1.916)
    assert p.coefficients == (1.0, 0.0, -6.0, 0.0, 5.0)


def test_parse_errors():
    for bad in ("", "constant", "constant 1 2", "poly 1", "poly 1 x", "mystery 3"):
        with pytest.raises(ValueError):
            parse_profile_spec(bad)


def test_format_parse_roundtrip():
    for p in (
        constant_profile(-0.75),
        polynomial_profile(1.1, [0.5, 0.0, -2.0]),
        kinematic_profile(3.0),
    ):
        q = parse_profile_spec(format_profile_spec(p))
        r = np.linspace(0.0, 1.0, 101)
        assert np.allclose(alpha_eval(q, r), alpha_eval(p, r), rtol=0, atol=1e-15)


def test_load_profile_file(tmp_path):
    path = tmp_path / "alpha.dat"
    r = np.linspace(0.0, 1.0, 41)
    v = np.sin(np.pi * r)
    lines = ["# radius  alpha"]
    lines += [f"{ri:.10f}, {vi:.10f}" for ri, vi in zip(r, v)]
    path.write_text("\n".join(lines) + "\n")
    p = load_profile_file(str(path))
    assert p.kind == "tabulated"
    assert alpha_eval(p, 0.5) == pytest.approx(1.0, abs=1e-3)
    assert format_profile_spec(p) == f"file {path}"


def test_load_profile_file_errors(tmp_path):
    short = tmp_path / "one.dat"
    short.write_text("0.0 1.0\n")
    with pytest.raises(ValueError):
        load_profile_file(str(short))
    partial = tmp_path / "partial.dat"
    partial.write_text("0.2 1.0\n1.0 0.0\n")
    with pytest.raises(ValueError):
        load_profile_file(str(partial))
    dup = tmp_path / "dup.dat"
    dup.write_text("0.0 1.0\n0.5 0.5\n0.5 0.4\n1.0 0.0\n")
    with pytest.raises(ValueError):
        load_profile_file(str(dup))


def test_parse_file_spec(tmp_path):
    path = tmp_path / "prof.dat"
    path.write_text("0 1\n0.5 2\n1 0\n")
    p = parse_profile_spec("file prof.dat", base_dir=str(tmp_path))
    assert p.kind == "tabulated"
    assert alpha_eval(p, 0.25) == pytest.approx(1.5, abs=1e-9)


def test_kinematic_coefficients_published_form():
    # 1.916 (1 - 6 r^2 + 5 r^4)
    assert KINEMATIC_COEFFS == (1.916, 0.0, -1.916 * 6.0, 0.0, 1.916 * 5.0)
