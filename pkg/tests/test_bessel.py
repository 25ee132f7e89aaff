import math

import numpy as np
import pytest

from alphadyn.bessel import (
    BesselOrder,
    RecurrenceUnstableError,
    bessel_j,
    bessel_zero,
    free_decay_eigenvalue,
)
from oracles import bessel_series


def test_j_half_at_pi_is_zero():
    assert abs(bessel_j(0.5, math.pi)) < 1e-15


def test_j_three_halves_near_first_zero():
    assert abs(bessel_j(1.5, 4.493409)) < 1e-6


def test_series_oracle_low_orders():
    for nu in (0.5, 1.5, 2.5, 3.5, 5.5):
        for x in (0.1, 0.5, 1.0, 2.0, 5.0):
            ref = bessel_series(nu, x)
            assert bessel_j(nu, x) == pytest.approx(ref, abs=1e-10, rel=1e-10)


def test_series_oracle_example_value():
    # nu = 5/2 at x = 1 against the 40-term ascending series
    assert bessel_j(2.5, 1.0) == pytest.approx(bessel_series(2.5, 1.0, 40), abs=1e-10)


def test_relative_accuracy_across_range():
    # spot-check against the series with enough terms for x up to 30; the
    # series loses float accuracy beyond that, so large x is covered by the
    # closed-form sin/cos structure itself
    rng = np.random.default_rng(7)
    for _ in range(200):
        nu = 0.5 + rng.integers(0, 10)
        x = float(rng.uniform(0.05, 30.0))
        ref = bessel_series(nu, x, terms=60)
        if abs(ref) < 1e-8:
            continue
        assert abs(bessel_j(nu, x) - ref) <= 1e-12 * abs(ref) + 1e-14


def test_forward_refused_when_unstable():
    with pytest.raises(RecurrenceUnstableError):
        bessel_j(10.5, 1.0, method="forward")


def test_forward_downward_agree_when_both_stable():
    for nu in (0.5, 2.5, 4.5):
        for x in (6.0, 11.0, 40.0):
            a = bessel_j(nu, x, method="forward")
            b = bessel_j(nu, x, method="downward")
            assert a == pytest.approx(b, rel=1e-11, abs=1e-13)


def test_domain_errors():
    with pytest.raises(ValueError):
        bessel_j(0.5, 0.0)
    with pytest.raises(ValueError):
        bessel_j(0.5, -1.0)
    with pytest.raises(ValueError):
        bessel_j(0.7, 1.0)
    with pytest.raises(ValueError):
        BesselOrder(0, 0.5)


def test_order_object_accepted():
    order = BesselOrder(l=1, shift=0.5)
    assert order.nu == 1.5
    assert bessel_j(order, 2.0) == bessel_j(1.5, 2.0)
    assert bessel_zero(order, 1) == bessel_zero(1.5, 1)


def test_zeros_of_half_order_are_k_pi():
    for k in (1, 2, 3, 7):
        assert abs(bessel_zero(0.5, k) - k * math.pi) < 1e-10


def test_first_zero_three_halves():
    assert bessel_zero(1.5, 1) == pytest.approx(4.493409, abs=5e-7)


def test_zero_residuals_small():
    for nu in (0.5, 1.5, 2.5, 6.5, 10.5):
        for k in (1, 2, 5, 12):
            z = bessel_zero(nu, k)
            assert abs(bessel_j(nu, z)) < 1e-9


def test_interlacing_l_1_to_10():
    for l in range(1, 11):
        lo = [bessel_zero(l - 0.5, k) for k in (1, 2, 3)]
        hi = [bessel_zero(l + 0.5, k) for k in (1, 2, 3)]
        assert lo[0] < hi[0] < lo[1] < hi[1] < lo[2] < hi[2]


def test_monotonicity_in_order():
    j_half_1 = bessel_zero(0.5, 1)
    j_three_halves_1 = bessel_zero(1.5, 1)
    for l in range(1, 11):
        assert j_half_1 <= bessel_zero(l - 0.5, 1) + 1e-12
        assert j_three_halves_1 <= bessel_zero(l + 0.5, 1) + 1e-12


def test_zero_spacing_bounded():
    # j_{nu,k} - k*pi stays bounded in k for fixed nu
    for nu in (0.5, 1.5, 4.5):
        offsets = [bessel_zero(nu, k) - k * math.pi for k in range(1, 51)]
        assert max(offsets) - min(offsets) < math.pi
        assert all(abs(o) < 3 * math.pi for o in offsets)


def test_free_decay_values():
    assert free_decay_eigenvalue(0.5, 1) == pytest.approx(-math.pi**2, abs=1e-9)
    assert free_decay_eigenvalue(0.5, 2) == pytest.approx(-4 * math.pi**2, abs=1e-8)
    assert free_decay_eigenvalue(1.5, 1) == pytest.approx(-20.1907, abs=1e-4)
    z = bessel_zero(1.5, 1)
    assert free_decay_eigenvalue(1.5, 1) == -z * z
