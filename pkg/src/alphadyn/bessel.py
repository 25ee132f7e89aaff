"""Half-integer-order Bessel functions, their positive zeros, and the
diffusive decay rates built from them.

Every order needed by the dynamo operator is of the form nu = l -+ 1/2 with
integer degree l >= 1, so J_nu reduces to spherical Bessel functions:

    J_{n+1/2}(x) = sqrt(2x/pi) * j_n(x),      j_0(x) = sin(x)/x,
    j_1(x) = sin(x)/x^2 - cos(x)/x,
    j_{n+1}(x) = (2n+1)/x * j_n(x) - j_{n-1}(x).

The upward recurrence is numerically stable only for x >= nu; below that the
downward (Miller) recurrence with renormalization is used.  The squares of the
zeros j_{nu,k}, negated, are the decay rates of the free (alpha = 0) field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BesselOrder",
    "RecurrenceUnstableError",
    "bessel_j",
    "bessel_zero",
    "free_decay_eigenvalue",
]


class RecurrenceUnstableError(ValueError):
    """Forward recurrence requested in the regime x < nu where it loses digits."""


@dataclass(frozen=True)
class BesselOrder:
    """Half-integer order nu = l + shift with integer degree l >= 1, shift = -+1/2."""

    l: int
    shift: float

    def __post_init__(self) -> None:
        if self.l < 1:
            raise ValueError(f"degree l must be >= 1, got {self.l}")
        if self.shift not in (-0.5, 0.5):
            raise ValueError(f"shift must be -0.5 or +0.5, got {self.shift}")

    @property
    def nu(self) -> float:
        return self.l + self.shift


def _as_nu(order: BesselOrder | float) -> float:
    nu = order.nu if isinstance(order, BesselOrder) else float(order)
    n = nu - 0.5
    if nu < 0.5 or abs(n - round(n)) > 1e-12:
        raise ValueError(f"order must be a half-integer >= 1/2, got {nu}")
    return nu


def _sph_forward(n: int, x: float) -> float:
    # j_0, j_1 in closed form, then upward in the index.  Stable for x >= n.
    j0 = math.sin(x) / x
    if n == 0:
        return j0
    j1 = j0 / x - math.cos(x) / x
    if n == 1:
        return j1
    jm, jc = j0, j1
    for k in range(1, n):
        jm, jc = jc, (2 * k + 1) / x * jc - jm
    return jc


def _sph_downward(n: int, x: float) -> float:
    # Miller's algorithm: recurse down from a start order well above both n
    # and x with arbitrary seed values, then renormalize against the closed
    # form of whichever of j_0, j_1 is farther from a zero.
    m = n + int(x) + 26
    jp = 0.0
    jc = 1e-30
    jn = 0.0
    for k in range(m, 0, -1):
        jm = (2 * k + 1) / x * jc - jp
        if k - 1 == n:
            jn = jm
        # guard against overflow of the unnormalized recurrence
        if abs(jm) > 1e250:
            jm *= 1e-250
            jc *= 1e-250
            jn *= 1e-250
        jp, jc = jc, jm
    # after the loop jc = unnormalized j_0, jp = unnormalized j_1
    j0_exact = math.sin(x) / x
    j1_exact = j0_exact / x - math.cos(x) / x
    if abs(j0_exact) >= abs(j1_exact):
        return jn * (j0_exact / jc)
    return jn * (j1_exact / jp)


def bessel_j(order: BesselOrder | float, x: float, method: str = "auto") -> float:
    """Bessel function J_nu(x) for half-integer nu >= 1/2 and x > 0.

    `method` selects the recurrence: "auto" picks the stable direction,
    "forward" and "downward" force one (forward raises
    RecurrenceUnstableError when x < nu).
    """
    nu = _as_nu(order)
    x = float(x)
    if x <= 0.0:
        raise ValueError(f"x must be positive, got {x}")
    n = int(round(nu - 0.5))
    if method == "auto":
        use_forward = x >= nu
    elif method == "forward":
        if x < nu:
            raise RecurrenceUnstableError(
                f"forward recurrence is unstable for x = {x} < nu = {nu}"
            )
        use_forward = True
    elif method == "downward":
        use_forward = False
    else:
        raise ValueError(f"unknown method {method!r}")
    jn = _sph_forward(n, x) if use_forward else _sph_downward(n, x)
    return math.sqrt(2.0 * x / math.pi) * jn


# Consecutive zeros of J_nu are separated by more than pi*(1 - o(1)); a scan
# step of pi/4 therefore cannot jump over a sign change for nu <= 21/2.
_SCAN_STEP = math.pi / 4.0


def bessel_zero(order: BesselOrder | float, k: int) -> float:
    """k-th positive zero j_{nu,k} of J_nu, absolute accuracy 1e-10.

    Sign brackets are located on a grid of spacing pi/4 and refined by
    bisection followed by a few secant steps.
    """
    nu = _as_nu(order)
    if k < 1:
        raise ValueError(f"zero index k must be >= 1, got {k}")
    f = lambda x: bessel_j(nu, x)
    # J_nu > 0 on (0, j_{nu,1}); start the scan just right of the origin.
    a = 1e-3
    fa = f(a)
    found = 0
    for _ in range(10000):
        b = a + _SCAN_STEP
        fb = f(b)
        if fa == 0.0:
            found += 1  # grid point hit a zero exactly
            if found == k:
                return a
        elif fa * fb < 0.0:
            found += 1
            if found == k:
                return _refine_zero(f, a, b)
        a, fa = b, fb
    raise RuntimeError(
        f"zero bracketing failed for nu = {nu}, k = {k}; last bracket [{a}, {a + _SCAN_STEP}]"
    )


def _refine_zero(f, a: float, b: float) -> float:
    fa, fb = f(a), f(b)
    for _ in range(80):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
        if b - a < 1e-13:
            break
    # secant polish inside the final bracket
    x0, x1 = a, b
    f0, f1 = fa, fb
    for _ in range(4):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not (a <= x2 <= b):
            break
        x0, f0, x1, f1 = x1, f1, x2, f(x2)
    return x1


def free_decay_eigenvalue(order: BesselOrder | float, k: int) -> float:
    """Decay rate -j_{nu,k}^2 of the free (alpha = 0) field, per diffusion time."""
    z = bessel_zero(order, k)
    return -(z * z)
