"""Radial alpha-effect profiles: evaluation, derivatives, sup-norms, and the
text grammar used by configuration files.

A profile is a shape times an amplitude C.  The paradigmatic kinematic shape
is 1.916*(1 - 6 r^2 + 5 r^4), whose prefactor normalizes its intensity so
that sup|alpha| = 1.916*C and sup|alpha'| = 8*1.916*C on [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "AlphaProfile",
    "alpha_eval",
    "alpha_deriv",
    "sup_norms",
    "constant_profile",
    "polynomial_profile",
    "kinematic_profile",
    "tabulated_profile",
    "scaled",
    "parse_profile_spec",
    "format_profile_spec",
    "KINEMATIC_COEFFS",
]

# coefficients of r^0..r^4 for the unit-amplitude kinematic shape
KINEMATIC_COEFFS = (1.916, 0.0, -6.0 * 1.916, 0.0, 5.0 * 1.916)


@dataclass(frozen=True)
class AlphaProfile:
    """alpha(r) = C * shape(r) on [0, 1].

    kind is one of "constant", "polynomial", "tabulated".  For polynomials the
    shape is sum_k coefficients[k] * r^k with the exact termwise derivative;
    tabulated shapes interpolate value and derivative tables linearly on a
    uniform grid over [0, 1].
    """

    kind: str
    amplitude: float = 1.0
    coefficients: tuple = ()
    table_values: Optional[np.ndarray] = field(default=None, repr=False)
    table_deriv: Optional[np.ndarray] = field(default=None, repr=False)
    source: str = ""

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial", "tabulated"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "polynomial" and not self.coefficients:
            raise ValueError("polynomial profile needs coefficients")
        if self.kind == "tabulated":
            if self.table_values is None or len(self.table_values) < 2:
                raise ValueError("tabulated profile needs at least 2 values")


def constant_profile(c: float) -> AlphaProfile:
    """alpha(r) = c everywhere."""
    return AlphaProfile(kind="constant", amplitude=float(c))


def polynomial_profile(c: float, coefficients: Sequence[float]) -> AlphaProfile:
    """alpha(r) = c * sum_k coefficients[k] r^k."""
    return AlphaProfile(
        kind="polynomial",
        amplitude=float(c),
        coefficients=tuple(float(x) for x in coefficients),
    )


def kinematic_profile(c: float) -> AlphaProfile:
    """alpha(r) = 1.916 * c * (1 - 6 r^2 + 5 r^4)."""
    return polynomial_profile(c, KINEMATIC_COEFFS)


def tabulated_profile(
    c: float,
    values: np.ndarray,
    deriv: Optional[np.ndarray] = None,
    source: str = "",
) -> AlphaProfile:
    """Shape tabulated on a uniform grid covering [0, 1] (values[0] at r = 0).

    If no derivative table is given it is built by centered differences with
    one-sided second-order stencils at the ends.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) < 2:
        raise ValueError("value table must be a 1-d array with >= 2 entries")
    if deriv is None:
        h = 1.0 / (len(values) - 1)
        deriv = np.gradient(values, h, edge_order=2)
    else:
        deriv = np.asarray(deriv, dtype=float)
        if deriv.shape != values.shape:
            raise ValueError("derivative table must match the value table")
    return AlphaProfile(
        kind="tabulated",
        amplitude=float(c),
        table_values=values,
        table_deriv=deriv,
        source=source,
    )


def scaled(profile: AlphaProfile, factor: float) -> AlphaProfile:
    """Same shape with amplitude multiplied by `factor` (used for C* sweeps)."""
    return AlphaProfile(
        kind=profile.kind,
        amplitude=profile.amplitude * float(factor),
        coefficients=profile.coefficients,
        table_values=profile.table_values,
        table_deriv=profile.table_deriv,
        source=profile.source,
    )


def _check_domain(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < -1e-12) or np.any(r > 1.0 + 1e-12):
        raise ValueError("r outside [0, 1]")
    return np.clip(r, 0.0, 1.0)


def _table_interp(table: np.ndarray, r):
    grid = np.linspace(0.0, 1.0, len(table))
    return np.interp(r, grid, table)


def alpha_eval(profile: AlphaProfile, r):
    """alpha(r); scalar in, scalar out; arrays broadcast elementwise."""
    scalar = np.isscalar(r) or getattr(r, "ndim", 1) == 0
    rr = _check_domain(r)
    if profile.kind == "constant":
        out = np.full_like(rr, profile.amplitude, dtype=float)
    elif profile.kind == "polynomial":
        # Horner in r
        acc = np.zeros_like(rr, dtype=float)
        for c in reversed(profile.coefficients):
            acc = acc * rr + c
        out = profile.amplitude * acc
    else:
        out = profile.amplitude * _table_interp(profile.table_values, rr)
    return float(out) if scalar else out


def alpha_deriv(profile: AlphaProfile, r):
    """d alpha / d r, exact for polynomials, interpolated for tables."""
    scalar = np.isscalar(r) or getattr(r, "ndim", 1) == 0
    rr = _check_domain(r)
    if profile.kind == "constant":
        out = np.zeros_like(rr, dtype=float)
    elif profile.kind == "polynomial":
        acc = np.zeros_like(rr, dtype=float)
        for k in range(len(profile.coefficients) - 1, 0, -1):
            acc = acc * rr + k * profile.coefficients[k]
        out = profile.amplitude * acc
    else:
        out = profile.amplitude * _table_interp(profile.table_deriv, rr)
    return float(out) if scalar else out


def _poly_abs_max(coeffs: Sequence[float], scale: float) -> float:
    """Exact max of |scale * p(r)| on [0, 1] via sign changes of p'.

    A continuous derivative only changes the monotonicity of p where it
    changes sign, so candidate points are the endpoints plus bisected sign
    brackets of p' on a fine scan grid.
    """
    coeffs = np.asarray(coeffs, dtype=float)

    def p(r):
        acc = np.zeros_like(np.asarray(r, dtype=float))
        for c in reversed(coeffs):
            acc = acc * r + c
        return acc

    dcoeffs = coeffs[1:] * np.arange(1, len(coeffs))

    def dp(r):
        acc = np.zeros_like(np.asarray(r, dtype=float))
        for c in reversed(dcoeffs):
            acc = acc * r + c
        return acc

    candidates = [0.0, 1.0]
    xs = np.linspace(0.0, 1.0, 4097)
    ds = dp(xs)
    for i in range(len(xs) - 1):
        if ds[i] == 0.0:
            candidates.append(float(xs[i]))
        elif ds[i] * ds[i + 1] < 0.0:
            a, b, fa = float(xs[i]), float(xs[i + 1]), float(ds[i])
            for _ in range(80):
                m = 0.5 * (a + b)
                fm = float(dp(m))
                if fm == 0.0:
                    a = b = m
                    break
                if fa * fm < 0.0:
                    b = m
                else:
                    a, fa = m, fm
            candidates.append(0.5 * (a + b))
    if ds[-1] == 0.0:
        candidates.append(1.0)
    return abs(scale) * float(np.max(np.abs(p(np.array(candidates)))))


def sup_norms(profile: AlphaProfile) -> tuple:
    """(sup |alpha|, sup |alpha'|) over [0, 1].

    Exact (machine precision) for constant and polynomial kinds; limited by
    the table resolution for tabulated shapes.
    """
    if profile.kind == "constant":
        return abs(profile.amplitude), 0.0
    if profile.kind == "polynomial":
        coeffs = np.asarray(profile.coefficients, dtype=float)
        dcoeffs = coeffs[1:] * np.arange(1, len(coeffs))
        a_norm = _poly_abs_max(coeffs, profile.amplitude)
        d_norm = _poly_abs_max(dcoeffs, profile.amplitude) if len(dcoeffs) else 0.0
        return a_norm, d_norm
    a_norm = abs(profile.amplitude) * float(np.max(np.abs(profile.table_values)))
    d_norm = abs(profile.amplitude) * float(np.max(np.abs(profile.table_deriv)))
    return a_norm, d_norm


# ---------------------------------------------------------------------------
# profile grammar shared with the CLI config:
#   profile = constant <C>
#   profile = poly <C> <exp>:<coef> ...
#   profile = file <path>


def parse_profile_spec(text: str, base_dir: str = ".") -> AlphaProfile:
    """Parse the profile grammar; `file` paths resolve relative to base_dir."""
    parts = text.split()
    if not parts:
        raise ValueError("empty profile specification")
    kind = parts[0]
    if kind == "constant":
        if len(parts) != 2:
            raise ValueError(f"constant profile wants one amplitude, got {text!r}")
        return constant_profile(float(parts[1]))
    if kind == "poly":
        if len(parts) < 3:
            raise ValueError(f"poly profile wants amplitude and terms, got {text!r}")
        c = float(parts[1])
        terms = {}
        for tok in parts[2:]:
            if ":" not in tok:
                raise ValueError(f"poly term must be <exp>:<coef>, got {tok!r}")
            k_str, v_str = tok.split(":", 1)
            k = int(k_str)
            if k < 0:
                raise ValueError(f"negative exponent in {tok!r}")
            terms[k] = terms.get(k, 0.0) + float(v_str)
        coeffs = [0.0] * (max(terms) + 1)
        for k, v in terms.items():
            coeffs[k] = v
        return polynomial_profile(c, coeffs)
    if kind == "file":
        if len(parts) != 2:
            raise ValueError(f"file profile wants one path, got {text!r}")
        import os

        path = parts[1]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return load_profile_file(path)
    raise ValueError(f"unknown profile kind {kind!r} in {text!r}")


def format_profile_spec(profile: AlphaProfile) -> str:
    if profile.kind == "constant":
        return f"constant {profile.amplitude!r}"
    if profile.kind == "polynomial":
        terms = " ".join(
            f"{k}:{c!r}" for k, c in enumerate(profile.coefficients) if c != 0.0
        )
        return f"poly {profile.amplitude!r} {terms}"
    if profile.source:
        return f"file {profile.source}"
    raise ValueError("tabulated profile without a source path cannot be serialized")


def load_profile_file(path: str) -> AlphaProfile:
    """Two-column text (r, alpha), '#' comments; resampled to a uniform grid.

    The samples must cover [0, 1]; values in between are interpolated
    linearly onto 513 uniform nodes.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.replace(",", " ").split()
            if len(cols) != 2:
                raise ValueError(f"{path}: expected two columns, got {line!r}")
            rows.append((float(cols[0]), float(cols[1])))
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two samples")
    rows.sort()
    r = np.array([p[0] for p in rows])
    v = np.array([p[1] for p in rows])
    if r[0] > 1e-9 or r[-1] < 1.0 - 1e-9:
        raise ValueError(f"{path}: samples must cover [0, 1], got [{r[0]}, {r[-1]}]")
    if np.any(np.diff(r) <= 0):
        raise ValueError(f"{path}: radii must be strictly increasing")
    grid = np.linspace(0.0, 1.0, 513)
    return tabulated_profile(1.0, np.interp(grid, r, v), source=path)
