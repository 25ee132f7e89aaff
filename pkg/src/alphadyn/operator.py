"""Finite-difference discretization of the spherically symmetric alpha^2
dynamo operator for one spherical-harmonic degree l.

Working variables are y1 = r*s_l (poloidal) and y2 = r*t_l (toroidal) on the
uniform grid r_i = i*h, h = 1/N.  The block operator applied to the stacked
vector (y1, y2) is

    d/dt y1 = y1'' - l(l+1)/r^2 y1 + alpha(r) y2
    d/dt y2 = y2'' - l(l+1)/r^2 y2 - (alpha y1')' + alpha l(l+1)/r^2 y1

with regularity y ~ r^(l+1) at the origin (both components pinned to zero at
the r = 0 ghost node, exact for the continuum problem) and surface conditions
y1'(1) + l*y1(1) = 0 (Robin, via a second-order ghost point) and y2(1) = 0
(Dirichlet, eliminated).  Eliminating the two Dirichlet values leaves
N + (N-1) unknowns, so the assembled matrix is square of size 2N-1: a
constraint row for y2(1) = 0 inside an ordinary eigenproblem would inject a
spurious unit eigenvalue into the physically interesting part of the
spectrum, which is exactly the kind of pollution a non-selfadjoint solver
must avoid.

The lower-left coupling block is discretized in conservative (flux) form with
alpha at half-nodes by default; the mathematically equivalent expansion form
alpha*tau(y) - alpha'*y' is available for cross-checking, and the two agree
to O(h^2) when applied to smooth fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .profiles import AlphaProfile, alpha_deriv, alpha_eval

__all__ = ["RadialGrid", "OperatorMatrix", "assemble", "AssemblyError"]


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes r_i = i*h, i = 1..N, with h = 1/N (so r_N = 1)."""

    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"need at least 16 nodes, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def nodes(self) -> np.ndarray:
        return np.arange(1, self.n + 1) * self.h

    def half_nodes(self) -> np.ndarray:
        # r_{i+1/2} for i = 0..N-1
        return (np.arange(self.n) + 0.5) * self.h


@dataclass
class OperatorMatrix:
    """Dense discretization of the degree-l dynamo operator.

    entries has shape (2N-1, 2N-1); the first N rows/columns belong to y1,
    the remaining N-1 to y2 at interior nodes.  With alpha = 0 the matrix is
    block-diagonal with two symmetric tridiagonal blocks (the Robin boundary
    row is brought to symmetric form by an exact diagonal similarity that
    leaves the spectrum untouched).
    """

    l: int
    grid: RadialGrid
    entries: np.ndarray = field(repr=False)
    scheme: str = "flux"
    profile: AlphaProfile | None = None

    @property
    def n1(self) -> int:
        return self.grid.n

    @property
    def dim(self) -> int:
        return 2 * self.grid.n - 1

    def norm_inf(self) -> float:
        return float(np.abs(self.entries).sum(axis=1).max())


def assemble(
    l: int,
    profile: AlphaProfile,
    grid: RadialGrid,
    scheme: str = "flux",
    symmetrize: bool = True,
) -> OperatorMatrix:
    """Assemble the dense operator matrix.

    scheme selects the discretization of the lower-left coupling block:
    "flux" (conservative, alpha at half-nodes) or "expansion"
    (alpha*tau(y1) - alpha'*y1').  symmetrize applies the exact diagonal
    similarity that makes the alpha = 0 blocks literally symmetric; disable
    it only to inspect the raw boundary closure.
    """
    if l < 1:
        raise ValueError(f"degree l must be >= 1, got {l}")
    if scheme not in ("flux", "expansion"):
        raise ValueError(f"unknown scheme {scheme!r}")
    n = grid.n
    h = grid.h
    r = grid.nodes()
    ll1 = l * (l + 1)

    try:
        a_nodes = np.asarray(alpha_eval(profile, r), dtype=float)
        a_half = np.asarray(alpha_eval(profile, grid.half_nodes()), dtype=float)
        ad_nodes = np.asarray(alpha_deriv(profile, r), dtype=float)
    except Exception as exc:
        raise AssemblyError(f"profile not evaluable on the grid: {exc}") from exc
    if not (
        np.all(np.isfinite(a_nodes))
        and np.all(np.isfinite(a_half))
        and np.all(np.isfinite(ad_nodes))
    ):
        raise AssemblyError("profile produced non-finite values on the grid")

    n1 = n  # y1 unknowns at i = 1..N
    n2 = n - 1  # y2 unknowns at i = 1..N-1
    dim = n1 + n2
    m = np.zeros((dim, dim))
    inv_h2 = 1.0 / (h * h)

    # (1,1) block: y1'' - l(l+1)/r^2 y1, Dirichlet ghost at r = 0,
    # Robin ghost at r = 1: y1(1+h) = y1(1-h) - 2*h*l*y1(1)
    for i in range(n1):
        m[i, i] = -2.0 * inv_h2 - ll1 / (r[i] * r[i])
        if i > 0:
            m[i, i - 1] = inv_h2
        if i < n1 - 1:
            m[i, i + 1] = inv_h2
    m[n1 - 1, n1 - 2] = 2.0 * inv_h2
    m[n1 - 1, n1 - 1] = -(2.0 + 2.0 * h * l) * inv_h2 - ll1

    # (2,2) block: same diffusion operator with Dirichlet at both ends
    for i in range(n2):
        j = n1 + i
        m[j, j] = -2.0 * inv_h2 - ll1 / (r[i] * r[i])
        if i > 0:
            m[j, j - 1] = inv_h2
        if i < n2 - 1:
            m[j, j + 1] = inv_h2

    # (1,2) block: alpha(r_i) * y2_i; no entry in the boundary row since
    # y2(1) = 0
    for i in range(n2):
        m[i, n1 + i] = a_nodes[i]

    # (2,1) block on y2 rows i = 1..N-1
    if scheme == "flux":
        # -(alpha y1')' + alpha l(l+1)/r^2 y1 in conservative form
        for i in range(n2):
            j = n1 + i
            am = a_half[i]  # alpha at r_{i-1/2}
            ap = a_half[i + 1]  # alpha at r_{i+1/2}
            m[j, i] = (am + ap) * inv_h2 + a_nodes[i] * ll1 / (r[i] * r[i])
            if i > 0:
                m[j, i - 1] = -am * inv_h2
            m[j, i + 1] = -ap * inv_h2
    else:
        # alpha * (-y1'' + l(l+1)/r^2 y1) - alpha' * y1'
        inv_2h = 1.0 / (2.0 * h)
        for i in range(n2):
            j = n1 + i
            m[j, i] = 2.0 * a_nodes[i] * inv_h2 + a_nodes[i] * ll1 / (r[i] * r[i])
            if i > 0:
                m[j, i - 1] = -a_nodes[i] * inv_h2 + ad_nodes[i] * inv_2h
            m[j, i + 1] = -a_nodes[i] * inv_h2 - ad_nodes[i] * inv_2h

    if symmetrize:
        # exact diagonal similarity: scale the Robin boundary row/column so
        # the alpha = 0 blocks are literally symmetric (2/h^2 vs 1/h^2
        # off-diagonal pair becomes sqrt(2)/h^2 on both sides).  sigma_inv
        # is bitwise 2*sigma, which makes the transposed pair the same
        # correctly rounded product; the diagonal is left untouched since
        # sigma * sigma_inv would perturb it by an ulp instead of cancelling.
        sigma_inv = math.sqrt(2.0)
        sigma = 0.5 * sigma_inv
        diag = m[n1 - 1, n1 - 1]
        m[n1 - 1, :] *= sigma
        m[:, n1 - 1] *= sigma_inv
        m[n1 - 1, n1 - 1] = diag

    return OperatorMatrix(l=l, grid=grid, entries=m, scheme=scheme, profile=profile)
