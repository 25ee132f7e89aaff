"""Nonlinear time evolution of the degree-1 dynamo field pair.

Evolves the poloidal/toroidal scalars s(r, t) and t(r, t) of the l = 1 mode
under diffusion, alpha coupling with local magnetic-energy quenching, and
piecewise-constant correlated noise.  The default integrator treats the
stiff diffusion blocks with Crank-Nicolson (constant tridiagonal solves)
and the alpha coupling with second-order Adams-Bashforth extrapolation; a
fully explicit third-order Adams-Bashforth variant is available for
cross-checks at small grids.

Internally the scheme advances y1 = r*s and y2 = r*t, whose diffusion
operator is the plain second difference minus l(l+1)/r^2.  The surface
conditions are ds/dr + 2 s = 0 (imposed through a one-sided second-order
closure that determines the boundary value from the two interior neighbors,
so the discrete residual vanishes identically after every step) and
t(1) = 0.  Regularity pins both fields to zero at r = 0.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numba import njit

from .profiles import AlphaProfile, alpha_eval, kinematic_profile, sup_norms

__all__ = [
    "SimConfig",
    "SimState",
    "NoiseState",
    "TimeSeries",
    "SimulationDivergedError",
    "energy_density",
    "energy_profile",
    "quenched_alpha",
    "noise_step",
    "make_noise",
    "initial_state",
    "step",
    "evolve",
    "boundary_residuals",
    "stable_dt",
    "fit_exponential_mode",
    "save_checkpoint",
    "load_checkpoint",
]

L_DEGREE = 1
LL1 = L_DEGREE * (L_DEGREE + 1)


class SimulationDivergedError(RuntimeError):
    def __init__(self, t: float, peak: float):
        self.t, self.peak = t, peak
        super().__init__(f"field exceeded 1e12 at t = {t:.6g} (max |y| = {peak:.3g})")


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one nonlinear run.

    c is the amplitude multiplying the kinematic shape inside the quenching
    law alpha = c*shape/(1 + E/e0_mag) + noise; d_noise is the standard
    deviation of each noise coefficient, redrawn every tau_corr.  dt = None
    picks half the scheme's stability bound (capped at 1e-4).  t_end is the
    duration of one run segment: a run resumed from a saved state advances
    t_end beyond that state's time.
    """

    c: float
    d_noise: float = 0.0
    t_end: float = 10.0
    tau_corr: float = 0.02
    e0_mag: float = 100.0
    n: int = 200
    dt: Optional[float] = None
    seed: int = 0
    record_stride: int = 50
    shape: AlphaProfile = field(default_factory=lambda: kinematic_profile(1.0))
    scheme: str = "cnab2"
    quenching: bool = True
    init_amplitude: float = 1e-4
    snapshot_times: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("need at least 16 radial nodes")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.tau_corr <= 0.0:
            raise ValueError("tau_corr must be positive")
        if self.e0_mag <= 0.0:
            raise ValueError("e0_mag must be positive")
        if self.scheme not in ("cnab2", "ab3"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.dt is not None:
            if self.dt <= 0.0:
                raise ValueError("dt must be positive")
            bound = stable_dt(self)
            if self.dt > bound:
                raise ValueError(
                    f"dt = {self.dt:g} violates the {self.scheme} stability "
                    f"bound {bound:g} for these parameters"
                )

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def effective_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        return min(1e-4, 0.5 * stable_dt(self))


def stable_dt(config: SimConfig) -> float:
    """Conservative step bound for the chosen scheme.

    cnab2: the Crank-Nicolson diffusion damps grid-scale modes while the
    extrapolated coupling weakly amplifies them; balancing the two gives
    dt^3 < 16 / (a^4 k^2) at wavenumber k = pi*n with a an upper bound on
    |alpha| (amplitude plus an 8-sigma-ish noise allowance).  ab3: explicit
    diffusion limit dt < 0.1 h^2.  Both capped by tau_corr/4 so every noise
    epoch is resolved.
    """
    s_sup, _ = sup_norms(config.shape)
    a_bound = max(1.0, abs(config.c) * s_sup + 8.0 * abs(config.d_noise))
    if config.scheme == "ab3":
        bound = 0.1 * config.h * config.h
    else:
        k = math.pi * config.n
        bound = (16.0 / (a_bound**4 * k * k)) ** (1.0 / 3.0)
    return min(bound, 0.25 * config.tau_corr, 1e-3)


@dataclass(frozen=True)
class NoiseState:
    """Piecewise-constant noise coefficients, held fixed within each epoch
    of length tau_corr and redrawn i.i.d. centered with std d_noise."""

    xi: np.ndarray  # 4 coefficients of 1, r^2, r^3, r^4
    epoch: int
    rng: np.random.Generator


def make_noise(config: SimConfig) -> NoiseState:
    rng = np.random.default_rng(config.seed)
    xi = rng.normal(0.0, config.d_noise, 4)
    return NoiseState(xi=xi, epoch=0, rng=rng)


def noise_step(noise: NoiseState, t: float, config: SimConfig) -> NoiseState:
    """Noise state valid at time t.  Epochs are [k tau, (k+1) tau); one draw
    of four coefficients is consumed per epoch in order, so the realization
    at a given epoch depends only on the seed, not on the step size.  The
    input state is left untouched: draws come from a copy of its generator,
    so states really are immutable snapshots and advancing twice from the
    same state gives the same realization."""
    epoch = int(t / config.tau_corr)
    if epoch <= noise.epoch:
        # a state never rewinds; a query from within an already consumed
        # epoch (rounding at a boundary) keeps the current draw
        return noise
    bg = np.random.PCG64()
    bg.state = noise.rng.bit_generator.state
    rng = np.random.Generator(bg)
    xi = noise.xi
    for _ in range(noise.epoch + 1, epoch + 1):
        xi = rng.normal(0.0, config.d_noise, 4)
    return NoiseState(xi=xi, epoch=epoch, rng=rng)


@dataclass
class SimState:
    """Fields and integrator memory at one instant.

    s and tt hold s(r_i) and t(r_i) on the uniform nodes r_i = i/n,
    i = 1..n; tt[-1] is always 0 and s[-1] always satisfies the discrete
    surface closure.  f1/f2 are the previous coupling right-hand sides,
    empty before the first step.  y1/y2 cache the r-weighted fields the
    integrator actually advances, so chains of single steps reproduce a
    fused run bit for bit; treat states as immutable snapshots.
    """

    t: float
    s: np.ndarray
    tt: np.ndarray
    noise: NoiseState
    f1: Optional[np.ndarray] = None
    f2: Optional[np.ndarray] = None
    step_index: int = 0
    y1: Optional[np.ndarray] = None
    y2: Optional[np.ndarray] = None


# --- spatial layout helpers -------------------------------------------------


def _nodes(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / n


def _closure_coeffs(h: float, r: np.ndarray) -> Tuple[float, float]:
    """y1(1) = ca * y1[n-2] + cb * y1[n-3] from the one-sided second-order
    surface condition on s = y1/r."""
    den = 3.0 + 4.0 * h
    ca = 4.0 / (r[-2] * den)
    cb = -1.0 / (r[-3] * den)
    return ca, cb


def initial_state(config: SimConfig) -> SimState:
    """Small smooth seed field: s = amp * r (1 - r), t = 0, with the surface
    value replaced by the discrete closure."""
    n = config.n
    r = _nodes(n)
    s = config.init_amplitude * r * (1.0 - r)
    y1 = r * s
    ca, cb = _closure_coeffs(config.h, r)
    y1[-1] = ca * y1[-2] + cb * y1[-3]
    s = y1 / r
    tt = np.zeros(n)
    return SimState(
        t=0.0, s=s, tt=tt, noise=make_noise(config), y1=y1, y2=np.zeros(n - 1)
    )


# --- pointwise physics ------------------------------------------------------


@njit(cache=True, nogil=True)
def _energy_nodes(y1, y2, r, h, out):
    """Angle-averaged magnetic energy density at every node: 2 s^2/r^2 +
    (dy1/dr)^2/r^2 + t^2, centered differences with one-sided at r = 1."""
    n = y1.shape[0]
    for i in range(n):
        left = y1[i - 1] if i > 0 else 0.0
        if i < n - 1:
            dy = (y1[i + 1] - left) / (2.0 * h)
        else:
            dy = (3.0 * y1[n - 1] - 4.0 * y1[n - 2] + y1[n - 3]) / (2.0 * h)
        s = y1[i] / r[i]
        t = y2[i] / r[i] if i < n - 1 else 0.0
        out[i] = 2.0 * s * s / (r[i] * r[i]) + dy * dy / (r[i] * r[i]) + t * t
    return out


def _state_arrays(state: SimState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(state.s)
    r = _nodes(n)
    y1 = r * state.s
    y2 = (r * state.tt)[: n - 1]
    return r, y1, y2


def energy_profile(state: SimState) -> np.ndarray:
    """Energy density at every grid node."""
    r, y1, y2 = _state_arrays(state)
    out = np.empty(len(r))
    return _energy_nodes(y1, y2, r, r[0], out)


def energy_density(state: SimState, r_i: float) -> float:
    """Energy density at one grid node (r_i must lie on the grid)."""
    n = len(state.s)
    idx = int(round(r_i * n)) - 1
    if idx < 0 or idx >= n or abs((idx + 1) / n - r_i) > 1e-9:
        raise ValueError(f"r = {r_i} is not a grid node of n = {n}")
    return float(energy_profile(state)[idx])


def quenched_alpha(state: SimState, config: SimConfig, r_i: float) -> float:
    """alpha(r, t) = c shape(r) / (1 + E(r, t)/e0) + noise polynomial."""
    e = energy_density(state, r_i) if config.quenching else 0.0
    base = config.c * alpha_eval(config.shape, r_i) / (1.0 + e / config.e0_mag)
    xi = state.noise.xi
    return float(
        base + xi[0] + xi[1] * r_i**2 + xi[2] * r_i**3 + xi[3] * r_i**4
    )


# --- integrator core --------------------------------------------------------


@njit(cache=True, nogil=True)
def _thomas_factor(lo, di, up):
    """LU factors of a constant tridiagonal matrix for repeated solves."""
    m = di.shape[0]
    dp = np.empty(m)
    lp = np.empty(m)
    dp[0] = di[0]
    lp[0] = 0.0
    for i in range(1, m):
        lp[i] = lo[i] / dp[i - 1]
        dp[i] = di[i] - lp[i] * up[i - 1]
    return lp, dp


@njit(cache=True, nogil=True)
def _thomas_solve(lp, dp, up, b, x):
    m = b.shape[0]
    x[0] = b[0]
    for i in range(1, m):
        x[i] = b[i] - lp[i] * x[i - 1]
    x[m - 1] = x[m - 1] / dp[m - 1]
    for i in range(m - 2, -1, -1):
        x[i] = (x[i] - up[i] * x[i + 1]) / dp[i]
    return x


@njit(cache=True, nogil=True)
def _alpha_nodes(y1, y2, r, h, c_amp, e0, quench_on, shape_nodes, xi, energy, out):
    n = y1.shape[0]
    _energy_nodes(y1, y2, r, h, energy)
    for i in range(n):
        base = c_amp * shape_nodes[i]
        if quench_on:
            base = base / (1.0 + energy[i] / e0)
        ri = r[i]
        r2 = ri * ri
        out[i] = base + xi[0] + xi[1] * r2 + xi[2] * r2 * ri + xi[3] * r2 * r2
    return out


@njit(cache=True, nogil=True)
def _coupling(y1, y2, alpha, r, h, f1, f2):
    """Explicit right-hand sides: f1 = alpha*y2 on the poloidal rows,
    f2 = -(alpha y1')' + 2 alpha y1 / r^2 on the toroidal rows (conservative
    form with alpha averaged to half nodes)."""
    n = y1.shape[0]
    m = n - 1
    inv_h2 = 1.0 / (h * h)
    for i in range(m):
        f1[i] = alpha[i] * y2[i]
    for i in range(m):
        left = y1[i - 1] if i > 0 else 0.0
        # inner face of the first cell sits at h/2 where no node exists;
        # linear extrapolation keeps the face value second order
        am = (
            0.5 * (alpha[i - 1] + alpha[i])
            if i > 0
            else 1.5 * alpha[0] - 0.5 * alpha[1]
        )
        ap = 0.5 * (alpha[i] + alpha[i + 1])
        flux = (ap * (y1[i + 1] - y1[i]) - am * (y1[i] - left)) * inv_h2
        f2[i] = -flux + LL1 * alpha[i] * y1[i] / (r[i] * r[i])
    return f1, f2


@njit(cache=True, nogil=True)
def _apply_expl(lo, di, up, x, out):
    m = x.shape[0]
    for i in range(m):
        acc = di[i] * x[i]
        if i > 0:
            acc += lo[i] * x[i - 1]
        if i < m - 1:
            acc += up[i] * x[i + 1]
        out[i] = acc
    return out


@njit(cache=True, nogil=True)
def _cnab2_step(
    y1,
    y2,
    f1_prev,
    f2_prev,
    have_hist,
    xi,
    dt,
    h,
    c_amp,
    e0,
    quench_on,
    shape_nodes,
    r,
    ca,
    cb,
    elo1,
    edi1,
    eup1,
    lp1,
    dp1,
    up1,
    elo2,
    edi2,
    eup2,
    lp2,
    dp2,
    up2,
    scratch,
):
    """One IMEX step: Crank-Nicolson diffusion, AB2 coupling (trapezoidal
    predictor-corrector on the first step).  Mutates y1, y2, f1_prev,
    f2_prev in place."""
    n = y1.shape[0]
    m = n - 1
    energy = scratch[0]
    alpha = scratch[1]
    f1 = scratch[2][:m]
    f2 = scratch[3][:m]
    b1 = scratch[4][:m]
    b2 = scratch[5][:m]
    u1 = scratch[6][:m]
    u2 = scratch[7][:m]

    _alpha_nodes(y1, y2, r, h, c_amp, e0, quench_on, shape_nodes, xi, energy, alpha)
    _coupling(y1, y2, alpha, r, h, f1, f2)

    if have_hist:
        _apply_expl(elo1, edi1, eup1, y1[:m], b1)
        _apply_expl(elo2, edi2, eup2, y2, b2)
        for i in range(m):
            b1[i] += dt * (1.5 * f1[i] - 0.5 * f1_prev[i])
            b2[i] += dt * (1.5 * f2[i] - 0.5 * f2_prev[i])
        _thomas_solve(lp1, dp1, up1, b1, u1)
        _thomas_solve(lp2, dp2, up2, b2, u2)
    else:
        # predictor: CN diffusion + explicit Euler coupling
        _apply_expl(elo1, edi1, eup1, y1[:m], b1)
        _apply_expl(elo2, edi2, eup2, y2, b2)
        for i in range(m):
            u1[i] = b1[i] + dt * f1[i]
            u2[i] = b2[i] + dt * f2[i]
        p1 = scratch[8][:m]
        p2 = scratch[9][:m]
        _thomas_solve(lp1, dp1, up1, u1, p1)
        _thomas_solve(lp2, dp2, up2, u2, p2)
        py1 = scratch[10]
        for i in range(m):
            py1[i] = p1[i]
        py1[n - 1] = ca * p1[m - 1] + cb * p1[m - 2]
        g1 = scratch[11][:m]
        g2 = scratch[12][:m]
        _alpha_nodes(
            py1, p2, r, h, c_amp, e0, quench_on, shape_nodes, xi, energy, alpha
        )
        _coupling(py1, p2, alpha, r, h, g1, g2)
        # corrector: trapezoidal coupling
        for i in range(m):
            u1[i] = b1[i] + 0.5 * dt * (f1[i] + g1[i])
            u2[i] = b2[i] + 0.5 * dt * (f2[i] + g2[i])
        _thomas_solve(lp1, dp1, up1, u1, b1)
        _thomas_solve(lp2, dp2, up2, u2, b2)
        for i in range(m):
            u1[i] = b1[i]
            u2[i] = b2[i]

    peak = 0.0
    for i in range(m):
        y1[i] = u1[i]
        y2[i] = u2[i]
        a = abs(u1[i])
        if a > peak:
            peak = a
        a = abs(u2[i])
        if a > peak:
            peak = a
        f1_prev[i] = f1[i]
        f2_prev[i] = f2[i]
    y1[n - 1] = ca * y1[m - 1] + cb * y1[m - 2]
    return peak


@njit(cache=True, nogil=True)
def _ab3_step(
    y1,
    y2,
    g1_h,
    g2_h,
    n_hist,
    xi,
    dt,
    h,
    c_amp,
    e0,
    quench_on,
    shape_nodes,
    r,
    ca,
    cb,
    tlo1,
    tdi1,
    tup1,
    tlo2,
    tdi2,
    tup2,
    scratch,
):
    """Fully explicit step: AB3 on diffusion plus coupling once two history
    levels exist, Heun (trapezoidal RK2) self-starting steps before that.
    g1_h/g2_h hold the last two right-hand sides, newest in row 0."""
    n = y1.shape[0]
    m = n - 1
    energy = scratch[0]
    alpha = scratch[1]
    g1 = scratch[2][:m]
    g2 = scratch[3][:m]

    def rhs(yy1, yy2, o1, o2):
        _alpha_nodes(
            yy1, yy2, r, h, c_amp, e0, quench_on, shape_nodes, xi, energy, alpha
        )
        _coupling(yy1, yy2, alpha, r, h, o1, o2)
        for i in range(m):
            acc = tdi1[i] * yy1[i]
            if i > 0:
                acc += tlo1[i] * yy1[i - 1]
            if i < m - 1:
                acc += tup1[i] * yy1[i + 1]
            o1[i] += acc
            acc = tdi2[i] * yy2[i]
            if i > 0:
                acc += tlo2[i] * yy2[i - 1]
            if i < m - 1:
                acc += tup2[i] * yy2[i + 1]
            o2[i] += acc

    rhs(y1, y2, g1, g2)
    if n_hist >= 2:
        for i in range(m):
            y1[i] += dt * (
                (23.0 / 12.0) * g1[i]
                - (16.0 / 12.0) * g1_h[0, i]
                + (5.0 / 12.0) * g1_h[1, i]
            )
            y2[i] += dt * (
                (23.0 / 12.0) * g2[i]
                - (16.0 / 12.0) * g2_h[0, i]
                + (5.0 / 12.0) * g2_h[1, i]
            )
    else:
        # Heun predictor-corrector
        p1 = scratch[4][:m]
        p2 = scratch[5][:m]
        py1 = scratch[10]
        for i in range(m):
            p1[i] = y1[i] + dt * g1[i]
            p2[i] = y2[i] + dt * g2[i]
        for i in range(m):
            py1[i] = p1[i]
        py1[n - 1] = ca * p1[m - 1] + cb * p1[m - 2]
        q1 = scratch[6][:m]
        q2 = scratch[7][:m]
        rhs(py1, p2, q1, q2)
        for i in range(m):
            y1[i] += 0.5 * dt * (g1[i] + q1[i])
            y2[i] += 0.5 * dt * (g2[i] + q2[i])
    peak = 0.0
    for i in range(m):
        a = abs(y1[i])
        if a > peak:
            peak = a
        a = abs(y2[i])
        if a > peak:
            peak = a
        g1_h[1, i] = g1_h[0, i]
        g2_h[1, i] = g2_h[0, i]
        g1_h[0, i] = g1[i]
        g2_h[0, i] = g2[i]
    y1[n - 1] = ca * y1[m - 1] + cb * y1[m - 2]
    return peak


class _Workspace:
    """Precomputed grid, operator and solver coefficients for one config."""

    def __init__(self, config: SimConfig):
        n = config.n
        h = config.h
        r = _nodes(n)
        self.n, self.h, self.r = n, h, r
        self.ca, self.cb = _closure_coeffs(h, r)
        self.shape_nodes = np.asarray(alpha_eval(config.shape, r), dtype=float)
        inv_h2 = 1.0 / (h * h)
        m = n - 1

        # diffusion operator on the m poloidal unknowns, surface closure
        # folded into the last row
        lo1 = np.full(m, inv_h2)
        di1 = -2.0 * inv_h2 - LL1 / (r[:m] * r[:m])
        up1 = np.full(m, inv_h2)
        lo1[0] = 0.0
        up1[m - 1] = 0.0
        di1[m - 1] += self.ca * inv_h2
        lo1[m - 1] += self.cb * inv_h2
        # toroidal block: Dirichlet at both ends
        lo2 = np.full(m, inv_h2)
        di2 = -2.0 * inv_h2 - LL1 / (r[:m] * r[:m])
        up2 = np.full(m, inv_h2)
        lo2[0] = 0.0
        up2[m - 1] = 0.0
        self.tri1 = (lo1, di1, up1)
        self.tri2 = (lo2, di2, up2)

        dt = config.effective_dt()
        self.dt = dt
        half = 0.5 * dt
        # explicit half: I + dt/2 T ; implicit half: I - dt/2 T
        self.elo1, self.edi1, self.eup1 = half * lo1, 1.0 + half * di1, half * up1
        self.elo2, self.edi2, self.eup2 = half * lo2, 1.0 + half * di2, half * up2
        ilo1, idi1, iup1 = -half * lo1, 1.0 - half * di1, -half * up1
        ilo2, idi2, iup2 = -half * lo2, 1.0 - half * di2, -half * up2
        self.lp1, self.dp1 = _thomas_factor(ilo1, idi1, iup1)
        self.up1 = iup1
        self.lp2, self.dp2 = _thomas_factor(ilo2, idi2, iup2)
        self.up2 = iup2
        self.scratch = np.zeros((13, n))

    def step_once(self, y1, y2, f1, f2, have_hist, xi, config):
        if config.scheme == "cnab2":
            return _cnab2_step(
                y1,
                y2,
                f1,
                f2,
                have_hist,
                xi,
                self.dt,
                self.h,
                config.c,
                config.e0_mag,
                config.quenching,
                self.shape_nodes,
                self.r,
                self.ca,
                self.cb,
                self.elo1,
                self.edi1,
                self.eup1,
                self.lp1,
                self.dp1,
                self.up1,
                self.elo2,
                self.edi2,
                self.eup2,
                self.lp2,
                self.dp2,
                self.up2,
                self.scratch,
            )
        raise ValueError("step_once only drives the cnab2 scheme")


def step(state: SimState, config: SimConfig) -> SimState:
    """Advance one time step; returns a new state (inputs untouched)."""
    ws = _Workspace(config)
    n = config.n
    r = ws.r
    y1 = state.y1.copy() if state.y1 is not None else r * state.s
    y2 = (
        state.y2.copy()
        if state.y2 is not None
        else (r * state.tt)[: n - 1].copy()
    )
    noise = noise_step(state.noise, state.t, config)
    if config.scheme == "cnab2":
        have = state.f1 is not None and state.f1.ndim == 1
        f1 = state.f1.copy() if have else np.zeros(n - 1)
        f2 = state.f2.copy() if have else np.zeros(n - 1)
        peak = ws.step_once(y1, y2, f1, f2, have, noise.xi, config)
    else:
        # ab3 keeps two right-hand-side levels, newest first
        if state.f1 is not None and state.f1.ndim == 2:
            g1_h = state.f1.copy()
            g2_h = state.f2.copy()
            n_hist = min(state.step_index, 2)
        else:
            g1_h = np.zeros((2, n - 1))
            g2_h = np.zeros((2, n - 1))
            n_hist = 0
        peak = _ab3_step(
            y1,
            y2,
            g1_h,
            g2_h,
            n_hist,
            noise.xi,
            ws.dt,
            ws.h,
            config.c,
            config.e0_mag,
            config.quenching,
            ws.shape_nodes,
            r,
            ws.ca,
            ws.cb,
            *ws.tri1,
            *ws.tri2,
            ws.scratch,
        )
        f1, f2 = g1_h, g2_h
    if peak > 1e12:
        raise SimulationDivergedError(state.t + ws.dt, peak)
    s = y1 / r
    tt = np.zeros(n)
    tt[: n - 1] = y2 / r[: n - 1]
    return SimState(
        t=state.t + ws.dt,
        s=s,
        tt=tt,
        noise=noise,
        f1=f1,
        f2=f2,
        step_index=state.step_index + 1,
        y1=y1,
        y2=y2,
    )


def boundary_residuals(state: SimState) -> Tuple[float, float]:
    """(|ds/dr + 2 s| at r = 1 via the one-sided difference, |t(1)|)."""
    n = len(state.s)
    h = 1.0 / n
    s = state.s
    res_s = abs((3.0 * s[-1] - 4.0 * s[-2] + s[-3]) / (2.0 * h) + 2.0 * s[-1])
    return res_s, abs(state.tt[-1])


# --- full runs --------------------------------------------------------------


@njit(cache=True, nogil=True)
def _max_epoch(t0, dt, n_steps, tau):
    """Largest noise epoch the stepping loop will touch, found by replaying
    the exact floating-point time accumulation of the kernel.  Sizing the
    draw table from the nominal end time instead can run one epoch ahead
    at a boundary, which would desynchronize resumed runs."""
    t = t0
    e = int(t0 / tau)
    for _ in range(n_steps):
        ek = int(t / tau)
        if ek > e:
            e = ek
        t = t + dt
    return e


@njit(cache=True, nogil=True)
def _run_cnab2(
    y1,
    y2,
    f1,
    f2,
    hist0,
    n_steps,
    t0,
    dt,
    h,
    tau,
    c_amp,
    e0,
    quench_on,
    shape_nodes,
    r,
    ca,
    cb,
    elo1,
    edi1,
    eup1,
    lp1,
    dp1,
    up1,
    elo2,
    edi2,
    eup2,
    lp2,
    dp2,
    up2,
    scratch,
    xi_table,
    stride,
    rec_t,
    rec_d,
    rec_tor,
    rec_e,
    mid_idx,
    snap_steps,
    snap_out,
    sat_start,
    sat_accum,
):
    n = y1.shape[0]
    t = t0
    rec_i = 0
    sat_count = 0
    n_snap = snap_steps.shape[0]
    energy = scratch[0]
    for k in range(n_steps + 1):
        epoch = int(t / tau)
        if epoch >= xi_table.shape[0]:
            epoch = xi_table.shape[0] - 1
        xi = xi_table[epoch]
        if k % stride == 0:
            _energy_nodes(y1, y2, r, h, energy)
            tot = 0.5 * energy[n - 1] * r[n - 1] * r[n - 1]
            for i in range(n - 1):
                tot += energy[i] * r[i] * r[i]
            rec_t[rec_i] = t
            rec_d[rec_i] = y1[n - 1]
            rec_tor[rec_i] = y2[mid_idx] / r[mid_idx]
            rec_e[rec_i] = tot * h
            rec_i += 1
        for j in range(n_snap):
            if snap_steps[j] == k:
                _alpha_nodes(
                    y1,
                    y2,
                    r,
                    h,
                    c_amp,
                    e0,
                    quench_on,
                    shape_nodes,
                    xi,
                    energy,
                    snap_out[j],
                )
        if k >= sat_start:
            _alpha_nodes(
                y1, y2, r, h, c_amp, e0, quench_on, shape_nodes, xi, energy,
                scratch[1],
            )
            for i in range(n):
                sat_accum[i] += scratch[1][i]
            sat_count += 1
        if k == n_steps:
            break
        peak = _cnab2_step(
            y1,
            y2,
            f1,
            f2,
            hist0 or k > 0,
            xi,
            dt,
            h,
            c_amp,
            e0,
            quench_on,
            shape_nodes,
            r,
            ca,
            cb,
            elo1,
            edi1,
            eup1,
            lp1,
            dp1,
            up1,
            elo2,
            edi2,
            eup2,
            lp2,
            dp2,
            up2,
            scratch,
        )
        if peak > 1e12:
            return rec_i, sat_count, t, peak
        t = t + dt
    return rec_i, sat_count, t, 0.0


@dataclass(frozen=True)
class TimeSeries:
    """Sampled diagnostics of one run, all in diffusion-time units.

    dipole is the surface poloidal amplitude s(1, t) (the dipole proxy),
    toroidal_mid is t(r, t) at the node nearest r = 1/2, energy the volume
    integral of the energy density times r^2.
    """

    t: np.ndarray
    dipole: np.ndarray
    toroidal_mid: np.ndarray
    energy: np.ndarray
    config: Optional[SimConfig] = None
    alpha_snapshots: Tuple[Tuple[float, np.ndarray], ...] = ()
    saturated_alpha: Optional[np.ndarray] = None
    final_state: Optional[SimState] = None

    @property
    def r_nodes(self) -> np.ndarray:
        return _nodes(self.config.n)

    def saturated_profile(self) -> AlphaProfile:
        """Time-averaged effective alpha of the saturated regime as a
        tabulated shape (origin value filled by quadratic extrapolation),
        ready for spectral analysis."""
        if self.saturated_alpha is None:
            raise ValueError("run recorded no saturated average")
        v = self.saturated_alpha
        v0 = 3.0 * v[0] - 3.0 * v[1] + v[2]
        table = np.concatenate(([v0], v))
        from .profiles import tabulated_profile

        return tabulated_profile(1.0, table, source="saturated run average")


def evolve(config: SimConfig, init: Optional[SimState] = None) -> TimeSeries:
    """Run the full simulation and sample diagnostics every record_stride
    steps.  Deterministic: identical config and seed give identical output.
    The time-averaged quenched alpha over the last quarter of the run is
    exported for spectral analysis of the saturated regime."""
    if config.scheme != "cnab2":
        return _evolve_python(config, init)
    ws = _Workspace(config)
    n, dt = config.n, ws.dt
    state = initial_state(config) if init is None else init
    r = ws.r
    y1 = state.y1.copy() if state.y1 is not None else r * state.s
    y2 = (
        state.y2.copy()
        if state.y2 is not None
        else (r * state.tt)[: n - 1].copy()
    )
    hist0 = state.f1 is not None and state.f1.ndim == 1
    f1 = state.f1.copy() if hist0 else np.zeros(n - 1)
    f2 = state.f2.copy() if hist0 else np.zeros(n - 1)

    n_steps = int(round(config.t_end / dt))
    # noise realization for every epoch the run will touch, drawn through the
    # same chain the incremental API uses; epoch probes at midpoints so float
    # rounding at the boundaries cannot skip a draw
    noise = state.noise
    n_epochs = max(_max_epoch(state.t, dt, n_steps, config.tau_corr), noise.epoch) + 1
    xi_table = np.zeros((n_epochs, 4))
    xi_table[: noise.epoch + 1] = noise.xi
    probe = noise
    for e in range(noise.epoch + 1, n_epochs):
        probe = noise_step(probe, (e + 0.5) * config.tau_corr, config)
        xi_table[e] = probe.xi

    n_rec = n_steps // config.record_stride + 1
    rec_t = np.zeros(n_rec)
    rec_d = np.zeros(n_rec)
    rec_tor = np.zeros(n_rec)
    rec_e = np.zeros(n_rec)
    mid_idx = min(n - 2, max(0, int(round(0.5 * n)) - 1))
    snap_steps = np.array(
        [int(round(ts / dt)) for ts in config.snapshot_times], dtype=np.int64
    )
    snap_out = np.zeros((len(snap_steps), n))
    sat_start = int(0.75 * n_steps)
    sat_accum = np.zeros(n)

    rec_i, sat_count, t_last, peak = _run_cnab2(
        y1,
        y2,
        f1,
        f2,
        hist0,
        n_steps,
        state.t,
        dt,
        ws.h,
        config.tau_corr,
        config.c,
        config.e0_mag,
        config.quenching,
        ws.shape_nodes,
        r,
        ws.ca,
        ws.cb,
        ws.elo1,
        ws.edi1,
        ws.eup1,
        ws.lp1,
        ws.dp1,
        ws.up1,
        ws.elo2,
        ws.edi2,
        ws.eup2,
        ws.lp2,
        ws.dp2,
        ws.up2,
        ws.scratch,
        xi_table,
        config.record_stride,
        rec_t,
        rec_d,
        rec_tor,
        rec_e,
        mid_idx,
        snap_steps,
        snap_out,
        sat_start,
        sat_accum,
    )
    if peak > 0.0:
        raise SimulationDivergedError(t_last, peak)

    s = y1 / r
    tt = np.zeros(n)
    tt[: n - 1] = y2 / r[: n - 1]
    final = SimState(
        t=t_last,
        s=s,
        tt=tt,
        noise=probe,
        f1=f1,
        f2=f2,
        step_index=state.step_index + n_steps,
        y1=y1,
        y2=y2,
    )
    snaps = tuple(
        (float(snap_steps[j] * dt), snap_out[j].copy())
        for j in range(len(snap_steps))
    )
    sat = sat_accum / sat_count if sat_count > 0 else None
    return TimeSeries(
        t=rec_t[:rec_i],
        dipole=rec_d[:rec_i],
        toroidal_mid=rec_tor[:rec_i],
        energy=rec_e[:rec_i],
        config=config,
        alpha_snapshots=snaps,
        saturated_alpha=sat,
        final_state=final,
    )


def _evolve_python(config: SimConfig, init: Optional[SimState]) -> TimeSeries:
    """Reference driver stepping through the public API (used by the ab3
    scheme; slower, intended for small grids and short runs)."""
    state = initial_state(config) if init is None else init
    dt = config.effective_dt()
    n_steps = int(round(config.t_end / dt))
    rec_t: List[float] = []
    rec_d: List[float] = []
    rec_tor: List[float] = []
    rec_e: List[float] = []
    n = config.n
    mid_idx = min(n - 2, max(0, int(round(0.5 * n)) - 1))
    for k in range(n_steps + 1):
        if k % config.record_stride == 0:
            prof = energy_profile(state)
            r = _nodes(n)
            tot = float(np.sum(prof[:-1] * r[:-1] ** 2) + 0.5 * prof[-1]) / n
            rec_t.append(state.t)
            rec_d.append(float(state.s[-1]))
            rec_tor.append(float(state.tt[mid_idx]))
            rec_e.append(tot)
        if k == n_steps:
            break
        state = step(state, config)
    return TimeSeries(
        t=np.array(rec_t),
        dipole=np.array(rec_d),
        toroidal_mid=np.array(rec_tor),
        energy=np.array(rec_e),
        config=config,
        final_state=state,
    )


# --- diagnostics ------------------------------------------------------------


def fit_exponential_mode(
    times: np.ndarray, values: np.ndarray
) -> Tuple[float, float]:
    """(growth rate, frequency) of a single exponentially growing or
    decaying, possibly oscillating mode A e^{pt} cos(2 pi f t + phi).

    Uses the two-term linear recurrence satisfied by uniform samples of
    such a signal (least squares), so no nonlinear fitting is involved.
    Returns frequency 0 for a non-oscillatory signal.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 8:
        raise ValueError("need at least 8 samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-6):
        raise ValueError("samples must be uniform in time")
    scale = np.abs(v).max()
    if scale == 0.0:
        raise ValueError("signal is identically zero")
    v = v / scale
    a_mat = np.stack([v[1:-1], v[:-2]], axis=1)
    rhs = v[2:]
    coef, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    a, b = float(coef[0]), float(coef[1])
    disc = a * a + 4.0 * b
    if disc >= 0.0:
        roots = [0.5 * (a + math.sqrt(disc)), 0.5 * (a - math.sqrt(disc))]
        z = max(roots, key=abs)
        if z <= 0.0:
            raise ValueError("dominant recurrence root is not positive")
        return math.log(z) / dt, 0.0
    z = complex(0.5 * a, 0.5 * math.sqrt(-disc))
    lam = np.log(z) / dt
    return float(lam.real), float(abs(lam.imag)) / (2.0 * math.pi)


# --- checkpointing ----------------------------------------------------------

_CKPT_MAGIC = b"ADYN"
_CKPT_VERSION = 3

# Byte layout (all little-endian):
#   0:4    magic "ADYN"
#   4:8    format version (u32)
#   8:12   n nodes (u32)
#   12:16  flags (u32; bit 0: history present, bit 1: r-weighted caches)
#   16:24  time t (f64)
#   24:32  step index (u64)
#   32:40  noise epoch (u64)
#   40:72  noise xi (4 x f64)
#   72:88  PCG64 state (u128 le)
#   88:104 PCG64 increment (u128 le)
#   104:108 has_uint32 (u32)
#   108:112 uinteger (u32)
#   112:   s (n x f64), tt (n x f64), then if flags&1: f1, f2 ((n-1) x f64
#          each), then if flags&2: y1 (n x f64), y2 ((n-1) x f64)
#
# Only the newest right-hand-side level is stored; a resumed ab3 run
# re-primes itself with its self-starting steps.  The y caches are the
# r-weighted fields the integrator advances; storing them keeps resumed
# runs bit-identical to uninterrupted ones (s = y1/r roundtrips are not
# exact in floating point).


def save_checkpoint(path: str, state: SimState) -> None:
    n = len(state.s)
    bg = state.noise.rng.bit_generator
    st = bg.state["state"]
    has32 = int(bg.state.get("has_uint32", 0))
    uint = int(bg.state.get("uinteger", 0))
    f1 = state.f1 if state.f1 is None or state.f1.ndim == 1 else state.f1[0]
    f2 = state.f2 if state.f2 is None or state.f2.ndim == 1 else state.f2[0]
    flags = 1 if f1 is not None else 0
    if state.y1 is not None and state.y2 is not None:
        flags |= 2
    head = struct.pack(
        "<4sIIIdQQ",
        _CKPT_MAGIC,
        _CKPT_VERSION,
        n,
        flags,
        state.t,
        state.step_index,
        state.noise.epoch,
    )
    body = [head]
    body.append(np.asarray(state.noise.xi, dtype="<f8").tobytes())
    body.append(int(st["state"]).to_bytes(16, "little"))
    body.append(int(st["inc"]).to_bytes(16, "little"))
    body.append(struct.pack("<II", has32, uint))
    body.append(np.asarray(state.s, dtype="<f8").tobytes())
    body.append(np.asarray(state.tt, dtype="<f8").tobytes())
    if flags & 1:
        body.append(np.asarray(f1, dtype="<f8").tobytes())
        body.append(np.asarray(f2, dtype="<f8").tobytes())
    if flags & 2:
        body.append(np.asarray(state.y1, dtype="<f8").tobytes())
        body.append(np.asarray(state.y2, dtype="<f8").tobytes())
    blob = b"".join(body)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> SimState:
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        magic, version, n, flags, t, step_index, epoch = struct.unpack_from(
            "<4sIIIdQQ", blob, 0
        )
    except struct.error as exc:
        raise ValueError(f"{path}: not a checkpoint file") from exc
    if magic != _CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if version != _CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 40
    xi = np.frombuffer(blob, dtype="<f8", count=4, offset=off).copy()
    off += 32
    pcg_state = int.from_bytes(blob[off : off + 16], "little")
    off += 16
    pcg_inc = int.from_bytes(blob[off : off + 16], "little")
    off += 16
    has32, uint = struct.unpack_from("<II", blob, off)
    off += 8
    s = np.frombuffer(blob, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    tt = np.frombuffer(blob, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    f1 = f2 = None
    if flags & 1:
        f1 = np.frombuffer(blob, dtype="<f8", count=n - 1, offset=off).copy()
        off += 8 * (n - 1)
        f2 = np.frombuffer(blob, dtype="<f8", count=n - 1, offset=off).copy()
        off += 8 * (n - 1)
    y1 = y2 = None
    if flags & 2:
        y1 = np.frombuffer(blob, dtype="<f8", count=n, offset=off).copy()
        off += 8 * n
        y2 = np.frombuffer(blob, dtype="<f8", count=n - 1, offset=off).copy()
    bg = np.random.PCG64()
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": pcg_state, "inc": pcg_inc},
        "has_uint32": int(has32),
        "uinteger": int(uint),
    }
    rng = np.random.Generator(bg)
    noise = NoiseState(xi=xi, epoch=int(epoch), rng=rng)
    return SimState(
        t=float(t),
        s=s,
        tt=tt,
        noise=noise,
        f1=f1,
        f2=f2,
        step_index=int(step_index),
        y1=y1,
        y2=y2,
    )
