"""Dense real nonsymmetric eigensolver and eigenvalue branch matching.

The solver is self-contained: balancing (diagonal powers-of-two similarity),
Householder reduction to upper Hessenberg form, and Francis double-shift QR
iteration with aggressive 1x1 / 2x2 deflation, following the classic
eigenvalues-only formulation (Wilkinson; EISPACK hqr).  Complex eigenvalues
are produced as exact conjugate pairs from trailing 2x2 blocks, so conjugate
symmetry of real-matrix spectra holds by construction.

Matrices that are already Hessenberg (in particular the exactly
block-tridiagonal free-decay operators) skip the reduction, and zero
subdiagonal entries split the iteration into independent diagonal blocks, so
the alpha = 0 reference spectra cost a fraction of a dense solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

__all__ = [
    "EigenPair",
    "SpectrumResult",
    "BranchMatch",
    "EigenConvergenceError",
    "eigenvalues",
    "match_branches",
    "residuals",
]

_EPS = np.finfo(np.float64).eps


class EigenConvergenceError(RuntimeError):
    """QR iteration failed to deflate a submatrix within the sweep budget."""

    def __init__(self, lo: int, hi: int, sweeps: int):
        self.lo, self.hi, self.sweeps = lo, hi, sweeps
        super().__init__(
            f"QR iteration stuck on rows {lo}..{hi} after {sweeps} sweeps"
        )


@njit(cache=True, nogil=True)
def _balance(a):
    """In-place diagonal similarity scaling with powers of 2 (radix) so that
    row and column norms become comparable; returns the scale vector."""
    n = a.shape[0]
    scale = np.ones(n)
    radix = 2.0
    sq = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            c = 0.0
            r = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sq
            g = r * radix
            while c >= g:
                f /= radix
                c /= sq
            if (c + r) / f < 0.95 * s:
                done = False
                scale[i] *= f
                recip = 1.0 / f
                for j in range(n):
                    a[i, j] *= recip
                for j in range(n):
                    a[j, i] *= f
    return scale


@njit(cache=True, nogil=True)
def _hessenberg(a):
    """In-place Householder reduction to upper Hessenberg form (similarity;
    the orthogonal factor is not accumulated since only eigenvalues are
    needed)."""
    n = a.shape[0]
    w = np.empty(n)
    v = np.empty(n)
    for k in range(n - 2):
        scale = 0.0
        for i in range(k + 1, n):
            scale += abs(a[i, k])
        if scale == 0.0:
            continue
        m = n - k - 1  # reflector length
        normx = 0.0
        for i in range(m):
            v[i] = a[k + 1 + i, k] / scale
            normx += v[i] * v[i]
        normx = math.sqrt(normx)
        if normx == 0.0:
            continue
        alpha = -normx if v[0] >= 0.0 else normx
        v[0] -= alpha
        vnorm2 = 0.0
        for i in range(m):
            vnorm2 += v[i] * v[i]
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        # left: A[k+1:, k+1:] -= beta v (v^T A[k+1:, k+1:])
        for j in range(k + 1, n):
            w[j] = 0.0
        for i in range(m):
            vi = v[i]
            for j in range(k + 1, n):
                w[j] += vi * a[k + 1 + i, j]
        for i in range(m):
            s = beta * v[i]
            for j in range(k + 1, n):
                a[k + 1 + i, j] -= s * w[j]
        # right: A[:, k+1:] -= beta (A[:, k+1:] v) v^T
        for i in range(n):
            s = 0.0
            for j in range(m):
                s += a[i, k + 1 + j] * v[j]
            s *= beta
            for j in range(m):
                a[i, k + 1 + j] -= s * v[j]
        a[k + 1, k] = scale * alpha
        for i in range(k + 2, n):
            a[i, k] = 0.0
    return a


@njit(cache=True, nogil=True)
def _hqr(h, max_total):
    """Francis double-shift QR on an upper Hessenberg matrix, eigenvalues
    only, with deflation splitting at negligible subdiagonals and
    exceptional shifts against stagnation.  Returns (wr, wi, sweeps,
    fail_lo, fail_hi); fail_lo >= 0 flags a stuck submatrix."""
    n = h.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = 0.0
    for i in range(n):
        jlo = i - 1 if i > 0 else 0
        for j in range(jlo, n):
            anorm += abs(h[i, j])
    if anorm == 0.0:
        return wr, wi, 0, -1, -1
    en = n - 1
    t_shift = 0.0
    total = 0
    its = 0
    p = 0.0
    q = 0.0
    rloc = 0.0
    while en >= 0:
        l = en
        while l > 0:
            s = abs(h[l - 1, l - 1]) + abs(h[l, l])
            if s == 0.0:
                s = anorm
            if abs(h[l, l - 1]) <= _EPS * s:
                h[l, l - 1] = 0.0
                break
            l -= 1
        x = h[en, en]
        if l == en:
            wr[en] = x + t_shift
            wi[en] = 0.0
            en -= 1
            its = 0
            continue
        y = h[en - 1, en - 1]
        w = h[en, en - 1] * h[en - 1, en]
        if l == en - 1:
            pp = 0.5 * (y - x)
            qq = pp * pp + w
            zz = math.sqrt(abs(qq))
            x_t = x + t_shift
            if qq >= 0.0:
                zz = pp + (zz if pp >= 0.0 else -zz)
                wr[en - 1] = x_t + zz
                wr[en] = wr[en - 1]
                if zz != 0.0:
                    wr[en] = x_t - w / zz
                wi[en - 1] = 0.0
                wi[en] = 0.0
            else:
                wr[en - 1] = x_t + pp
                wr[en] = x_t + pp
                wi[en - 1] = zz
                wi[en] = -zz
            en -= 2
            its = 0
            continue
        if its == 30 or total >= max_total:
            return wr, wi, total, l, en
        if its == 10 or its == 20:
            # exceptional shift
            t_shift += x
            for i in range(en + 1):
                h[i, i] -= x
            s = abs(h[en, en - 1]) + abs(h[en - 1, en - 2])
            x = 0.75 * s
            y = x
            w = -0.4375 * s * s
        its += 1
        total += 1
        # two consecutive small subdiagonals let the bulge start deeper
        m = en - 2
        while m >= l:
            zz = h[m, m]
            rr = x - zz
            ss = y - zz
            p = (rr * ss - w) / h[m + 1, m] + h[m, m + 1]
            q = h[m + 1, m + 1] - zz - rr - ss
            rloc = h[m + 2, m + 1]
            s = abs(p) + abs(q) + abs(rloc)
            p /= s
            q /= s
            rloc /= s
            if m == l:
                break
            if abs(h[m, m - 1]) * (abs(q) + abs(rloc)) <= _EPS * abs(p) * (
                abs(h[m - 1, m - 1]) + abs(zz) + abs(h[m + 1, m + 1])
            ):
                break
            m -= 1
        for i in range(m + 2, en + 1):
            h[i, i - 2] = 0.0
        for i in range(m + 3, en + 1):
            h[i, i - 3] = 0.0
        # double QR sweep on rows m..en of the active block l..en
        for k in range(m, en):
            notlast = k != en - 1
            if k != m:
                p = h[k, k - 1]
                q = h[k + 1, k - 1]
                rloc = h[k + 2, k - 1] if notlast else 0.0
                x = abs(p) + abs(q) + abs(rloc)
                if x == 0.0:
                    continue
                p /= x
                q /= x
                rloc /= x
            s = math.sqrt(p * p + q * q + rloc * rloc)
            if p < 0.0:
                s = -s
            if s == 0.0:
                continue
            if k != m:
                h[k, k - 1] = -s * x
            elif l != m:
                h[k, k - 1] = -h[k, k - 1]
            p += s
            x = p / s
            y = q / s
            zz = rloc / s
            q /= p
            rloc /= p
            if notlast:
                for j in range(k, en + 1):
                    pp = h[k, j] + q * h[k + 1, j] + rloc * h[k + 2, j]
                    h[k, j] -= pp * x
                    h[k + 1, j] -= pp * y
                    h[k + 2, j] -= pp * zz
                mm = en if en < k + 3 else k + 3
                for i in range(l, mm + 1):
                    pp = x * h[i, k] + y * h[i, k + 1] + zz * h[i, k + 2]
                    h[i, k] -= pp
                    h[i, k + 1] -= pp * q
                    h[i, k + 2] -= pp * rloc
            else:
                for j in range(k, en + 1):
                    pp = h[k, j] + q * h[k + 1, j]
                    h[k, j] -= pp * x
                    h[k + 1, j] -= pp * y
                mm = en if en < k + 3 else k + 3
                for i in range(l, mm + 1):
                    pp = x * h[i, k] + y * h[i, k + 1]
                    h[i, k] -= pp
                    h[i, k + 1] -= pp * q
    return wr, wi, total, -1, -1


@njit(cache=True, nogil=True)
def _solve_shifted(a, lam, b):
    """x with (A - lam I) x = b by complex LU with partial pivoting."""
    n = a.shape[0]
    m = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            m[i, j] = a[i, j]
        m[i, i] -= lam
    x = b.astype(np.complex128)
    for k in range(n):
        piv = k
        best = abs(m[k, k])
        for i in range(k + 1, n):
            if abs(m[i, k]) > best:
                best = abs(m[i, k])
                piv = i
        if best == 0.0:
            m[k, k] = 1e-300 + 0.0j
            piv = k
        if piv != k:
            for j in range(n):
                tmp = m[k, j]
                m[k, j] = m[piv, j]
                m[piv, j] = tmp
            tmpb = x[k]
            x[k] = x[piv]
            x[piv] = tmpb
        for i in range(k + 1, n):
            f = m[i, k] / m[k, k]
            if f != 0.0:
                for j in range(k + 1, n):
                    m[i, j] -= f * m[k, j]
                x[i] -= f * x[k]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for j in range(i + 1, n):
            acc -= m[i, j] * x[j]
        x[i] = acc / m[i, i]
    return x


@dataclass(frozen=True)
class EigenPair:
    """One eigenvalue lam = p + 2*pi*i*f: growth rate p = Re(lam) and
    frequency f = Im(lam)/(2*pi), both per diffusion time."""

    lam: complex
    residual: Optional[float] = None
    tag: str = "simple"

    @property
    def growth_rate(self) -> float:
        return self.lam.real

    @property
    def frequency(self) -> float:
        return self.lam.imag / (2.0 * math.pi)


@dataclass(frozen=True)
class SpectrumResult:
    pairs: Tuple[EigenPair, ...]
    size: int
    sweeps: int

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs], dtype=np.complex128)

    @property
    def leading(self) -> EigenPair:
        return self.pairs[0]

    def leading_k(self, k: int) -> Tuple[EigenPair, ...]:
        return self.pairs[: min(k, len(self.pairs))]


def _extract_entries(m) -> np.ndarray:
    entries = getattr(m, "entries", m)
    arr = np.array(entries, dtype=np.float64, order="C", copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"need a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or Inf")
    return arr


def _cluster_tags(lams: np.ndarray) -> List[str]:
    n = len(lams)
    if n == 1:
        return ["simple"]
    scale = max(1.0, float(np.abs(lams).max()))
    tol = 1e-8 * scale
    tags = ["simple"] * n
    # exact min-gap in manageable chunks
    step = 256
    mind = np.full(n, np.inf)
    for i0 in range(0, n, step):
        block = lams[i0 : i0 + step, None] - lams[None, :]
        d = np.abs(block)
        for i in range(d.shape[0]):
            d[i, i0 + i] = np.inf
        mind[i0 : i0 + step] = d.min(axis=1)
    for i in range(n):
        if mind[i] <= tol:
            tags[i] = "clustered"
    return tags


def eigenvalues(
    m,
    balance: bool = True,
    max_sweep_factor: int = 30,
    with_tags: bool = True,
) -> SpectrumResult:
    """All eigenvalues of a dense real matrix (or an OperatorMatrix).

    Pipeline: optional balancing, Householder Hessenberg reduction (skipped
    when the input is already exactly Hessenberg), Francis double-shift QR
    with deflation.  Raises EigenConvergenceError if a submatrix refuses to
    deflate within max_sweep_factor * n sweeps.
    """
    a = _extract_entries(m)
    n = a.shape[0]
    if n == 1:
        return SpectrumResult(
            pairs=(EigenPair(lam=complex(a[0, 0], 0.0)),), size=1, sweeps=0
        )
    if balance:
        _balance(a)
    if np.any(np.tril(a, -2) != 0.0):
        _hessenberg(a)
    wr, wi, sweeps, fail_lo, fail_hi = _hqr(a, max_sweep_factor * n)
    if fail_lo >= 0:
        raise EigenConvergenceError(int(fail_lo), int(fail_hi), int(sweeps))
    lams = wr + 1j * wi
    order = np.lexsort((-wi, -wr))
    lams = lams[order]
    tags = _cluster_tags(lams) if with_tags else ["simple"] * n
    pairs = tuple(
        EigenPair(lam=complex(lams[i]), tag=tags[i]) for i in range(n)
    )
    return SpectrumResult(pairs=pairs, size=n, sweeps=int(sweeps))


def residuals(m, lams: Sequence[complex], perturb: float = 1e-8) -> np.ndarray:
    """Inverse-iteration residuals ||(M - lam I) v|| / ||v|| for selected
    eigenvalue estimates; small values certify lam as an eigenvalue of M."""
    a = _extract_entries(m)
    n = a.shape[0]
    scale = max(1.0, float(np.abs(a).max()))
    out = np.empty(len(lams))
    rng = np.random.default_rng(12345)
    for idx, lam in enumerate(lams):
        b = rng.standard_normal(n) + 0j
        shift = complex(lam) + perturb * scale * (1.0 + 1.0j)
        v = _solve_shifted(a, shift, b)
        v = v / np.linalg.norm(v)
        v = _solve_shifted(a, shift, v)
        v = v / np.linalg.norm(v)
        out[idx] = float(np.linalg.norm(a @ v - complex(lam) * v))
    return out


@dataclass(frozen=True)
class BranchMatch:
    """Pairing of the k leading eigenvalues of two adjacent spectra.

    pairs holds (index_prev, index_next) into the sorted eigenvalue lists;
    ambiguous flags assignments decided by less than 1e-12 in cost;
    realness_changed lists matched pairs whose members switched between real
    and complex, the signature of a nearby eigenvalue coalescence.
    """

    pairs: Tuple[Tuple[int, int], ...]
    ambiguous: bool
    realness_changed: Tuple[Tuple[int, int], ...]

    @property
    def coalescence_candidate(self) -> bool:
        return len(self.realness_changed) > 0


def _im_sign(z: complex, tol: float) -> int:
    if abs(z.imag) <= tol:
        return 0
    return 1 if z.imag > 0 else -1


def match_branches(
    prev: SpectrumResult,
    next_: SpectrumResult,
    k: int,
    im_tol: float = 1e-9,
) -> BranchMatch:
    """Greedy minimal-total-distance assignment between the k leading
    eigenvalues of two spectra computed at adjacent sweep parameters; ties
    within 1e-12 prefer continuing the sign of the imaginary part."""
    lp = prev.lambdas[: min(k, prev.size)]
    ln = next_.lambdas[: min(k, next_.size)]
    kk = min(len(lp), len(ln))
    lp = lp[:kk]
    ln = ln[:kk]
    if kk == 0:
        return BranchMatch(pairs=(), ambiguous=False, realness_changed=())
    scale = max(1.0, float(np.abs(lp).max()), float(np.abs(ln).max()))
    tol_im = im_tol * scale
    cands = []
    for i in range(kk):
        si = _im_sign(lp[i], tol_im)
        for j in range(kk):
            cost = abs(lp[i] - ln[j])
            tie = 0 if si == _im_sign(ln[j], tol_im) else 1
            cands.append((cost, tie, i, j))
    cands.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
    used_i = [False] * kk
    used_j = [False] * kk
    chosen = []
    ambiguous = False
    for idx, (cost, tie, i, j) in enumerate(cands):
        if used_i[i] or used_j[j]:
            continue
        # a nearly equal-cost alternative sharing one endpoint makes the
        # assignment ambiguous
        for cost2, _, i2, j2 in cands[idx + 1 :]:
            if cost2 - cost > 1e-12:
                break
            if (i2 == i) != (j2 == j) and not used_i[i2] and not used_j[j2]:
                ambiguous = True
                break
        chosen.append((i, j))
        used_i[i] = True
        used_j[j] = True
    chosen.sort()
    realness_changed = tuple(
        (i, j)
        for i, j in chosen
        if (_im_sign(lp[i], tol_im) == 0) != (_im_sign(ln[j], tol_im) == 0)
    )
    return BranchMatch(
        pairs=tuple(chosen), ambiguous=ambiguous, realness_changed=realness_changed
    )
