"""Distance of a constructed travelling wave to its homogeneous base state.

The distance is measured in the triple norm

    L^1 + second-moment-weighted L^1 + W^{s,p}

over one spatial period times velocity space.  Every contribution is
separable or two-scale (broad base plus narrow feature), so each piece is
evaluated on its own adapted grid with the same Gagliardo realisation used
by ``norms.fractional_wsp_norm``; pieces combine by the triangle
inequality, so the reported total is a certified upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SQRT2PI = math.sqrt(2.0 * math.pi)

_GL8 = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# 1D ingredients on adapted uniform grids
# ---------------------------------------------------------------------------

def lp_pow(vals, h, p):
    """p-th power of the L^p norm on a uniform grid (any dimension)."""
    return float(np.sum(np.abs(vals) ** p)) * h


def gagliardo_pow(vals, h, order, p, axis=0):
    """p-th power of the axis Gagliardo seminorm of fractional order in (0,1)."""
    v = np.moveaxis(np.asarray(vals), axis, 0)
    n = v.shape[0]
    total = 0.0
    for m in range(1, n):
        diff = v[m:] - v[:-m]
        total += float(np.sum(np.abs(diff) ** p)) / (m * h) ** (1.0 + order * p)
    return 2.0 * total * h * h


def fd_derivative(vals, h, axis=0):
    """Fourth-order centred derivative on a decaying window (zero-padded)."""
    v = np.moveaxis(np.asarray(vals, dtype=float), axis, 0)
    pad = np.zeros((2,) + v.shape[1:])
    ext = np.concatenate([pad, v, pad], axis=0)
    d = (-ext[4:] + 8 * ext[3:-1] - 8 * ext[1:-3] + ext[:-4]) / (12.0 * h)
    return np.moveaxis(d, 0, axis)


@dataclass
class Axis1D:
    """One separable factor sampled on its own uniform grid."""

    vals: np.ndarray
    h: float

    def lp(self, p):
        return lp_pow(self.vals, self.h, p)

    def gag(self, order, p):
        return gagliardo_pow(self.vals, self.h, order, p)

    def deriv(self):
        return Axis1D(fd_derivative(self.vals, self.h), self.h)


def wsp_pow_separable(axes, s, p):
    """p-th power of the W^{s,p} norm of a tensor product of 1D factors."""
    if not 0.0 <= s < 2.0:
        raise ValidationError("separable W^{s,p} supports 0 <= s < 2")
    lps = [a.lp(p) for a in axes]
    total = math.prod(lps)
    if s == 0.0:
        return total
    if s < 1.0:
        for k, a in enumerate(axes):
            total += a.gag(s, p) * math.prod(lps[:k] + lps[k + 1:])
        return total
    derivs = [a.deriv() for a in axes]
    for k in range(len(axes)):
        dk = derivs[k].lp(p)
        total += dk * math.prod(lps[:k] + lps[k + 1:])
    if s > 1.0:
        for k in range(len(axes)):
            row = [derivs[j] if j == k else axes[j] for j in range(len(axes))]
            row_lp = [a.lp(p) for a in row]
            for l, a in enumerate(row):
                total += a.gag(s - 1.0, p) * math.prod(row_lp[:l] + row_lp[l + 1:])
    return total


def wsp_norm_coupled(field2d, hx, hv, trans_axes, s, p, x_periodic=True):
    """W^{s,p} norm (p-th power) of D(x, v1) times transverse 1D factors.

    The x direction is the periodic box; offsets never wrap, matching the
    box convention of the velocity-grid Gagliardo sums.
    """
    lps_t = [a.lp(p) for a in trans_axes]
    prod_t = math.prod(lps_t) if trans_axes else 1.0
    cell = hx * hv
    d_lp = float(np.sum(np.abs(field2d) ** p)) * cell

    def gag2d(arr, axis, order):
        v = np.moveaxis(arr, axis, 0)
        n = v.shape[0]
        step = hx if axis == 0 else hv
        other = hv if axis == 0 else hx
        total = 0.0
        for m in range(1, n):
            diff = v[m:] - v[:-m]
            total += float(np.sum(np.abs(diff) ** p)) / (m * step) ** (1.0 + order * p)
        return 2.0 * total * step * step * other

    total = d_lp * prod_t
    if s == 0.0:
        return total

    def add_orders(arr, weight):
        nonlocal total
        if s < 1.0:
            total += weight * (gag2d(arr, 0, s) + gag2d(arr, 1, s)) * prod_t
            base = float(np.sum(np.abs(arr) ** p)) * cell
            for k, a in enumerate(trans_axes):
                total += weight * base * a.gag(s, p) * math.prod(
                    lps_t[:k] + lps_t[k + 1:])

    if s < 1.0:
        add_orders(field2d, 1.0)
        return total

    # s in [1, 2): first derivatives, then (s-1)-order seminorms of each
    dx = _periodic_derivative(field2d, hx, axis=0) if x_periodic else \
        fd_derivative(field2d, hx, axis=0)
    dv = fd_derivative(field2d, hv, axis=1)
    grads = [(dx, None), (dv, None)]
    for k, a in enumerate(trans_axes):
        grads.append((field2d, (k, a.deriv())))

    for arr, trans_sub in grads:
        if trans_sub is None:
            t_lps, t_axes = lps_t, trans_axes
        else:
            k, da = trans_sub
            t_axes = [da if j == k else trans_axes[j] for j in range(len(trans_axes))]
            t_lps = [a.lp(p) for a in t_axes]
        pt = math.prod(t_lps) if t_lps else 1.0
        base = float(np.sum(np.abs(arr) ** p)) * cell
        total += base * pt
        if s > 1.0:
            total += (gag2d(arr, 0, s - 1.0) + gag2d(arr, 1, s - 1.0)) * pt
            for l, a in enumerate(t_axes):
                total += base * a.gag(s - 1.0, p) * math.prod(
                    t_lps[:l] + t_lps[l + 1:])
    return total


def _periodic_derivative(arr, h, axis=0):
    from scipy import fft as sfft

    n = arr.shape[axis]
    xi = 2.0 * np.pi * sfft.fftfreq(n, d=h)
    shape = [1] * arr.ndim
    shape[axis] = n
    return sfft.ifft(sfft.fft(arr, axis=axis) * (1j * xi.reshape(shape)),
                     axis=axis).real


# ---------------------------------------------------------------------------
# adapted sampling of mixture pieces
# ---------------------------------------------------------------------------

def _pair_axis(term, n=4096, reach=12.0):
    """Samples of the unit-mass even pair of a term on its adapted v1 window."""
    lo = term.v0 + reach * term.w1
    v = np.linspace(-lo, lo, n)
    return Axis1D(term.pair_1d(v), v[1] - v[0]), v


def _gauss_axis(width, n=2048, reach=10.0):
    v = np.linspace(-reach * width, reach * width, n)
    return Axis1D(np.exp(-v ** 2 / (2 * width ** 2)) / (width * SQRT2PI),
                  v[1] - v[0])


def _term_field_norms(term, s, p):
    """All three norms of one separable mixture term (nonnegative)."""
    ax1, v = _pair_axis(term)
    trans = [_gauss_axis(w) for w in term.wt]
    l1 = abs(term.weight)
    mom = abs(term.weight) * (term.v0 ** 2 + term.w1 ** 2 + sum(w ** 2 for w in term.wt))
    scaled = Axis1D(abs(term.weight) * ax1.vals, ax1.h)
    wsp = wsp_pow_separable([scaled] + trans, s, p) ** (1.0 / p)
    return l1, mom, wsp


@dataclass
class ClosenessReport:
    """Certified upper bound of the triple-norm distance, with its breakdown."""

    l1: float
    second_moment: float
    wsp: float
    pieces: dict = field(default_factory=dict)
    s: float = 1.2
    p: float = 2.0
    conservative: bool = True

    @property
    def total(self):
        return self.l1 + self.second_moment + self.wsp

    def to_json(self):
        return {
            "l1": self.l1, "second_moment": self.second_moment, "wsp": self.wsp,
            "total": self.total, "s": self.s, "p": self.p,
            "upper_bound": self.conservative, "pieces": self.pieces,
        }


def modified_profile_distance(mp, s=1.2, p=2.0):
    """Distance of the modified profile to its base, all three norms.

    Cases 1-2: triangle over the added feature and the renormalisation
    piece.  Case 3: exact separable difference of the scaled pairs.
    """
    f1 = mp.f1
    if mp.case in (1, 2):
        scale = 1.0 / (1.0 + mp.C0 * mp.gamma ** 2)
        bump = [t for t in mp.mixture.terms[len(f1.closure.terms):]]
        l1 = mom = wsp = 0.0
        for t in bump:
            a, b, c = _term_field_norms(t, s, p)
            l1, mom, wsp = l1 + a, mom + b, wsp + c
        shrink = mp.C0 * mp.gamma ** 2 * scale
        for t in f1.closure.terms:
            a, b, c = _term_field_norms(t, s, p)
            l1, mom, wsp = l1 + shrink * a, mom + shrink * b, wsp + shrink * c
        return ClosenessReport(l1, mom, wsp, {"kind": "feature+renorm"}, s, p)

    # case 3: per-term difference shares the transverse factor exactly
    l1 = mom = wsp = 0.0
    for t0, t1 in zip(f1.closure.terms, mp.mixture.terms):
        reach = max(t0.v0 + 12 * t0.w1, t1.v0 + 12 * t1.w1)
        v = np.linspace(-reach, reach, 8192)
        h = v[1] - v[0]
        diff = t0.weight * (t1.pair_1d(v) - t0.pair_1d(v))
        trans = [_gauss_axis(w) for w in t0.wt]
        l1 += float(np.sum(np.abs(diff))) * h
        mom_t = sum(w ** 2 for w in t0.wt)
        mom += float(np.sum(np.abs(diff) * (v ** 2 + mom_t))) * h
        wsp += wsp_pow_separable([Axis1D(diff, h)] + trans, s, p) ** (1.0 / p)
    return ClosenessReport(l1, mom, wsp, {"kind": "scaling"}, s, p)


def wave_profile_distance(wave, s=1.2, p=2.0, n_x=192, n_v=1024):
    """Distance of the wave to its modified profile over one period.

    Each mixture term contributes the cancellation-free field
    D_t(x, v1) = w_t [A_t(v1^2 - 2 beta(x)) - A_t(v1^2)], evaluated by the
    mean-value identity on the term's adapted window; pieces combine by the
    triangle inequality.
    """
    gl_x, gl_w = _GL8
    sn = 0.5 * (gl_x + 1.0)
    sw = 0.5 * gl_w
    xs = np.linspace(0.0, wave.T1, n_x, endpoint=False)
    hx = wave.T1 / n_x
    beta = wave.beta_at(xs)
    l1 = mom = wsp = 0.0
    for t in wave.mp.mixture.terms:
        reach = t.v0 + 12.0 * t.w1
        margin = math.sqrt(2.0 * float(np.max(np.abs(beta)))) * 1.5
        v = np.linspace(-(reach + margin), reach + margin, n_v)
        hv = v[1] - v[0]
        y0 = v[None, :] ** 2
        # D = -2 beta int_0^1 A'(y0 - 2 beta s) ds     (Gauss-Legendre in s)
        acc = np.zeros((n_x, n_v))
        for a, w8 in zip(sn, sw):
            y = y0 - (2.0 * a) * beta[:, None]
            acc += w8 * t.even_dval(y.ravel()).reshape(y.shape)
        D = -2.0 * t.weight * beta[:, None] * acc
        trans = [_gauss_axis(w) for w in t.wt]
        cell = hx * hv
        l1 += float(np.sum(np.abs(D))) * cell
        mom_t = sum(w ** 2 for w in t.wt)
        mom += float(np.sum(np.abs(D) * (v[None, :] ** 2 + mom_t))) * cell
        wsp += wsp_norm_coupled(D, hx, hv, trans, s, p) ** (1.0 / p)
    return ClosenessReport(l1, mom, wsp, {"kind": "wave-vs-profile"}, s, p)


def closeness_report(wave, base_distance=None, s=1.2, p=2.0):
    """Total certified distance wave -> base homogeneous state (triangle sum)."""
    d_mod = modified_profile_distance(wave.mp, s, p)
    d_wave = wave_profile_distance(wave, s, p)
    l1 = d_mod.l1 + d_wave.l1
    mom = d_mod.second_moment + d_wave.second_moment
    wsp = d_mod.wsp + d_wave.wsp
    pieces = {"modified_vs_base": d_mod.to_json(), "wave_vs_modified": d_wave.to_json()}
    if base_distance is not None:
        l1 += base_distance.l1
        mom += base_distance.second_moment
        wsp += base_distance.wsp
        pieces["base_vs_raw"] = base_distance.to_json()
    return ClosenessReport(l1, mom, wsp, pieces, s, p)
