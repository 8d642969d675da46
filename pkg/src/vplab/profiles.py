"""Homogeneous velocity-space profiles in d = 1, 2, 3.

Profiles are nonnegative unit-mass distributions f(v) on a uniform tensor
grid, optionally backed by an analytic closure (a Gaussian mixture whose
components are even pairs in v1).  The closure keeps projections, moments
and the even continuation in the energy variable exact; everything also
works from grid samples alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft
from scipy.special import dawsn

from .errors import (
    DegenerateProfileError,
    QuadratureConvergenceError,
    UnresolvableBumpError,
    ValidationError,
)

SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# smooth cut-off machinery
# ---------------------------------------------------------------------------

def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


def cutoff_sigma(x):
    """Even cut-off: 1 on |x| <= 1, 0 on |x| >= 2, smooth monotone between."""
    return smooth_step(2.0 - np.abs(np.asarray(x, dtype=float)))


def mollifier_kernel(r):
    """Unnormalised compactly supported bump exp(-1/(1-r^2)) on r < 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


# ---------------------------------------------------------------------------
# velocity grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityGrid:
    """Uniform tensor-product velocity grid on [-vmax, vmax)^dim.

    The grid is FFT-friendly: points v_i = -vmax + i*h with h = 2*vmax/n,
    n a power of two.  Plain sums times h**dim are spectrally accurate for
    smooth integrands decaying below roundoff at the boundary.
    """

    dim: int
    vmax: float
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValidationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.vmax <= 0:
            raise ValidationError("vmax must be positive")
        if self.n < 4 or (self.n & (self.n - 1)) != 0:
            raise ValidationError(f"n must be a power of two >= 4, got {self.n}")

    @property
    def h(self):
        return 2.0 * self.vmax / self.n

    @property
    def cell(self):
        return self.h ** self.dim

    def axis(self):
        return -self.vmax + self.h * np.arange(self.n)

    def axes(self):
        return [self.axis() for _ in range(self.dim)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def freqs(self):
        """Angular FFT frequencies for one axis (period 2*vmax)."""
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.h)

    @property
    def shape(self):
        return (self.n,) * self.dim

    def integrate(self, values):
        return float(np.sum(values) * self.cell)

    def coarsened(self):
        """Every-second-point subgrid, used for refinement checks."""
        return VelocityGrid(self.dim, self.vmax, self.n // 2)

    def boundary_residual(self, values):
        """Largest |value| on the outermost grid shell."""
        res = 0.0
        for ax in range(self.dim):
            sl0 = [slice(None)] * self.dim
            sl0[ax] = 0
            sl1 = [slice(None)] * self.dim
            sl1[ax] = -1
            res = max(res, float(np.max(np.abs(values[tuple(sl0)]))),
                      float(np.max(np.abs(values[tuple(sl1)]))))
        return res


# ---------------------------------------------------------------------------
# analytic closures: mixtures of even Gaussian pairs
# ---------------------------------------------------------------------------

def _coshc(t):
    """cosh(sqrt(t)) continued through t=0: cos(sqrt(-t)) for t < 0."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0.0
    out[pos] = np.cosh(np.sqrt(t[pos]))
    out[~pos] = np.cos(np.sqrt(-t[~pos]))
    return out


def _coshc_prime(t):
    """d/dt cosh(sqrt(t)), continued; equals 1/2 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 1e-12
    out[small] = 0.5 + t[small] / 12.0
    pos = (~small) & (t > 0)
    st = np.sqrt(t[pos])
    out[pos] = np.sinh(st) / (2.0 * st)
    neg = (~small) & (t < 0)
    sn = np.sqrt(-t[neg])
    out[neg] = np.sin(sn) / (2.0 * sn)
    return out


@dataclass(frozen=True)
class GaussianPairTerm:
    """Even pair [N(v0,w1) + N(-v0,w1)]/2 in v1 times centred Gaussians transversely.

    weight is the total mass of the term; wt holds the transverse widths
    (empty tuple in d = 1).
    """

    weight: float
    v0: float
    w1: float
    wt: tuple = ()

    def pair_1d(self, v1):
        """Unit-mass even pair density evaluated at v1."""
        c = 1.0 / (2.0 * self.w1 * SQRT2PI)
        return c * (np.exp(-((v1 - self.v0) ** 2) / (2 * self.w1 ** 2))
                    + np.exp(-((v1 + self.v0) ** 2) / (2 * self.w1 ** 2)))

    def even_val(self, y):
        """Pair density as a function of y = v1^2, continued to y < 0."""
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        pos = y >= 0.0
        if np.any(pos):
            out[pos] = self.pair_1d(np.sqrt(y[pos]))
        if np.any(~pos):
            yn = y[~pos]
            c = 1.0 / (self.w1 * SQRT2PI)
            t = yn * self.v0 ** 2 / self.w1 ** 4
            out[~pos] = c * np.exp(-(yn + self.v0 ** 2) / (2 * self.w1 ** 2)) * _coshc(t)
        return out

    def even_dval_complex(self, y):
        """d/dy of even_val for complex y (entire continuation form).

        Used by Cauchy-integral Taylor extraction; callers keep |y| within a
        few w1^2 so the exponential factor stays tame.
        """
        y = np.asarray(y, dtype=complex)
        c = 1.0 / (self.w1 * SQRT2PI)
        z = np.sqrt(y * self.v0 ** 2 / self.w1 ** 4)
        cosh_z = np.cosh(z)
        # sinh(z)/(2z) with the removable point handled by series
        small = np.abs(z) < 1e-8
        ratio = np.empty_like(z)
        ratio[~small] = np.sinh(z[~small]) / (2.0 * z[~small])
        ratio[small] = 0.5 + z[small] ** 2 / 12.0
        e = np.exp(-(y + self.v0 ** 2) / (2 * self.w1 ** 2))
        return c * e * (-cosh_z / (2 * self.w1 ** 2)
                        + (self.v0 ** 2 / self.w1 ** 4) * ratio)

    def even_dval(self, y):
        """d/dy of even_val; the continued form is used near y = 0."""
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        y_sw = 0.25 * self.w1 ** 2
        direct = y >= y_sw
        if np.any(direct):
            yd = y[direct]
            s = np.sqrt(yd)
            c = 1.0 / (2.0 * self.w1 * SQRT2PI)
            w2 = 2.0 * self.w1 ** 2
            out[direct] = c * (
                np.exp(-((s - self.v0) ** 2) / w2) * (-(s - self.v0) / (w2 * s))
                + np.exp(-((s + self.v0) ** 2) / w2) * (-(s + self.v0) / (w2 * s))
            )
        rest = ~direct
        if np.any(rest):
            yr = y[rest]
            c = 1.0 / (self.w1 * SQRT2PI)
            t = yr * self.v0 ** 2 / self.w1 ** 4
            e = np.exp(-(yr + self.v0 ** 2) / (2 * self.w1 ** 2))
            out[rest] = c * e * (-_coshc(t) / (2 * self.w1 ** 2)
                                 + (self.v0 ** 2 / self.w1 ** 4) * _coshc_prime(t))
        return out

    def transverse_val(self, *axes):
        """Product of centred transverse Gaussians on the given axes."""
        if not self.wt:
            return 1.0
        out = None
        for w, ax in zip(self.wt, axes):
            g = np.exp(-np.asarray(ax) ** 2 / (2 * w ** 2)) / (w * SQRT2PI)
            out = g if out is None else np.multiply.outer(out, g)
        return out

    @property
    def v1_scale(self):
        """Characteristic v1 extent, used to size adapted quadratures."""
        return self.v0 + 8.0 * self.w1

    def pv_d_integral(self):
        """Exact value of the v1-marginal principal-value integral at 0."""
        a = self.v0 / self.w1
        return (math.sqrt(2.0) * a * float(dawsn(a / math.sqrt(2.0))) - 1.0) / self.w1 ** 2


@dataclass(frozen=True)
class Mixture1D:
    """1D Gaussian mixture: components (weight, mu, sigma).

    Used for projected profiles.  Evaluation accepts complex arguments,
    which is what the analytically continued dispersion function needs.
    """

    comps: tuple

    @staticmethod
    def _coerce(a):
        a = np.asarray(a)
        if not np.iscomplexobj(a):
            a = a.astype(float)
        return a

    def val(self, a):
        a = self._coerce(a)
        out = np.zeros(a.shape, dtype=a.dtype)
        for w, mu, s in self.comps:
            out = out + w * np.exp(-((a - mu) ** 2) / (2 * s ** 2)) / (s * SQRT2PI)
        return out

    def dval(self, a):
        a = self._coerce(a)
        out = np.zeros(a.shape, dtype=a.dtype)
        for w, mu, s in self.comps:
            g = np.exp(-((a - mu) ** 2) / (2 * s ** 2)) / (s * SQRT2PI)
            out = out + w * g * (-(a - mu) / s ** 2)
        return out

    def d2val(self, a):
        a = self._coerce(a)
        out = np.zeros(a.shape, dtype=a.dtype)
        for w, mu, s in self.comps:
            g = np.exp(-((a - mu) ** 2) / (2 * s ** 2)) / (s * SQRT2PI)
            out = out + w * g * (((a - mu) / s ** 2) ** 2 - 1.0 / s ** 2)
        return out

    def mass(self):
        return sum(w for w, _, _ in self.comps)

    def pv_exact(self, ap):
        """Closed-form PV integral of dval/(alpha - ap) via the Dawson function."""
        total = 0.0
        for w, mu, s in self.comps:
            yh = (ap - mu) / s
            total += w * (math.sqrt(2.0) * yh * float(dawsn(yh / math.sqrt(2.0))) - 1.0) / s ** 2
        return total


class GaussianMixture:
    """Sum of GaussianPairTerm components; the analytic closure of a Profile."""

    def __init__(self, dim, terms):
        self.dim = int(dim)
        self.terms = tuple(terms)
        for t in self.terms:
            if len(t.wt) != self.dim - 1:
                raise ValidationError("transverse width count must be dim-1")

    def mass(self):
        return sum(t.weight for t in self.terms)

    def moment2(self):
        """Exact second moment integral of |v|^2 f dv."""
        total = 0.0
        for t in self.terms:
            total += t.weight * (t.v0 ** 2 + t.w1 ** 2 + sum(w ** 2 for w in t.wt))
        return total

    def values_on(self, grid):
        axes = grid.axes()
        out = np.zeros(grid.shape)
        v1 = axes[0]
        for t in self.terms:
            a = t.weight * t.pair_1d(v1)
            tr = t.transverse_val(*axes[1:])
            out += np.multiply.outer(a, tr) if self.dim > 1 else a * tr
        return out

    def f_points(self, v1, *w_axes_pts):
        """Pointwise evaluation at arrays of coordinates (broadcast together)."""
        out = np.zeros(np.broadcast(v1, *w_axes_pts).shape)
        for t in self.terms:
            a = t.weight * t.pair_1d(np.asarray(v1, dtype=float))
            for w, pts in zip(t.wt, w_axes_pts):
                a = a * np.exp(-np.asarray(pts) ** 2 / (2 * w ** 2)) / (w * SQRT2PI)
            out += a
        return out

    def project_unit(self, e):
        """Exact marginal along unit direction e as a 1D mixture."""
        e = np.asarray(e, dtype=float)
        comps = []
        for t in self.terms:
            widths = (t.w1,) + t.wt
            var = sum((e[i] * widths[i]) ** 2 for i in range(self.dim))
            s = math.sqrt(var)
            if t.v0 == 0.0:
                comps.append((t.weight, 0.0, s))
            else:
                mu = t.v0 * e[0]
                comps.append((0.5 * t.weight, mu, s))
                comps.append((0.5 * t.weight, -mu, s))
        return Mixture1D(tuple(comps))

    def pv_d_integral(self):
        """Exact integral of d_v1 f / v1 over all of velocity space."""
        return sum(t.weight * t.pv_d_integral() for t in self.terms)

    def scaled_v1(self, delta):
        """The family (1/delta) f(v1/delta, w): same weights, stretched v1."""
        return GaussianMixture(
            self.dim,
            [replace(t, v0=delta * t.v0, w1=delta * t.w1) for t in self.terms],
        )

    def reweighted(self, factor):
        return GaussianMixture(
            self.dim, [replace(t, weight=factor * t.weight) for t in self.terms]
        )

    def plus(self, other):
        return GaussianMixture(self.dim, self.terms + tuple(other.terms))


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

@dataclass
class Profile:
    """Velocity distribution on a grid, optionally with analytic closure."""

    grid: VelocityGrid
    values: np.ndarray
    closure: GaussianMixture | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_closure(cls, grid, closure, meta=None):
        vals = closure.values_on(grid)
        return cls(grid, vals, closure, dict(meta or {}))

    @classmethod
    def from_values(cls, grid, values, meta=None, normalize=False, validate=True):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValidationError("values shape does not match grid")
        if validate:
            floor = -1e-12 * max(float(np.max(values)), 1e-300)
            if float(np.min(values)) < floor:
                raise ValidationError("profile values must be nonnegative")
            values = np.maximum(values, 0.0)
        m = grid.integrate(values)
        if normalize:
            if m <= 1e-300:
                raise ValidationError("zero-mass input cannot be normalised")
            values = values / m
        elif validate and abs(m - 1.0) > 1e-8:
            raise ValidationError(f"profile mass {m:.3e} deviates from 1")
        return cls(grid, values, None, dict(meta or {}))

    @property
    def mass_grid(self):
        return self.grid.integrate(self.values)

    def is_even_v1(self, tol=1e-10):
        flipped = _flip_v1(self.values)
        return float(np.max(np.abs(self.values - flipped))) <= tol * max(
            1.0, float(np.max(np.abs(self.values)))
        )


def _flip_v1(values):
    """Reflection v1 -> -v1 using the periodic index map i -> (n-i) mod n."""
    return np.roll(values[::-1, ...], 1, axis=0)


def make_builtin(name, grid, **params):
    """Construct a built-in unit-mass profile with analytic closure.

    Supported names:
      maxwellian            -- (2*pi)^(-d/2) exp(-|v|^2/2)
      double_bump           -- even pair at +-v0 (width optional) times a
                               centred transverse Maxwellian; requires v0 > 0
      product               -- f1(v1) x f2(v2) [x f3(v3)] from factor specs
                               ("gaussian", {"width": w}) or
                               ("double_bump", {"v0": v0, "width": w})
    """
    trans = (1.0,) * (grid.dim - 1)
    if name == "maxwellian":
        clo = GaussianMixture(grid.dim, [GaussianPairTerm(1.0, 0.0, 1.0, trans)])
    elif name == "double_bump":
        v0 = float(params.get("v0", 0.0))
        if v0 <= 0:
            raise ValidationError("double_bump requires v0 > 0")
        w = float(params.get("width", 1.0))
        clo = GaussianMixture(grid.dim, [GaussianPairTerm(1.0, v0, w, trans)])
    elif name == "product":
        factors = params["factors"]
        if len(factors) != grid.dim:
            raise ValidationError("product needs one factor per axis")
        kind0, p0 = factors[0]
        if kind0 == "gaussian":
            v0, w1 = 0.0, float(p0.get("width", 1.0))
        elif kind0 == "double_bump":
            v0, w1 = float(p0["v0"]), float(p0.get("width", 1.0))
        else:
            raise ValidationError(f"unknown factor kind {kind0!r}")
        wt = []
        for kind, p in factors[1:]:
            if kind != "gaussian":
                raise ValidationError("transverse factors must be gaussian")
            wt.append(float(p.get("width", 1.0)))
        clo = GaussianMixture(grid.dim, [GaussianPairTerm(1.0, v0, w1, tuple(wt))])
    else:
        raise ValidationError(f"unknown builtin {name!r}")

    prof = Profile.from_closure(grid, clo, meta={"provenance": "raw", "name": name,
                                                 "params": dict(params)})
    tail = grid.boundary_residual(prof.values)
    if tail >= 1e-14:
        raise ValidationError(
            f"builtin tail {tail:.2e} not below 1e-14 at vmax; enlarge the grid"
        )
    prof.meta["truncated_mass"] = max(0.0, 1.0 - prof.mass_grid)
    return prof


def mollify(p, delta1):
    """Convolve with the scaled compact bump; discrete mass is preserved exactly."""
    if delta1 <= 0:
        raise ValidationError("delta1 must be positive")
    if delta1 < 2.0 * p.grid.h:
        raise UnresolvableBumpError(
            f"delta1={delta1:.3g} below grid resolution h={p.grid.h:.3g}"
        )
    ax = p.grid.axis()
    r2 = None
    for _ in range(p.grid.dim):
        g2 = ax ** 2
        r2 = g2 if r2 is None else np.add.outer(r2, g2)
    kernel = mollifier_kernel(np.sqrt(r2) / delta1)
    ksum = kernel.sum()
    if ksum <= 0:
        raise UnresolvableBumpError("mollifier kernel vanishes on the grid")
    kernel = kernel / ksum
    # circular convolution; the kernel is centred at v=0 which is index vmax/h
    shift = int(round(p.grid.vmax / p.grid.h))
    kernel = np.roll(kernel, -shift, axis=tuple(range(p.grid.dim)))
    out = sfft.ifftn(sfft.fftn(p.values) * sfft.fftn(kernel)).real
    out = np.maximum(out, 0.0)
    meta = dict(p.meta)
    meta.update(provenance="mollified", delta1=float(delta1))
    return Profile(p.grid, out, None, meta)


def symmetrize(p, delta2):
    """Blend in the even-in-v1 part on |v1| <= 2*delta2; even exactly on |v1| <= delta2."""
    if delta2 <= 0:
        raise ValidationError("delta2 must be positive")
    meta = dict(p.meta)
    meta.update(provenance="symmetrized", delta2=float(delta2))
    if p.is_even_v1(tol=1e-15):
        return Profile(p.grid, p.values.copy(), p.closure, meta)
    v1 = p.grid.axis()
    sig = cutoff_sigma(v1 / delta2)
    odd = 0.5 * (p.values - _flip_v1(p.values))
    shape = (p.grid.n,) + (1,) * (p.grid.dim - 1)
    out = p.values - odd * sig.reshape(shape)
    out = np.maximum(out, 0.0)
    return Profile(p.grid, out, None, meta)


def taper_tail(p, radius):
    """Cut the profile off outside |v| >= 2*radius and renormalise.

    The cut-off radius is a free parameter; callers choose it so the removed
    mass is negligible for their tolerance.
    """
    mesh = p.grid.mesh()
    r = np.sqrt(sum(m ** 2 for m in mesh))
    out = p.values * cutoff_sigma(r / radius)
    meta = dict(p.meta)
    meta.update(provenance="tapered", tail_radius=float(radius))
    return Profile.from_values(p.grid, out, meta=meta, normalize=True, validate=False)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

@dataclass
class ProjectedProfile:
    """Marginal f_e(alpha) of a profile along a unit direction."""

    direction: np.ndarray
    alphas: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    closure1d: Mixture1D | None
    parent_mass: float

    def __post_init__(self):
        self._splines = {}

    @property
    def h(self):
        return float(self.alphas[1] - self.alphas[0])

    def _spline(self, which, data):
        spl = self._splines.get(which)
        if spl is None:
            spl = _decaying_spline(self.alphas, data)
            self._splines[which] = spl
        return spl

    def val(self, a):
        if self.closure1d is not None:
            return self.closure1d.val(a)
        return self._spline("val", self.values)(a)

    def dval(self, a):
        if self.closure1d is not None:
            return self.closure1d.dval(a)
        return self._spline("dval", self.derivative)(a)

    def d2val(self, a):
        if self.closure1d is not None:
            return self.closure1d.d2val(a)
        if "d2" not in self._splines:
            dd = _spectral_derivative(self.derivative, self.alphas)
            self._splines["d2"] = _decaying_spline(self.alphas, dd)
        return self._splines["d2"](a)


def _spectral_derivative(values, axis_pts):
    xi = 2.0 * np.pi * sfft.fftfreq(len(axis_pts), d=axis_pts[1] - axis_pts[0])
    return sfft.ifft(1j * xi * sfft.fft(values)).real


def _decaying_spline(x, y):
    """Quintic spline evaluator returning 0 outside the sampled range."""
    from scipy.interpolate import make_interp_spline

    spl = make_interp_spline(x, y, k=5)
    lo, hi = x[0], x[-1]

    def evaluate(a):
        a = np.asarray(a, dtype=float)
        scalar = a.ndim == 0
        a = np.atleast_1d(a)
        out = np.zeros_like(a)
        inside = (a >= lo) & (a <= hi)
        out[inside] = spl(a[inside])
        return out[0] if scalar else out

    return evaluate


def _shear(values, ax_moving, ax_fixed, s, coords):
    """Apply f(v) -> f(v + s * v_fixed * e_moving) spectrally along ax_moving."""
    n = values.shape[ax_moving]
    h = coords[1] - coords[0]
    xi = 2.0 * np.pi * sfft.fftfreq(n, d=h)
    fhat = sfft.fft(values, axis=ax_moving)
    shape_xi = [1] * values.ndim
    shape_xi[ax_moving] = n
    shape_y = [1] * values.ndim
    shape_y[ax_fixed] = values.shape[ax_fixed]
    phase = np.exp(1j * xi.reshape(shape_xi) * (s * coords).reshape(shape_y))
    return sfft.ifft(fhat * phase, axis=ax_moving).real


def rotate_plane(values, coords, theta, ax_a=0, ax_b=1):
    """Rotate samples in the (ax_a, ax_b) plane by angle theta via three shears.

    Returns g with g(v) = f(R_theta v); accurate for fields decaying below
    roundoff at the domain boundary.  |theta| is reduced to <= pi/4 with
    exact quarter-turn index operations first.
    """
    quarter = int(np.round(theta / (np.pi / 2.0)))
    theta = theta - quarter * np.pi / 2.0
    out = values
    for _ in range(quarter % 4):
        # quarter turn: (a, b) -> (b, -a) sample map, exact on the grid
        out = np.flip(np.swapaxes(out, ax_a, ax_b), axis=ax_b)
        out = np.roll(out, 1, axis=ax_b)
    if abs(theta) > 1e-15:
        t = -np.tan(theta / 2.0)
        s = np.sin(theta)
        out = _shear(out, ax_a, ax_b, t, coords)
        out = _shear(out, ax_b, ax_a, s, coords)
        out = _shear(out, ax_a, ax_b, t, coords)
    return out


def project(p, e):
    """Marginal of the profile along unit vector e, with its derivative.

    Oblique directions use spectral shear rotations of the sampled field;
    closure-backed profiles get the exact projected mixture attached.
    """
    e = np.asarray(e, dtype=float).reshape(-1)
    if e.size != p.grid.dim:
        raise ValidationError("direction dimension mismatch")
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise ValidationError("direction must be a unit vector (within 1e-12)")

    alphas = p.grid.axis()
    closure1d = p.closure.project_unit(e) if p.closure is not None else None

    if closure1d is not None:
        vals = closure1d.val(alphas)
        deriv = closure1d.dval(alphas)
    else:
        vals = _project_values(p, e)
        deriv = _spectral_derivative(vals, alphas)

    pp = ProjectedProfile(e, alphas, vals, deriv, closure1d, p.mass_grid)
    m = float(np.sum(vals) * pp.h)
    if abs(m - pp.parent_mass) > 1e-8 * max(1.0, abs(pp.parent_mass)):
        raise QuadratureConvergenceError(
            f"projected mass {m:.10f} != parent mass {pp.parent_mass:.10f}"
        )
    return pp


def _project_values(p, e):
    return project_field(p.values, p.grid, e)


def project_field(values, grid, e):
    """Marginal of an arbitrary sampled field along a unit direction.

    Same spectral shear-rotation machinery as profile projection, without
    any mass or positivity requirements (used for per-mode initial data).
    """
    e = np.asarray(e, dtype=float)
    d = grid.dim
    cell_t = grid.h ** (d - 1)
    if d == 1:
        return values if e[0] > 0 else _flip_v1(values)
    coords = grid.axis()
    if d == 2:
        theta = math.atan2(e[1], e[0])
        rot = rotate_plane(values, coords, theta, 0, 1)
        return rot.sum(axis=1) * cell_t
    # d == 3: rotate e into +e1 by two planar rotations
    phi = math.atan2(e[1], e[0])
    rot = rotate_plane(values, coords, phi, 0, 1)
    theta = math.atan2(e[2], math.hypot(e[0], e[1]))
    rot = rotate_plane(rot, coords, theta, 0, 2)
    return rot.sum(axis=(1, 2)) * cell_t


# ---------------------------------------------------------------------------
# moments and the singular v1-integral
# ---------------------------------------------------------------------------

def moments(p):
    """(mass, momentum vector, kinetic energy) with Richardson error estimates."""
    mesh = p.grid.mesh()
    cell = p.grid.cell

    def all_three(values, mesh, cell, step):
        sl = (slice(None, None, step),) * p.grid.dim
        v = values[sl]
        m = [g[sl] for g in mesh]
        c = cell * step ** p.grid.dim
        mass = float(np.sum(v) * c)
        mom = np.array([float(np.sum(g * v) * c) for g in m])
        kin = float(np.sum(sum(g ** 2 for g in m) * v) * c)
        return mass, mom, kin

    fine = all_three(p.values, mesh, cell, 1)
    coarse = all_three(p.values, mesh, cell, 2)
    err = (
        abs(fine[0] - coarse[0]),
        np.abs(fine[1] - coarse[1]),
        abs(fine[2] - coarse[2]),
    )
    return {"mass": fine[0], "momentum": fine[1], "kinetic": fine[2],
            "error": {"mass": err[0], "momentum": err[1], "kinetic": err[2]}}


def dv1_over_v1_integral(p, check=True):
    """Integral of d_v1 f / v1 over velocity space (finite for even-near-0 profiles).

    Closure-backed profiles use the exact Dawson-function value; grid
    profiles use spectral differentiation with the singular row replaced by
    the second derivative, plus an optional refinement-stability check.
    """
    if p.closure is not None:
        return p.closure.pv_d_integral()

    def quad(values, grid):
        ax = grid.axis()
        xi = grid.freqs()
        shape = (grid.n,) + (1,) * (grid.dim - 1)
        fhat = sfft.fft(values, axis=0)
        df = sfft.ifft(1j * xi.reshape(shape) * fhat, axis=0).real
        izero = int(round(grid.vmax / grid.h))
        integrand = np.empty_like(df)
        nz = np.ones(grid.n, dtype=bool)
        nz[izero] = False
        integrand[nz, ...] = df[nz, ...] / ax[nz].reshape((-1,) + (1,) * (grid.dim - 1))
        d2 = sfft.ifft(-(xi.reshape(shape) ** 2) * fhat, axis=0).real
        integrand[izero, ...] = d2[izero, ...]
        return float(np.sum(integrand) * grid.cell)

    full = quad(p.values, p.grid)
    if check:
        sub = quad(p.values[(slice(None, None, 2),) * p.grid.dim], p.grid.coarsened())
        denom = max(abs(full), 1e-12)
        if abs(full - sub) / denom > 1e-3:
            raise QuadratureConvergenceError(
                f"d_v1 f / v1 integral unstable under refinement: {full} vs {sub}"
            )
    return full
