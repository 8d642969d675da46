import numpy as np
import pytest
from scipy.special import ellipk

from vplab.bgk import (
    BifurcationH,
    build_modified,
    build_wave,
    decompose,
    galilean_boost,
    h_function,
    hprime0_centered,
    make_h,
    match_period,
    obstruction_1d_contrast,
    obstruction_diagnostic,
    obstruction_fixed_point,
    periodic_orbit,
    select_case,
)
from vplab.errors import (
    AmplitudeTooLargeError,
    BracketError,
    ValidationError,
)
from vplab.profiles import Profile, VelocityGrid, make_builtin, mollify, symmetrize


class HarmonicH:
    def __init__(self, om):
        self.om = om

    def __call__(self, b):
        return -self.om ** 2 * np.asarray(b, dtype=float)

    def hprime0(self):
        return -self.om ** 2


class PendulumH:
    def __call__(self, b):
        return -np.sin(np.asarray(b, dtype=float))

    def hprime0(self):
        return -1.0


def tuned_case3_profile(T1=2 * np.pi, width=0.45):
    """Offset-pair profile tuned so the PV integral equals (2 pi / T1)^2."""
    from scipy.optimize import brentq
    from vplab.profiles import GaussianPairTerm

    target = (2 * np.pi / T1) ** 2

    def d_of(v0):
        return GaussianPairTerm(1.0, v0, width, ()).pv_d_integral() - target

    v0 = brentq(d_of, 0.9, 1.9, xtol=1e-13)
    grid = VelocityGrid(2, 8.0, 256)
    return make_builtin("product", grid, factors=[
        ("double_bump", {"v0": v0, "width": width}),
        ("gaussian", {"width": 1.0})]), v0


class TestDecompose:
    def test_even_profile_branches_agree(self, maxwellian2):
        dec = decompose(maxwellian2, 1.0)
        y = np.linspace(-0.2, 4.0, 64)
        w = np.array([0.3])
        assert np.allclose(dec.g_plus(y, w), dec.g_minus(y, w), atol=1e-15)

    def test_reconstruction_random_points(self, maxwellian2, rng):
        dec = decompose(maxwellian2, 1.0)
        v1 = rng.uniform(-6, 6, size=10000)
        v2 = rng.uniform(-6, 6, size=10000)
        rebuilt = dec.reconstruct(v1, v2)
        expect = maxwellian2.closure.f_points(v1, v2)
        assert np.max(np.abs(rebuilt - expect)) < 1e-10

    def test_vanishes_below_window(self, maxwellian2):
        dec = decompose(maxwellian2, 1.0)  # a = 0.5, 4a^2 = 1
        y = np.array([-1.01, -2.0, -5.0])
        assert np.all(dec.g_plus(y, np.array([0.0])) == 0.0)

    def test_asymmetric_rejected(self, grid1):
        ax = grid1.axis()
        p = Profile.from_values(
            grid1, np.exp(-((ax - 1.0) ** 2) / 2) / np.sqrt(2 * np.pi))
        with pytest.raises(ValidationError):
            decompose(p, 0.5)

    def test_grid_path_reconstruction(self, grid1):
        # exact at grid points, spline-accurate between
        ax = grid1.axis()
        p = Profile.from_values(
            grid1, np.exp(-((ax - 1.0) ** 2) / 2) / np.sqrt(2 * np.pi))
        sym = symmetrize(mollify(p, 0.1), 0.8)
        dec = decompose(sym, 0.8)
        nodes = np.abs(ax) < 5.0
        rebuilt = dec.reconstruct(ax[nodes])
        assert np.max(np.abs(rebuilt - sym.values[nodes])) < 1e-10
        mid = 0.5 * (ax[:-1] + ax[1:])
        sel = np.abs(mid) < 5.0
        between = dec.reconstruct(mid[sel])
        expect = np.interp(mid[sel], ax, sym.values)
        assert np.max(np.abs(between - expect)) < 1e-3


class TestSelectCase:
    def test_maxwellian_case1(self, maxwellian2):
        sel = select_case(maxwellian2, 2 * np.pi)
        assert sel.case == 1
        assert abs(sel.d_integral + 1.0) < 1e-12
        assert sel.diagnostic < 0

    def test_strong_pair_case2(self):
        # tune the pair so the PV integral is twice (2 pi / T1)^2
        from scipy.optimize import brentq
        from vplab.profiles import GaussianPairTerm

        w = 0.35
        v0 = brentq(lambda v: GaussianPairTerm(1.0, v, w, ()).pv_d_integral()
                    - 2.0, 0.7, 1.4, xtol=1e-13)
        grid = VelocityGrid(2, 8.0, 256)
        p = make_builtin("product", grid, factors=[
            ("double_bump", {"v0": v0, "width": w}),
            ("gaussian", {"width": 1.0})])
        sel = select_case(p, 2 * np.pi)
        assert sel.case == 2
        assert abs(sel.d_integral - 2.0) < 1e-10

    def test_tuned_case3(self):
        p, _ = tuned_case3_profile()
        sel = select_case(p, 2 * np.pi)
        assert sel.case == 3


class TestBuildModified:
    def test_case3_identity_at_one(self, maxwellian2):
        mp = build_modified(maxwellian2, 0.0, 1.0, 3)
        assert np.allclose(mp.as_profile().values, maxwellian2.values,
                           atol=1e-15)

    def test_mass_one_all_parameters(self, maxwellian2):
        for gamma, delta, case in ((0.05, 0.6, 1), (0.01, 1.4, 2),
                                   (0.0, 0.8, 3)):
            mp = build_modified(maxwellian2, gamma, delta, case, v0=3.0)
            assert abs(mp.mass() - 1.0) < 1e-13

    def test_wsp_distance_vanishes_with_gamma(self, maxwellian2):
        from vplab.closeness import modified_profile_distance

        dists = [modified_profile_distance(
            build_modified(maxwellian2, g, 1.0, 1, v0=3.0), 1.2, 2.0).total
            for g in (0.1, 0.05, 0.02, 0.01)]
        assert all(np.diff(dists) < 0)

    def test_low_v0_rejected_case1(self, maxwellian2):
        with pytest.raises(ValidationError):
            build_modified(maxwellian2, 0.05, 1.0, 1, v0=0.3)


class TestHFunction:
    def test_h_zero_is_zero(self, maxwellian2):
        dec = decompose(maxwellian2, 1.0)
        mp = build_modified(maxwellian2, 0.1, 1.0, 1, v0=3.0)
        assert abs(h_function(mp, dec, 0.0)) < 1e-10

    def test_hprime_negative_and_centered_match(self, maxwellian2):
        mp = build_modified(maxwellian2, 0.1, 1.0, 1, v0=3.0)
        h = make_h(mp)
        exact = h.hprime0()
        assert exact < 0
        assert abs(hprime0_centered(h, 1e-7) - exact) < 1e-6 * abs(exact)

    def test_pure_maxwellian_not_a_center(self, maxwellian2):
        mp = build_modified(maxwellian2, 0.0, 1.0, 3)  # identity scaling
        h = make_h(mp)
        assert abs(h.hprime0() - 1.0) < 1e-12
        with pytest.raises(ValidationError):
            periodic_orbit(h, 1e-3)

    def test_potential_matches_h(self, maxwellian2):
        # V' = -h, checked by interior centred differences
        mp = build_modified(maxwellian2, 0.1, 1.0, 1, v0=3.0)
        h = make_h(mp)
        bs = np.linspace(-2e-3, 2e-3, 201)
        dV = np.gradient(h.potential(bs), bs)
        scale = np.max(np.abs(h(bs)))
        assert np.max(np.abs(dV + h(bs))[2:-2]) < 1e-4 * scale


class TestPeriodicOrbit:
    def test_harmonic_period_any_amplitude(self):
        for om in (0.5, 2.0):
            for r in (1e-5, 1e-2):
                orb = periodic_orbit(HarmonicH(om), r)
                assert abs(orb.period - 2 * np.pi / om) < 1e-10
                assert abs(orb.r - r) < 1e-11 * r

    def test_pendulum_vs_elliptic_oracle(self):
        for r in (1e-2, 0.5, 2.0):
            orb = periodic_orbit(PendulumH(), r)
            exact = 4.0 * ellipk(np.sin(orb.beta_plus / 2.0) ** 2)
            assert abs(orb.period - exact) < 1e-10

    def test_pendulum_period_monotone_toward_separatrix(self):
        rs = (0.5, 2.0, 4.0, 6.0)
        periods = [periodic_orbit(PendulumH(), r).period for r in rs]
        assert all(np.diff(periods) > 0)

    def test_period_limit_rate(self, maxwellian2):
        mp = build_modified(maxwellian2, 0.1, 1.0, 1, v0=3.0)
        h = make_h(mp)
        om2 = -h.hprime0()
        devs = [abs((2 * np.pi / periodic_orbit(h, r).period) ** 2 - om2)
                for r in (1e-2, 1e-3, 1e-4)]
        assert all(np.diff(devs) < 0)
        # O(r) or better: consecutive ratios drop at least linearly
        assert devs[1] < 0.2 * devs[0]
        assert devs[2] < 0.2 * devs[1]

    def test_amplitude_too_large_detected(self, maxwellian2):
        # the narrow feature bounds the admissible potential range; a huge
        # amplitude request must fail loudly rather than extrapolate
        mp = build_modified(maxwellian2, 0.05, 1.0, 1, v0=3.0)
        h = make_h(mp)
        with pytest.raises(AmplitudeTooLargeError):
            periodic_orbit(h, 1.0)


class TestMatchPeriod:
    def test_case1_end_to_end(self, maxwellian2):
        t1 = 2 * np.pi
        delta, wave = match_period(maxwellian2, t1, gamma=0.1, r=1e-3)
        assert abs(wave.amplitude - 1e-3) < 1e-12
        assert wave.poisson_residual() <= 1e-7
        assert wave.count_maxima() == 1
        assert np.max(np.abs(wave.efield)) > 0.1 * wave.amplitude / t1
        assert wave.min_distribution_value() >= 0.0
        assert abs(wave.mass_per_period() - t1) < 1e-7
        widths = wave.provenance["bisection_widths"]
        ratios = np.diff(np.log(np.asarray(widths[1:])))
        assert np.allclose(np.exp(ratios), 0.5, atol=1e-9)

    def test_distance_to_profile_vanishes_with_r(self, maxwellian2):
        from vplab.closeness import wave_profile_distance

        dists = []
        for r in (1e-3, 1e-4, 1e-5):
            _, wave = match_period(maxwellian2, 2 * np.pi, gamma=0.1, r=r)
            dists.append(wave_profile_distance(wave).total)
        assert all(np.diff(dists) < 0)
        assert dists[-1] < 2e-2 * dists[0]

    def test_bracket_failure_reported(self, maxwellian2):
        # far outside the admissible scale range the endpoints carry no
        # periodic orbit at all; the error still reports both entries
        with pytest.raises(BracketError) as err:
            match_period(maxwellian2, 2 * np.pi, gamma=0.1, r=1e-3,
                         delta_bracket=(4.0, 5.0))
        assert hasattr(err.value, "t_lo") and hasattr(err.value, "t_hi")
        assert "not inside" in str(err.value)

    def test_case3_resolvable_wave(self):
        p, _ = tuned_case3_profile()
        delta, wave = match_period(p, 2 * np.pi, 0.0, 1e-3, case=3)
        assert abs(delta - 1.0) < 0.05
        assert wave.poisson_residual() <= 1e-7
        assert wave.min_distribution_value() >= 0.0


class TestGalileanBoost:
    def test_zero_boost_identity(self, maxwellian2):
        _, wave = match_period(maxwellian2, 2 * np.pi, gamma=0.1, r=1e-3)
        same = galilean_boost(wave, 0.0)
        assert np.array_equal(same.beta, wave.beta)
        assert same.c == wave.c

    def test_boost_then_unboost(self, maxwellian2):
        _, wave = match_period(maxwellian2, 2 * np.pi, gamma=0.1, r=1e-3)
        back = galilean_boost(galilean_boost(wave, 0.7), -0.7)
        x = np.linspace(0, 2 * np.pi, 17)
        v1 = np.linspace(-3, 3, 13)
        a = wave.f_eval(x[:, None], v1[None, :], 0.0)
        b = back.f_eval(x[:, None], v1[None, :], 0.0)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_travelling_residual(self, maxwellian2):
        # d_t f + v d_x f - E d_v f must vanish for the boosted closure;
        # evaluated spectrally on a periodic sample at t = 0 where
        # d_t f = -c d_x f
        from scipy import fft as sfft

        _, wave = match_period(maxwellian2, 2 * np.pi, gamma=0.1, r=1e-3)
        boosted = galilean_boost(wave, 0.5)
        nx, nv = 256, 1024
        x = 2 * np.pi / nx * np.arange(nx)
        vmax = 10.0
        v1 = -vmax + 2 * vmax / nv * np.arange(nv)
        f = boosted.f_eval(x[:, None], v1[None, :], 0.0)
        kx = 2 * np.pi * sfft.fftfreq(nx, d=x[1] - x[0])
        dfdx = sfft.ifft(1j * kx[:, None] * sfft.fft(f, axis=0), axis=0).real
        eta = 2 * np.pi * sfft.fftfreq(nv, d=v1[1] - v1[0])
        dfdv = sfft.ifft(1j * eta[None, :] * sfft.fft(f, axis=1), axis=1).real
        e = boosted.efield_at(x)
        resid = (-boosted.c * dfdx + v1[None, :] * dfdx
                 - e[:, None] * dfdv)
        assert np.max(np.abs(resid)) < 1e-6


class TestBuildWave:
    def test_budgeted_build(self, maxwellian2):
        wave, rep = build_wave(maxwellian2, 2 * np.pi, eps=0.5)
        assert rep.total < 0.5
        assert rep.conservative

    def test_explicit_parameters(self, maxwellian2):
        wave, rep = build_wave(maxwellian2, 2 * np.pi, gamma=0.1, r=1e-3)
        assert wave.amplitude == pytest.approx(1e-3, rel=1e-10)


class TestObstruction:
    def test_exponential_mu_certificate(self, rng):
        periods = (2 * np.pi, 2 * np.pi)
        nx = 64
        x = np.linspace(0, periods[0], nx, endpoint=False)
        for _ in range(3):
            beta = (0.3 * np.cos(x[:, None] + rng.uniform(0, 6))
                    * np.sin(2 * x[None, :] + rng.uniform(0, 6)))
            cert = obstruction_diagnostic(lambda e: np.exp(-e), beta, periods)
            assert cert.certificate == "only_trivial_solutions"
            assert cert.gprime_max < 0
            assert cert.grad_identity_rhs <= 0 <= cert.grad_identity_lhs
            assert cert.elliptic_residual > 1e-3  # nonconstant candidates fail

    def test_constant_candidate_zero_identity(self):
        periods = (2 * np.pi, 2 * np.pi)
        beta = np.full((32, 32), -np.log(2 * np.pi))
        cert = obstruction_diagnostic(lambda e: np.exp(-e), beta, periods)
        assert abs(cert.grad_identity_lhs) < 1e-20
        assert abs(cert.grad_identity_rhs) < 1e-20
        assert cert.elliptic_residual < 1e-10

    def test_fixed_point_lands_on_constant(self, rng):
        periods = (2 * np.pi, 2 * np.pi)
        beta0 = 0.2 * rng.standard_normal((32, 32))
        beta, grad = obstruction_fixed_point(lambda e: np.exp(-e), periods,
                                             (32, 32), beta0)
        assert grad < 1e-8
        assert abs(np.mean(beta) + np.log(2 * np.pi)) < 1e-6

    def test_negative_mu_rejected(self):
        with pytest.raises(ValidationError):
            obstruction_diagnostic(lambda e: e, np.zeros((16, 16)),
                                   (2 * np.pi, 2 * np.pi))

    def test_1d_contrast_sign_change(self):
        # mu(e) = e^2 exp(-e) on e > 0 gives a 1D source slope of both signs
        def mu(e):
            e = np.asarray(e, dtype=float)
            return np.where(e > 0, e ** 2 * np.exp(-np.clip(e, 0, 700)), 0.0)

        rep = obstruction_1d_contrast(mu, (-3.0, 3.0))
        assert rep["certificate"] is None
        assert rep["changes_sign"]
