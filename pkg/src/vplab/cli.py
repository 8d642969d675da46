"""Batch front-end: reproducible experiments from key-value config files.

Config format: one ``key = value`` per line, ``#`` comments; dotted keys
group parameters (profile.name, grid.n, ...).  Artifacts are written with
a manifest recording the config hash, package and library versions, and
the tolerances in force.  Exit codes: 0 success, 2 scientific refusal
(Penrose-unstable input where stability is required, or an unstable
penrose verdict), 1 validation or configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import container
from .errors import PenroseUnstableError, ValidationError, VplabError
from .norms import NormSpec, fractional_wsp_norm, mixed_norm, norm_report, weighted_hsb_norm
from .penrose import DualLattice, penrose_check
from .profiles import Profile, VelocityGrid, make_builtin, moments
from . import linear as linear_mod
from . import sim as sim_mod
from .bgk import build_wave
from .profiles import project

COMMANDS = ("penrose", "bgk-build", "linear-decay", "simulate", "norms")


class ExperimentConfig:
    """Validated flat key-value configuration with a stable hash."""

    SCHEMAS = {
        "penrose": {"profile.name", "profile.v0", "profile.width", "grid.n",
                    "grid.vmax", "grid.dim", "periods", "s", "b", "seed"},
        "bgk-build": {"profile.name", "profile.v0", "profile.width", "grid.n",
                      "grid.vmax", "grid.dim", "T1", "c", "eps", "gamma", "r",
                      "v0", "seed"},
        "linear-decay": {"profile.name", "profile.v0", "profile.width",
                         "grid.n", "grid.vmax", "grid.dim", "periods", "kmag",
                         "s_x", "s_v", "b", "t_end", "amplitude", "seed"},
        "simulate": {"profile.name", "profile.v0", "profile.width", "grid.n",
                     "grid.vmax", "grid.dim", "T1", "Nx", "dt", "t_end",
                     "amplitude", "mode", "s_x", "s_v", "b", "cadence", "seed"},
        "norms": {"profile.name", "profile.v0", "profile.width", "grid.n",
                  "grid.vmax", "grid.dim", "kind", "s", "s_x", "s_v", "b", "p",
                  "seed"},
    }

    def __init__(self, command, values, raw_text=""):
        if command not in COMMANDS:
            raise ValidationError(f"unknown command {command!r}")
        allowed = self.SCHEMAS[command]
        bad = [k for k in values if k not in allowed]
        if bad:
            raise ValidationError(
                f"config keys not in the {command} schema: {sorted(bad)}")
        self.command = command
        self.values = dict(values)
        self.raw_text = raw_text

    @classmethod
    def parse(cls, path):
        values = {}
        command = None
        with open(path) as fh:
            text = fh.read()
        for line_no, line in enumerate(text.splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ValidationError(f"{path}:{line_no}: expected key = value")
            key, val = (part.strip() for part in body.split("=", 1))
            if key == "command":
                command = val
            else:
                values[key] = val
        if command is None:
            raise ValidationError(f"{path}: missing 'command = <name>' line")
        return cls(command, values, text)

    def get(self, key, default=None, cast=str):
        if key not in self.values:
            if default is None:
                raise ValidationError(f"missing config key {key!r}")
            return default
        return cast(self.values[key])

    def hash(self):
        canon = self.command + "\n" + "\n".join(
            f"{k}={self.values[k]}" for k in sorted(self.values))
        return hashlib.sha256(canon.encode()).hexdigest()


def _profile_from(config):
    dim = config.get("grid.dim", 1, int)
    grid = VelocityGrid(dim, config.get("grid.vmax", 8.0, float),
                        config.get("grid.n", 256, int))
    name = config.get("profile.name", "maxwellian")
    params = {}
    if name == "double_bump":
        params["v0"] = config.get("profile.v0", 3.0, float)
        params["width"] = config.get("profile.width", 1.0, float)
    if name == "product":
        params["factors"] = [
            ("double_bump", {"v0": config.get("profile.v0", 3.0, float),
                             "width": config.get("profile.width", 1.0, float)}),
        ] + [("gaussian", {"width": 1.0})] * (dim - 1)
    return make_builtin(name, grid, **params)


def _write_manifest(outdir, config, tolerances, extra=None):
    manifest = {
        "config_hash": config.hash(),
        "command": config.command,
        "config": config.values,
        "versions": {
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "vplab": "0.1.0",
        },
        "tolerances": tolerances,
    }
    if extra:
        manifest.update(extra)
    container.write_json(os.path.join(outdir, "manifest.json"), manifest)


def run(config, outdir, threads=1, verbose=False):
    """Execute one experiment; returns the process exit code."""
    os.makedirs(outdir, exist_ok=True)
    sim_mod.set_fft_workers(threads)
    seed = config.get("seed", 0, int)
    np.random.seed(seed)

    if config.command == "penrose":
        profile = _profile_from(config)
        periods = tuple(float(p) for p in config.get("periods").split(","))
        report = penrose_check(profile, DualLattice(periods),
                               config.get("s", 1.6, float),
                               config.get("b", 0.3, float), threads=threads)
        container.write_json(os.path.join(outdir, "penrose.json"),
                             report.to_json())
        _write_manifest(outdir, config, {"margin_tol": 1e-8})
        if verbose:
            print(f"stable={report.stable} B={report.bound:.4g} "
                  f"entries={len(report.entries)}")
        return 0 if report.stable else 2

    if config.command == "bgk-build":
        profile = _profile_from(config)
        t1 = config.get("T1", 6.283185307179586, float)
        eps = config.get("eps", -1.0, float)
        gamma = config.get("gamma", -1.0, float)
        r = config.get("r", -1.0, float)
        wave, rep = build_wave(
            profile, t1, c=config.get("c", 0.0, float),
            eps=None if eps <= 0 else eps,
            gamma=None if gamma <= 0 else gamma,
            r=None if r <= 0 else r)
        container.save_wave(os.path.join(outdir, "wave.vplb"), wave)
        container.wave_to_csv(os.path.join(outdir, "wave.csv"), wave)
        _write_manifest(outdir, config, {
            "period_tol_rel": 1e-9, "poisson_residual_tol": 1e-7},
            extra={"closeness": rep.to_json(), "provenance": {
                k: v for k, v in wave.provenance.items()
                if k != "bisection_widths"}})
        if verbose:
            print(f"distance bound {rep.total:.4g}; "
                  f"residual {wave.poisson_residual():.2e}")
        return 0

    if config.command == "linear-decay":
        profile = _profile_from(config)
        kmag = config.get("kmag", 0.5, float)
        direction = tuple([1.0] + [0.0] * (profile.grid.dim - 1))
        fp = project(profile, direction)
        datum = linear_mod.Datum1D(
            fp.alphas, config.get("amplitude", 1e-3, float) * fp.values)
        series = linear_mod.efield_mode(kmag, fp, datum,
                                        config.get("t_end", 50.0, float),
                                        kvec=(kmag,) + (0.0,) * (profile.grid.dim - 1))
        hist = linear_mod.FieldHistory()
        hist.add(series)
        s_v = config.get("s_v", 1.6, float)
        value = hist.decay_norm(config.get("s_x", 0.0, float), s_v)
        datum_norm = weighted_hsb_norm(
            np.asarray(datum.values.real), profile.grid if profile.grid.dim == 1
            else VelocityGrid(1, profile.grid.vmax, profile.grid.n), s_v, 0.0)
        container.write_csv(
            os.path.join(outdir, f"mode_k{kmag:g}.csv"),
            ["t", "re_E", "im_E", "abs_E"],
            [series.t, series.values.real, series.values.imag,
             np.abs(series.values)])
        container.write_json(os.path.join(outdir, "decay.json"), {
            "s_x": config.get("s_x", 0.0, float),
            "s_v": s_v,
            "norm": value,
            "fitted_C0": value / datum_norm if datum_norm > 0 else 0.0,
            "poisson_relerr": series.poisson_relerr,
            "truncation_error": series.truncation_error,
        })
        _write_manifest(outdir, config, {"window_tol": 1e-8})
        return 0

    if config.command == "simulate":
        profile = _profile_from(config)
        grid = sim_mod.PhaseGrid(config.get("T1", 12.566370614359172, float),
                                 config.get("Nx", 128, int), profile.grid,
                                 config.get("dt", 0.02, float))
        report = sim_mod.run_decay_experiment(
            profile, grid, config.get("amplitude", 1e-3, float),
            config.get("s_x", 0.0, float), config.get("s_v", 1.6, float),
            config.get("b", 0.3, float), config.get("t_end", 20.0, float),
            mode=config.get("mode", 1, int))
        arrays = report.log.arrays()
        container.write_csv(
            os.path.join(outdir, "diagnostics.csv"),
            ["t", "mass", "kinetic", "e_l2sq", "e_hs", "je", "energy"],
            [arrays[k] for k in ("t_mid", "mass", "kinetic", "e_l2sq",
                                 "e_hs", "je", "energy")])
        last = sorted(report.log.snapshots)[-1]
        snap = report.log.snapshots[last]
        final_profile = Profile(profile.grid, snap.f.mean(axis=0), None,
                                {"provenance": "simulation-final-xmean"})
        container.save_profile(os.path.join(outdir, "final_state.vplb"),
                               final_profile)
        container.write_json(os.path.join(outdir, "summary.json"), {
            "final_over_max": report.final_over_max,
            "weighted_integral": report.weighted_integral_full,
            "growth_fraction": report.growth_fraction,
            "identity_residual": report.identity_residual,
            "perturbation_norm": report.perturbation_norm,
            "clipped_mass": snap.clipped_mass,
        })
        _write_manifest(outdir, config, {
            "mass_tol_per_step": 1e-10, "energy_rel_tol": 1e-6})
        return 0

    if config.command == "norms":
        profile = _profile_from(config)
        kind = config.get("kind", "weighted_Hsb")
        spec = NormSpec(kind, dim=profile.grid.dim,
                        s=config.get("s", 0.0, float),
                        s_x=config.get("s_x", 0.0, float),
                        s_v=config.get("s_v", 0.0, float),
                        b=config.get("b", 0.0, float),
                        p=config.get("p", 2.0, float))
        if kind == "weighted_Hsb":
            value = weighted_hsb_norm(profile.values, profile.grid, spec.s, spec.b)
            coarse = weighted_hsb_norm(
                profile.values[(slice(None, None, 2),) * profile.grid.dim],
                profile.grid.coarsened(), spec.s, spec.b)
        elif kind == "fractional_Wsp":
            value = fractional_wsp_norm(profile.values, profile.grid, spec.s, spec.p)
            coarse = fractional_wsp_norm(
                profile.values[(slice(None, None, 2),) * profile.grid.dim],
                profile.grid.coarsened(), spec.s, spec.p)
        elif kind == "L1":
            value = float(np.sum(np.abs(profile.values))) * profile.grid.cell
            coarse = value
        elif kind == "weighted_L1_second_moment":
            mesh = profile.grid.mesh()
            w = sum(m ** 2 for m in mesh)
            value = float(np.sum(np.abs(profile.values) * w)) * profile.grid.cell
            coarse = value
        else:
            raise ValidationError(f"norms command does not support {kind!r}")
        rec = norm_report(kind, spec.__dict__, value, abs(value - coarse))
        container.write_json(os.path.join(outdir, "norm.json"), rec)
        _write_manifest(outdir, config, {})
        if verbose:
            print(json.dumps(rec))
        return 0

    raise ValidationError(f"unhandled command {config.command}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vplab", description="kinetic-equilibrium numerical laboratory")
    parser.add_argument("--config", required=True, help="key = value config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    try:
        config = ExperimentConfig.parse(args.config)
        return run(config, args.out, threads=args.threads, verbose=args.verbose)
    except PenroseUnstableError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (VplabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
