"""Command-line front end: one subcommand per analysis.

Exit codes: 0 success, 2 usage, 3 config, 4 numerical failure, 5 input data.
Every command writes its outputs atomically plus a JSON manifest next to
them; reruns with identical inputs reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import deer, dipolar, odmr, relaxometry, spin
from .errors import (
    AmbiguousLabeling,
    ConfigError,
    DegenerateData,
    FitDiverged,
    GridMismatch,
    NegativeDensity,
    NoDecay,
    NonFiniteInput,
    NonMonotoneDepth,
    ParseError,
    ZeroShape,
)
from .output import RunManifest, atomic_write, csv_text, file_digest, json_text

log = logging.getLogger("hybridspin")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4
EXIT_DATA = 5


class UsageError(Exception):
    pass


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def _finish(command: str, config: dict, outputs: list[Path], manifest_at: Path, seed: int | None = None) -> int:
    m = RunManifest(command, config, seed=seed, outputs=[p.name for p in outputs])
    m.write(manifest_at)
    return EXIT_OK


def _species(args) -> spin.SpinSpecies:
    sp = spin.load_species(args.species)
    d = sp.to_dict()
    for flag, key in (("d_gs_mhz", "d_gs_mhz"), ("d_es_mhz", "d_es_mhz"), ("e_strain_mhz", "e_strain_mhz"), ("gamma_e", "gamma_e_mhz_per_mt")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    return spin.SpinSpecies.from_dict(d)


def _add_species_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-gs-mhz", type=float)
    p.add_argument("--d-es-mhz", type=float)
    p.add_argument("--e-strain-mhz", type=float)
    p.add_argument("--gamma-e", type=float, help="MHz/mT")


# -- mixing-scan ------------------------------------------------------------------

def cmd_mixing_scan(args) -> int:
    if not args.species:
        raise UsageError("--species is required")
    sp = _species(args)
    if args.b_steps < 1:
        raise UsageError("--b-steps must be at least 1")
    grid = np.linspace(args.b_start, args.b_end, args.b_steps) if args.b_steps > 1 else np.array([args.b_start])
    table = spin.mixing_scan(sp, args.angle_deg, grid, args.manifold)
    header = ["B_mt"] + [f"{c}{k}" for c in "abg" for k in range(3)]
    rows = []
    for b, ov in zip(table.b_mt, table.overlaps):
        rows.append([b, *ov[:, 0], *ov[:, 1], *ov[:, 2]])
    out = atomic_write(args.out, csv_text(header, rows))
    config = {
        "species": sp.to_dict(),
        "angle_deg": args.angle_deg,
        "b_grid": [args.b_start, args.b_end, args.b_steps],
        "manifold": str(spin.Manifold(args.manifold).value),
    }
    return _finish("mixing-scan", config, [out], _manifest_path(out))


# -- synthesize-odmr --------------------------------------------------------------

def cmd_synthesize_odmr(args) -> int:
    species = [spin.load_species(s) for s in args.species or []]
    if args.field_along:
        direction = spin.load_species(args.field_along).axis
    else:
        v = np.asarray(args.field_dir, dtype=float)
        if np.linalg.norm(v) == 0:
            raise UsageError("--field-dir must be nonzero")
        direction = v / np.linalg.norm(v)
    field = spin.FieldConfig(args.b_mt, direction)
    lines = []
    for sp in species:
        lines += odmr.species_lines(sp, field, args.base_contrast, args.fwhm_mhz)
    grid = np.linspace(args.f_start, args.f_end, args.f_steps)
    spec = odmr.synthesize_spectrum(lines, grid)
    out = atomic_write(args.out, csv_text(["frequency_mhz", "signal"], zip(spec.frequency_grid, spec.signal)))
    config = {
        "species": [s.to_dict() for s in species],
        "field_mt": args.b_mt,
        "field_direction": [float(c) for c in direction],
        "base_contrast": args.base_contrast,
        "fwhm_mhz": args.fwhm_mhz,
        "grid": [args.f_start, args.f_end, args.f_steps],
        "lines": [[ln.center, ln.linewidth_fwhm, ln.contrast] for ln in lines],
    }
    return _finish("synthesize-odmr", config, [out], _manifest_path(out))


# -- relaxometry ------------------------------------------------------------------

def _read_relaxometry_csv(path: Path) -> list[relaxometry.RelaxometryPoint]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(0, str(exc)) from None
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ParseError(0, "empty relaxometry file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["f_plus_mhz", "rate_per_ms"]:
        raise ParseError(1, f"unexpected header {header!r}")
    has_sigma = len(header) > 2 and header[2] == "sigma_per_ms"
    points = []
    for i, r in enumerate(rows[1:], start=2):
        try:
            vals = [float(x) for x in r]
            sigma = vals[2] if has_sigma and len(vals) > 2 else None
            points.append(relaxometry.RelaxometryPoint(vals[0], vals[1], sigma))
        except (ValueError, IndexError) as exc:
            raise ParseError(i, str(exc)) from None
    if not points:
        raise ParseError(1, "no data rows")
    return points


def cmd_simulate_t1(args) -> int:
    model = relaxometry.RelaxModel(args.b_khz, args.gamma_mhz, args.baseline_per_ms, args.f_center_mhz, args.readout_factor)
    f = np.linspace(args.f_start, args.f_end, args.n_points)
    rate = relaxometry.relaxation_rate(model, f)
    sigma = args.noise_rel * rate if args.noise_rel > 0 else None
    if sigma is not None:
        u = deer._rng(args.seed, 7).random((f.size, 2))
        # Box-Muller on raw uniforms keeps the stream independent of numpy's samplers
        z = np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])
        rate = rate + sigma * z
    header = ["f_plus_mhz", "rate_per_ms"] + (["sigma_per_ms"] if sigma is not None else [])
    cols = [f, rate] + ([sigma] if sigma is not None else [])
    out = atomic_write(args.out, csv_text(header, zip(*cols)))
    config = {"model": model.to_json(), "grid": [args.f_start, args.f_end, args.n_points], "noise_rel": args.noise_rel}
    return _finish("simulate-t1", config, [out], _manifest_path(out), seed=args.seed)


def cmd_fit_t1(args) -> int:
    path = Path(args.input)
    points = _read_relaxometry_csv(path)
    init = relaxometry.initial_guess(points, args.readout_factor)
    result = relaxometry.fit_relaxometry(points, init)
    payload = result.model.to_json()
    payload["covariance"] = result.covariance.tolist()
    payload["chi2"] = result.chi2
    payload["strong_dephasing"] = result.model.strong_dephasing
    out = atomic_write(args.out, json_text(payload))
    config = {"input_sha256": file_digest(path), "readout_factor": args.readout_factor}
    return _finish("fit-t1", config, [out], _manifest_path(out))


# -- estimate-density -------------------------------------------------------------

def cmd_estimate_density(args) -> int:
    path = Path(args.profile)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(0, str(exc)) from None
    shape = dipolar.load_depth_profile(text).normalized()
    rho, rho_sigma = dipolar.estimate_density(args.b_khz, args.b_sigma_khz, shape, args.standoff_nm)
    b_rms = args.b_khz * 1e-3 / dipolar.GAMMA_E_MHZ_PER_MT
    payload = {"rho_total_nm2": rho, "rho_sigma_nm2": rho_sigma, "b_rms_mt": b_rms, "b_khz": args.b_khz}
    out = atomic_write(args.out, json_text(payload))
    config = {
        "profile_sha256": file_digest(path),
        "b_khz": args.b_khz,
        "b_sigma_khz": args.b_sigma_khz,
        "standoff_nm": args.standoff_nm,
    }
    return _finish("estimate-density", config, [out], _manifest_path(out))


# -- simulate-deer ----------------------------------------------------------------

def _deer_inputs(args):
    if args.profile:
        path = Path(args.profile)
        try:
            profile = dipolar.load_depth_profile(path.read_text())
        except OSError as exc:
            raise ParseError(0, str(exc)) from None
        profile_desc = {"sha256": file_digest(path)}
    else:
        profile = dipolar.LayeredProfile.single(args.layer_depth_nm, args.rho_nm2)
        profile_desc = {"depth_nm": args.layer_depth_nm, "rho_nm2": args.rho_nm2}
    spec = deer.BathSpec(
        profile,
        polarization=args.p,
        drive_efficiency=args.eta,
        nv_standoff=args.standoff_nm,
        lateral_cutoff=args.cutoff_nm,
        tilt_deg=args.tilt_deg,
    )
    grid = np.linspace(0.0, args.t_max_us, args.t_steps)
    config = deer.DeerConfig(grid, args.t2_us, args.stretch, args.n_samples, args.seed, args.sequence.upper())
    resolved = {
        "profile": profile_desc,
        "polarization": spec.polarization,
        "drive_efficiency": spec.drive_efficiency,
        "nv_standoff_nm": spec.nv_standoff,
        "lateral_cutoff_nm": spec.lateral_cutoff,
        "tilt_deg": spec.tilt_deg,
        "t2_us": config.t2,
        "stretch_n": config.stretch_n,
        "grid": [0.0, args.t_max_us, args.t_steps],
        "n_samples": config.n_samples,
        "sequence": config.sequence.value,
        "rng": deer.RNG_ALGORITHM,
        "block": deer.BLOCK,
    }
    return spec, config, resolved


def _signal_csv(sig: deer.DeerSignal) -> str:
    quad = sig.quadrature if sig.quadrature is not None else np.zeros_like(sig.coherence)
    return csv_text(["tau_us", "coherence", "stderr", "quadrature"], zip(sig.tau_grid, sig.coherence, sig.stderr, quad))


def cmd_simulate_deer(args) -> int:
    spec, config, resolved = _deer_inputs(args)
    out = Path(args.out)
    if not args.sweep:
        sig = deer.deer_signal(spec, config, workers=args.workers)
        written = atomic_write(out, _signal_csv(sig))
        return _finish("simulate-deer", resolved, [written], _manifest_path(written), seed=config.seed)

    if not args.values:
        raise UsageError("--sweep needs --values")
    out.mkdir(parents=True, exist_ok=True)
    rows = deer.sweep(args.sweep, args.values, spec, config, workers=args.workers)
    written = []
    index = []
    for i, row in enumerate(rows):
        name = f"{args.sweep}_{i:03d}.csv"
        written.append(atomic_write(out / name, _signal_csv(row.signal)))
        index.append({"value": row.value, "seed": row.seed, "file": name, "decay_rate_per_us": None if np.isnan(row.rate) else row.rate})
    written.append(atomic_write(out / "index.json", json_text({"axis": args.sweep, "runs": index})))
    resolved = dict(resolved, sweep={"axis": args.sweep, "values": list(args.values)})
    return _finish("simulate-deer", resolved, written, out / "manifest.json", seed=config.seed)


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridspin", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument(
        "--config",
        help="JSON file with one object per subcommand holding flag defaults; explicit flags still win",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    parser.set_defaults(_subparsers=sub.choices)

    p = sub.add_parser("mixing-scan", help="|0>_z overlaps versus field magnitude")
    p.add_argument("--species", help="species name (nv, vb) or JSON path")
    p.add_argument("--angle-deg", type=float, default=0.0)
    p.add_argument("--b-start", type=float, default=0.0)
    p.add_argument("--b-end", type=float, default=150.0)
    p.add_argument("--b-steps", type=int, default=151)
    p.add_argument("--manifold", choices=["GS", "ES"], default="GS")
    p.add_argument("--out", required=True)
    _add_species_overrides(p)
    p.set_defaults(func=cmd_mixing_scan)

    p = sub.add_parser("synthesize-odmr", help="CW ODMR spectrum with mixing-limited contrast")
    p.add_argument("--species", action="append", help="repeatable; omit for a flat spectrum")
    p.add_argument("--b-mt", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--field-along", help="align the field with this species' axis")
    g.add_argument("--field-dir", type=float, nargs=3, default=[0.0, 0.0, 1.0], metavar=("X", "Y", "Z"))
    p.add_argument("--base-contrast", type=float, default=0.1)
    p.add_argument("--fwhm-mhz", type=float, default=10.0)
    p.add_argument("--f-start", type=float, default=1500.0)
    p.add_argument("--f-end", type=float, default=6000.0)
    p.add_argument("--f-steps", type=int, default=4501)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize_odmr)

    p = sub.add_parser("simulate-t1", help="synthetic relaxometry dataset")
    p.add_argument("--b-khz", type=float, default=78.0)
    p.add_argument("--gamma-mhz", type=float, default=160.0)
    p.add_argument("--baseline-per-ms", type=float, default=0.24)
    p.add_argument("--f-center-mhz", type=float, default=3315.6)
    p.add_argument("--f-start", type=float, default=2915.6)
    p.add_argument("--f-end", type=float, default=3715.6)
    p.add_argument("--n-points", type=int, default=50)
    p.add_argument("--noise-rel", type=float, default=0.0)
    p.add_argument("--readout-factor", type=float, default=relaxometry.DIFFERENTIAL_READOUT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate_t1)

    p = sub.add_parser("fit-t1", help="fit the cross-relaxation Lorentzian")
    p.add_argument("--input", required=True)
    p.add_argument("--readout-factor", type=float, default=relaxometry.DIFFERENTIAL_READOUT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_t1)

    p = sub.add_parser("estimate-density", help="areal spin density from a coupling")
    p.add_argument("--b-khz", type=float, required=True)
    p.add_argument("--b-sigma-khz", type=float, default=0.0)
    p.add_argument("--profile", required=True)
    p.add_argument("--standoff-nm", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate_density)

    p = sub.add_parser("simulate-deer", help="Monte Carlo DEER / Hahn-echo signals")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--profile", help="depth profile CSV")
    src.add_argument("--rho-nm2", type=float, default=0.01)
    p.add_argument("--layer-depth-nm", type=float, default=0.34)
    p.add_argument("--standoff-nm", type=float, default=10.0)
    p.add_argument("--p", type=float, default=0.0, help="bath polarization")
    p.add_argument("--eta", type=float, default=1.0, help="bath drive efficiency")
    p.add_argument("--cutoff-nm", type=float, default=None)
    p.add_argument("--tilt-deg", type=float, default=0.0)
    p.add_argument("--t2-us", type=float, default=2.6)
    p.add_argument("--stretch", type=float, default=1.0)
    p.add_argument("--t-max-us", type=float, default=10.0)
    p.add_argument("--t-steps", type=int, default=101)
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sequence", choices=["deer", "hahn", "DEER", "HAHN"], default="deer")
    p.add_argument("--sweep", choices=[a.value for a in deer.SweepAxis])
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="CSV file, or directory when sweeping")
    p.set_defaults(func=cmd_simulate_deer)
    return parser


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Install config-file values as subcommand defaults."""
    try:
        data = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - set(args._subparsers)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    section = data.get(args.command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section {args.command!r} must be an object")
    sub = args._subparsers[args.command]
    known = {a.dest for a in sub._actions}
    values = {k.replace("-", "_"): v for k, v in section.items()}
    bad = set(values) - known - {"help"}
    if bad or "out" in values:
        raise ConfigError(f"unknown or disallowed keys for {args.command}: {sorted(bad | ({'out'} & set(values)))}")
    sub.set_defaults(**values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            _apply_config(parser, args)
            args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitDiverged, AmbiguousLabeling, NoDecay) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, NonMonotoneDepth, NegativeDensity, DegenerateData, NonFiniteInput, ZeroShape, GridMismatch) as exc:
        print(f"input data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
