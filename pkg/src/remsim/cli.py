"""Command-line runner: config ingestion, dispatch, run persistence, plots.

Every invocation writes its artifacts plus a manifest (inputs, digests,
seed, tool version, outputs) into a fresh run directory.  All randomness
flows from the single --seed flag, so rerunning with identical inputs
reproduces the numeric outputs byte for byte; manifest timestamps are the
only varying field.

Exit codes: 0 ok, 2 config error, 3 validation failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .afc import CombSpec, fit_finesse, gaussian_efficiency, render_comb, square_efficiency
from .echo import (
    PolarizationChannel,
    Pulse,
    propagate,
    smafc_run,
)
from .ions import (
    AbsorptionSpectrum,
    absorption,
    default_material,
    ensemble_from_config,
    load_material,
    uniform_material,
    validate_structure,
)
from .pumping import (
    TARGET_BAND,
    PumpPrimitive,
    PumpSequence,
    band_flatness,
    class_contributions,
    enhanced_profile_sequence,
    prepare_enhanced_profile,
    run_sequence,
)
from .stark import ElectricPulse, StarkConfig, fit_stark_coefficient, split_spectrum, voltage_for_phase
from .tomography import (
    classical_bound,
    mle_reconstruct,
    monte_carlo_error,
    process_fidelity,
    sigma_margin,
    simulate_counts,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    pass


class ValidationError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Artifact sink for one invocation; never overwrites an existing dir."""

    def __init__(self, out_dir, argv, seed):
        self.dir = Path(out_dir)
        if self.dir.exists() and any(self.dir.iterdir()):
            raise ConfigError(f"output directory {self.dir} exists and is not empty")
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "command": argv,
            "seed": seed,
            "version": __version__,
            "inputs": {},
            "parameters": {},
            "outputs": [],
            "timestamps": {"start": time.time()},
            "threads": os.environ.get("REMSIM_THREADS", ""),
        }

    def note_input(self, name, path):
        self.manifest["inputs"][name] = {"path": str(path), "sha256": _sha256(Path(path))}

    def note_params(self, **params):
        self.manifest["parameters"].update(params)

    def write_json(self, name, obj):
        path = self.dir / name
        path.write_text(json.dumps(obj, indent=2, sort_keys=True,
                                   default=_json_default) + "\n")
        self.manifest["outputs"].append(name)
        return path

    def write_csv(self, name, header, rows):
        path = self.dir / name
        lines = [header]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        path.write_text("\n".join(lines) + "\n")
        self.manifest["outputs"].append(name)
        return path

    def add_artifact(self, name):
        self.manifest["outputs"].append(name)

    def close(self):
        self.manifest["timestamps"]["end"] = time.time()
        (self.dir / "manifest.json").write_text(
            json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def _json_default(o):
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _load_config(path_or_name):
    if path_or_name in (None, "default"):
        return default_material(), "builtin:default"
    if path_or_name == "uniform":
        return uniform_material(), "builtin:uniform"
    p = Path(path_or_name)
    if p.is_dir():
        p = p / "material.json"
    if not p.exists():
        raise ConfigError(f"material config not found: {p}")
    try:
        return load_material(p), p
    except json.JSONDecodeError as err:
        raise ConfigError(f"unreadable material config {p}: {err}") from None


def _spectrum_plot(spectrum, path):
    _plot_xy(spectrum.detunings, spectrum.depth, "detuning (MHz)", "optical depth", path)


def _plot_xy(x, y, xlabel, ylabel, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "remsim"
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(x, y, lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _chi_plot(chi_json, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "remsim"
    re = np.asarray(chi_json["re"])
    im = np.asarray(chi_json["im"])
    labels = ["I", "X", "Y", "Z"]
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    for ax, mat, title in ((axes[0], re, "Re(chi)"), (axes[1], im, "Im(chi)")):
        xs = np.arange(16)
        ax.bar(xs, mat.ravel(), width=0.8)
        ax.set_xticks(xs[::4])
        ax.set_xticklabels([f"{labels[i//4]}" for i in xs[::4]])
        ax.set_title(title)
        ax.set_ylim(-0.1, 1.0)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# --- subcommands -------------------------------------------------------------

def cmd_prepare(args, run: Run):
    cfg, src = _load_config(args.config)
    if isinstance(src, Path):
        run.note_input("material", src)
    run.note_params(config=str(src), polarizations=["H", "V"], repeat=args.repeat)
    ens = ensemble_from_config(cfg)
    report = validate_structure(ens.structure)
    run.write_json("validation.json", {k: [v[0], v[1]] for k, v in report.items()})
    if not report["all_passed"][0]:
        raise ValidationError("material structure fails hole-burning consistency checks")

    if args.sequence:
        seq_data = json.loads(Path(args.sequence).read_text())
        run.note_input("sequence", args.sequence)
        seq = PumpSequence.from_json(seq_data, repeat=args.repeat)
        prepped = run_sequence(ens, seq)
    else:
        prepped = prepare_enhanced_profile(ens, repeat=args.repeat)

    for pol in ("H", "V"):
        sp = absorption(prepped, pol)
        run.write_csv(f"spectrum_{pol.lower()}.csv", "detuning_mhz,depth",
                      zip(sp.detunings, sp.depth))
        if args.plot:
            _spectrum_plot(sp, run.dir / f"spectrum_{pol.lower()}.svg")
            run.add_artifact(f"spectrum_{pol.lower()}.svg")
    sp_h = absorption(prepped, "H")
    flat = band_flatness(sp_h, TARGET_BAND)
    cc = class_contributions(prepped, TARGET_BAND, "H")
    run.write_json("classes.json", {
        "band_mhz": list(TARGET_BAND),
        "flatness": flat,
        "enhancement_vs_natural": flat["mean"] / cfg["natural_depth_h"],
        "class_mean_depth": {str(c + 1): float(v) for c, v in enumerate(cc["class_means"])},
    })
    return prepped


def cmd_stark(args, run: Run):
    config = StarkConfig()
    if args.stark_cmd == "fit":
        data = np.loadtxt(args.data, delimiter=",", skiprows=1)
        run.note_input("data", args.data)
        pts = data[:, :2]
        groups = data[:, 2] if data.shape[1] > 2 else None
        fits = fit_stark_coefficient(pts, groups)
        avg = float(np.mean([abs(s) for s, _ in fits]))
        out = {
            "groups": [{"slope_khz_per_v_cm": s, "stderr": e} for s, e in fits],
            "average_abs_slope": avg,
        }
        run.write_json("stark_fit.json", out)
        print(json.dumps(out, indent=2, sort_keys=True))
    else:  # split
        sp = AbsorptionSpectrum.from_csv(args.spectrum)
        run.note_input("spectrum", args.spectrum)
        field = args.voltage / (config.electrode_gap_um * 1e-4) * config.geometry_factor
        run.note_params(voltage_v=args.voltage, field_v_cm=field)
        out_sp = split_spectrum(sp, config, field)
        run.write_csv("split_spectrum.csv", "detuning_mhz,depth",
                      zip(out_sp.detunings, out_sp.depth))
        if args.plot:
            _spectrum_plot(out_sp, run.dir / "split_spectrum.svg")
            run.add_artifact("split_spectrum.svg")


def cmd_afc(args, run: Run):
    if args.afc_cmd == "efficiency":
        fn = gaussian_efficiency if args.model == "gaussian" else square_efficiency
        eta = (fn(args.d, args.finesse, args.order) if args.model == "gaussian"
               else fn(args.d, args.finesse, args.order, args.background))
        run.note_params(model=args.model, d=args.d, finesse=args.finesse,
                        order=args.order, background=args.background)
        run.write_json("efficiency.json", {"efficiency": eta})
        print(f"{eta:.4f}")
    else:  # fit
        data = np.loadtxt(args.data, delimiter=",", skiprows=1)
        run.note_input("data", args.data)
        (F, dF), (c, dc) = fit_finesse(data, d=args.d)
        out = {"finesse": F, "finesse_stderr": dF, "coupling": c, "coupling_stderr": dc}
        run.write_json("finesse_fit.json", out)
        print(json.dumps(out, indent=2, sort_keys=True))


def cmd_echo(args, run: Run):
    sp = AbsorptionSpectrum.from_csv(args.spectrum)
    run.note_input("spectrum", args.spectrum)
    pulse = Pulse()
    config = StarkConfig()
    if args.gates:
        gates_cfg = json.loads(Path(args.gates).read_text())
        run.note_input("gates", args.gates)
        gates = [ElectricPulse(g["start_ns"], g["duration_ns"], g["voltage_v"])
                 for g in gates_cfg]
        trace = smafc_run(pulse, sp, config, gates, target_order=args.order)
    else:
        trace = propagate(pulse, sp, max_order=args.order)
    run.write_csv("trace.csv", "time_ns,intensity", zip(trace.times, trace.intensity))
    run.write_json("efficiencies.json",
                   {str(m): eff for m, _w, eff in trace.markers})
    if args.plot:
        _plot_xy(trace.times, trace.intensity, "time (ns)", "intensity",
                 run.dir / "trace.svg")
        run.add_artifact("trace.svg")


def cmd_qpt(args, run: Run):
    channel = PolarizationChannel(args.eta, args.eta_v if args.eta_v is not None else args.eta)
    run.note_params(mu=args.mu, eta_h=channel.eta_h, eta_v=channel.eta_v,
                    trials=args.trials, resamples=args.resamples,
                    noise_rate=args.noise_rate)
    if args.qpt_cmd == "bound":
        b = classical_bound(args.mu, args.eta)
        run.write_json("bound.json", {"classical_bound": b})
        print(f"{b:.4f}")
        return
    counts = simulate_counts(channel, args.mu, args.trials,
                             noise_rate=args.noise_rate, seed=args.seed)
    run.write_json("counts.json", counts.to_json())
    if args.qpt_cmd == "simulate":
        return
    chi = mle_reconstruct(counts)
    fid = process_fidelity(chi)
    sigma = monte_carlo_error(counts, resamples=args.resamples, seed=args.seed + 1)
    bound = classical_bound(args.mu, args.eta)
    margin = sigma_margin(fid, sigma, bound)
    run.write_json("chi.json", chi.to_json())
    run.write_csv("chi.csv", "row,re_I,re_X,re_Y,re_Z,im_I,im_X,im_Y,im_Z",
                  [[i] + list(chi.chi.real[i]) + list(chi.chi.imag[i]) for i in range(4)])
    summary = {"fidelity": fid, "sigma": sigma, "classical_bound": bound,
               "sigma_margin": margin}
    run.write_json("qpt_summary.json", summary)
    if args.plot:
        _chi_plot(chi.to_json(), run.dir / "chi.svg")
        run.add_artifact("chi.svg")
    print(json.dumps(summary, indent=2, sort_keys=True))


def cmd_pipeline(args, run: Run):
    """prepare -> comb -> smafc -> qpt, reproducing the full storage workflow."""
    prepped = cmd_prepare(args, run)
    cfg, _src = _load_config(args.config)

    # carve the AFC into the enhanced band: 10 MHz, 2 MHz teeth
    comb_pump = PumpPrimitive("comb_pattern", center=0.0, bandwidth=10.0,
                              spacing=2.0, duty=1.0 / 3.0)
    carved = run_sequence(prepped, PumpSequence([comb_pump]))

    config = StarkConfig()
    pulse = Pulse()
    v_gate = voltage_for_phase(config, np.pi / 2.0, 85.0)
    gates = [ElectricPulse(2200.0, 85.0, v_gate), ElectricPulse(2700.0, 85.0, -v_gate)]
    run.note_params(gate_voltage_v=v_gate, gate_duration_ns=85.0,
                    comb={"spacing": 2.0, "bandwidth": 10.0, "duty": 1.0 / 3.0})

    etas = {}
    for pol in ("H", "V"):
        sp = absorption(carved, pol)
        run.write_csv(f"comb_spectrum_{pol.lower()}.csv", "detuning_mhz,depth",
                      zip(sp.detunings, sp.depth))
        trace = smafc_run(pulse, sp, config, gates, target_order=2, spacing=2.0)
        run.write_csv(f"trace_{pol.lower()}.csv", "time_ns,intensity",
                      zip(trace.times, trace.intensity))
        etas[pol] = trace.efficiency(2)
        if args.plot:
            _spectrum_plot(sp, run.dir / f"comb_spectrum_{pol.lower()}.svg")
            run.add_artifact(f"comb_spectrum_{pol.lower()}.svg")
            _plot_xy(trace.times, trace.intensity, "time (ns)", "intensity",
                     run.dir / f"trace_{pol.lower()}.svg")
            run.add_artifact(f"trace_{pol.lower()}.svg")
    run.write_json("smafc_efficiencies.json", etas)

    channel = PolarizationChannel(etas["H"], etas["V"])
    counts = simulate_counts(channel, args.mu, args.trials,
                             noise_rate=args.noise_rate, seed=args.seed)
    run.write_json("counts.json", counts.to_json())
    chi = mle_reconstruct(counts)
    fid = process_fidelity(chi)
    sigma = monte_carlo_error(counts, resamples=args.resamples, seed=args.seed + 1)
    bound = classical_bound(args.mu, min(etas["H"], etas["V"]))
    run.write_json("chi.json", chi.to_json())
    summary = {"fidelity": fid, "sigma": sigma, "classical_bound": bound,
               "sigma_margin": sigma_margin(fid, sigma, bound),
               "eta_h": etas["H"], "eta_v": etas["V"]}
    run.write_json("qpt_summary.json", summary)
    if args.plot:
        _chi_plot(chi.to_json(), run.dir / "chi.svg")
        run.add_artifact("chi.svg")
    print(json.dumps(summary, indent=2, sort_keys=True))


def cmd_material(args, run: Run):
    cfg = uniform_material() if args.kind == "uniform" else default_material()
    run.write_json("material.json", cfg)
    print(str(run.dir / "material.json"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="remsim",
                                 description="Stark-modulated AFC memory simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="run directory (default: runs/<cmd>)")
    common.add_argument("--plot", action="store_true", help="emit SVG plots")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("prepare", parents=[common],
                       help="run a pump sequence, export spectra")
    p.add_argument("--config", default="default")
    p.add_argument("--sequence", default=None, help="JSON list of pump primitives")
    p.add_argument("--repeat", type=int, default=40)

    p = sub.add_parser("stark")
    ps = p.add_subparsers(dest="stark_cmd", required=True)
    pf = ps.add_parser("fit", parents=[common])
    pf.add_argument("--data", required=True)
    pp = ps.add_parser("split", parents=[common])
    pp.add_argument("--spectrum", required=True)
    pp.add_argument("--voltage", type=float, required=True)

    p = sub.add_parser("afc")
    pa = p.add_subparsers(dest="afc_cmd", required=True)
    pe = pa.add_parser("efficiency", parents=[common])
    pe.add_argument("--model", choices=("gaussian", "square"), required=True)
    pe.add_argument("--d", type=float, required=True)
    pe.add_argument("--finesse", type=float, required=True)
    pe.add_argument("--order", type=int, default=1)
    pe.add_argument("--background", type=float, default=0.0)
    pf = pa.add_parser("fit", parents=[common])
    pf.add_argument("--data", required=True)
    pf.add_argument("--d", type=float, required=True)

    p = sub.add_parser("echo", parents=[common])
    p.add_argument("--spectrum", required=True)
    p.add_argument("--gates", default=None)
    p.add_argument("--order", type=int, default=2)

    p = sub.add_parser("qpt")
    pq = p.add_subparsers(dest="qpt_cmd", required=True)
    for name in ("simulate", "reconstruct", "bound"):
        pq2 = pq.add_parser(name, parents=[common])
        pq2.add_argument("--mu", type=float, default=0.32)
        pq2.add_argument("--eta", type=float, default=0.070)
        pq2.add_argument("--eta-v", type=float, default=None)
        pq2.add_argument("--trials", type=int, default=100_000)
        pq2.add_argument("--resamples", type=int, default=200)
        pq2.add_argument("--noise-rate", type=float, default=0.0)

    p = sub.add_parser("pipeline", parents=[common], help="prepare -> comb -> smafc -> qpt")
    p.add_argument("--config", default="default")
    p.add_argument("--sequence", default=None)
    p.add_argument("--repeat", type=int, default=40)
    p.add_argument("--mu", type=float, default=0.32)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--noise-rate", type=float, default=0.0)

    p = sub.add_parser("material", parents=[common], help="write a builtin material config")
    p.add_argument("--kind", choices=("default", "uniform"), default="default")
    return ap


_DISPATCH = {
    "prepare": cmd_prepare,
    "stark": cmd_stark,
    "afc": cmd_afc,
    "echo": cmd_echo,
    "qpt": cmd_qpt,
    "pipeline": cmd_pipeline,
    "material": cmd_material,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code not in (0, None) else 0

    out_dir = args.out or str(Path("runs") / args.cmd)
    try:
        run = Run(out_dir, ["remsim"] + argv, args.seed)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    # qpt subcommands carry their own seed default through the shared flag
    if not hasattr(args, "seed"):
        args.seed = 0
    try:
        _DISPATCH[args.cmd](args, run)
        run.close()
        return EXIT_OK
    except ConfigError as err:
        _discard_partial(run)
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, ValueError) as err:
        _discard_partial(run)
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as err:
        _discard_partial(run)
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


def _discard_partial(run: Run):
    # failed runs leave no partial artifacts behind
    for child in run.dir.iterdir():
        child.unlink()
    run.dir.rmdir()


if __name__ == "__main__":
    sys.exit(main())
