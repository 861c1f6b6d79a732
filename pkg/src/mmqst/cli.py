"""Command-line surface: config ingestion, run orchestration, artifacts.

Subcommands:
    synth      solve the sender equation and synthesize the receiver pulse
    validate   integrate the full dynamics against pulses from a synth run
    sweep      one synth+validate row per coupling in the sweep grid
    poles      characteristic-function root tables
    noise      leakage | loss | thermal robustness studies

Configs are TOML; numbers are in free-spectral-range units as in the run
descriptions (couplings and rates as fractions of fsr, times in units of
2*pi/fsr). Exit codes: 0 ok, 1 configuration, 2 synthesis refused,
3 numerical failure. Outputs are deterministic: identical configs produce
byte-identical artifacts.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:     # Python < 3.11
    import tomli

from . import __version__
from .channel import CaseLabel, Scenario, build_case
from .diagnostics import (build_transfer_report, discrepancy_metrics,
                          final_inefficiency, inefficiency_minimum)
from .errors import (ConfigurationError, IntegratorFailureError,
                     InconsistentScenarioError, NumericalFailureError,
                     SynthesisRefusedError, ToolkitError, UnresolvedRegionError)
from .grids import SampledSignal, TimeGrid
from .poles import SearchBox, default_search_box, find_poles, single_qubit_poles
from .synthesis import (DEFAULT_ALPHA_CUTOFF, DEFAULT_CLAMP_EPS,
                        DEFAULT_G_MAX_OVER_FSR, DEFAULT_REFINE, LaunchModel,
                        PulsePair, run_synthesis)
from .validator import (NoiseParams, evolve_leakage,
                        evolve_linear_heisenberg, evolve_single_excitation,
                        evolve_with_loss)

OUT_ROOT_ENV = "MMQST_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_REFUSED = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (NumericalFailureError, IntegratorFailureError,
                     InconsistentScenarioError, UnresolvedRegionError)


# ---------------------------------------------------------------------------
# config handling

def load_config(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid config {p}: {exc}") from exc


def apply_overrides(cfg: dict, overrides) -> dict:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override must be KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = tomli.loads(f"v = {raw}")["v"]
        except tomli.TOMLDecodeError:
            value = raw
        node = cfg
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override path {key!r} crosses a scalar")
        node[parts[-1]] = value
    return cfg


def build_scenario(cfg: dict) -> Scenario:
    sc = cfg.get("scenario", {})
    grid = cfg.get("grid", {})
    pulse = cfg.get("pulse", {})
    try:
        case = CaseLabel(sc.get("case", "midpoint"))
    except ValueError as exc:
        raise ConfigurationError(f"unknown case {sc.get('case')!r}") from exc
    return build_case(
        case,
        modes_per_side=int(sc.get("modes_per_side", 3)),
        fsr_scale=float(sc.get("fsr_scale", 1.0)),
        g_over_fsr=float(pulse.get("g_over_fsr", 0.3)),
        pulse_kind=pulse.get("kind", "offset_sine"),
        dt=float(grid["dt"]) if "dt" in grid else None,
        t_f_max=float(grid.get("t_f_max", 40.0)),
    )


def scenario_to_config(scenario: Scenario) -> dict:
    return {
        "scenario": {
            "case": scenario.case_label.value,
            "modes_per_side": scenario.channel.n_modes // 2,
            "fsr_scale": scenario.channel.fsr / (2.0 * math.pi),
        },
        "grid": {"dt": scenario.grid.dt, "t_f_max": scenario.grid.t_end},
        "pulse": {"kind": scenario.ga_params.kind,
                  "g_over_fsr": scenario.ga_params.g_over_fsr},
    }


def noise_params(cfg: dict) -> NoiseParams:
    n = cfg.get("noise", {})
    return NoiseParams(
        kappa_over_fsr=float(n.get("kappa_over_fsr", 0.0)),
        gamma_over_fsr=float(n.get("gamma_over_fsr", 0.0)),
        leakage_er=float(n.get("leakage_er", 0.0)),
        anharmonicity_over_fsr=float(n.get("anharmonicity_over_fsr", 2.5)),
        thermal=bool(n.get("thermal", False)),
    )


def synth_options(cfg: dict) -> dict:
    s = cfg.get("synthesis", {})
    opts = {
        "refine": int(s.get("refine", DEFAULT_REFINE)),
        "clamp_eps": float(s.get("clamp_eps", DEFAULT_CLAMP_EPS)),
        "g_max_over_fsr": float(s.get("g_max_over_fsr", DEFAULT_G_MAX_OVER_FSR)),
        "alpha_cutoff": float(s.get("alpha_cutoff", DEFAULT_ALPHA_CUTOFF)),
    }
    if not 1 <= opts["refine"] <= 64:
        raise ConfigurationError("synthesis.refine must be in 1..64")
    if not 0 < opts["clamp_eps"] < 1e-2:
        raise ConfigurationError("synthesis.clamp_eps out of its sanity range")
    if not 0 < opts["alpha_cutoff"] < 1e-2:
        raise ConfigurationError("synthesis.alpha_cutoff out of its sanity range")
    if not 1.0 <= opts["g_max_over_fsr"] <= 1e4:
        raise ConfigurationError("synthesis.g_max_over_fsr out of its sanity range")
    return opts


# ---------------------------------------------------------------------------
# artifact writers: deterministic text formats

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, schema: str, header, rows):
    lines = [f"# schema: mmqst.{schema} v1 (package {__version__})"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def read_csv(path: Path):
    if not path.is_file():
        raise ConfigurationError(f"missing artifact: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]])
    return header, data


# ---------------------------------------------------------------------------
# shared run helpers

def _resolve_out(args, command: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
        stem = Path(args.config).stem
        out = root / f"{stem}-{command}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(args) -> dict:
    return apply_overrides(load_config(args.config), args.override)


def _write_pulses(out: Path, run) -> None:
    t = run.pair.gA.grid.times()
    ga = run.pair.gA.values
    gb = run.pair.gB_tilde.values
    write_csv(out / "pulses.csv", "pulses",
              ["t", "re_ga", "im_ga", "re_gb_tilde", "im_gb_tilde"],
              zip(t, ga.real, ga.imag, gb.real, gb.imag))
    x, y = run.trace.x.values, run.trace.y.values
    write_csv(out / "trace.csv", "trace",
              ["t", "re_x", "im_x", "re_y", "im_y", "beta_mag2", "beta_phase",
               "re_alpha", "im_alpha"],
              zip(t, x.real, x.imag, y.real, y.imag, run.trace.beta_mag2,
                  run.trace.beta_phase, run.alpha.values.real,
                  run.alpha.values.imag))
    launch = run.pair.launch
    if launch is not None:
        tau = launch.dt * np.arange(len(launch.x))
        write_csv(out / "launch.csv", "launch",
                  ["tau", "re_x", "im_x", "dmag2", "mag2", "phase"],
                  zip(tau, launch.x.real, launch.x.imag, launch.dmag2,
                      launch.mag2, launch.phase))


def _load_pulse_pair(out: Path) -> PulsePair:
    header, data = read_csv(out / "pulses.csv")
    if header[:1] != ["t"] or data.shape[1] != 5:
        raise ConfigurationError(f"unexpected pulses.csv layout in {out}")
    meta_path = out / "synth_report.json"
    if not meta_path.is_file():
        raise ConfigurationError(f"missing artifact: {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    t = data[:, 0]
    grid = TimeGrid(float(t[0]), float(meta["dt"]), len(t) - 1)
    ga = SampledSignal(grid, data[:, 1] + 1j * data[:, 2])
    gb = SampledSignal(grid, data[:, 3] + 1j * data[:, 4])
    launch = None
    launch_path = out / "launch.csv"
    if launch_path.is_file():
        _, ld = read_csv(launch_path)
        launch = LaunchModel(dt=float(ld[1, 0] - ld[0, 0]),
                             x=ld[:, 1] + 1j * ld[:, 2], dmag2=ld[:, 3],
                             mag2=ld[:, 4], phase=ld[:, 5])
    return PulsePair(gA=ga, gB_tilde=gb, t_f=float(meta["t_f"]),
                     clamp_eps=float(meta["clamp_eps"]),
                     g_max=float(meta["g_max"]),
                     capped_steps=int(meta["capped_steps"]), launch=launch)


def _synth_payload(run, scenario: Scenario) -> dict:
    beta = run.trace.beta()
    mask = np.abs(beta) > run.pair.clamp_eps
    residual = np.abs(run.dark_state_residual()[mask])
    drive_scale = float(np.max(np.abs(np.conj(run.pair.gA.values)
                                      * run.alpha.values)))
    n_f = run.pair.gA.grid.index_of(run.pair.t_f)
    return {
        "t_f": run.pair.t_f,
        "clamp_eps": run.pair.clamp_eps,
        "g_max": run.pair.g_max,
        "capped_steps": run.pair.capped_steps,
        "capped_span": run.pair.capped_span,
        "refine": run.refine,
        "alpha_tf_sq": float(np.abs(run.alpha.values[n_f]) ** 2),
        "beta_tf_sq": float(run.trace.beta_mag2[n_f]),
        "dark_state_residual_max": float(residual.max()),
        "dark_state_residual_rel": float(residual.max() / max(drive_scale, 1e-300)),
        "case": scenario.case_label.value,
        "g_over_fsr": scenario.ga_params.g_over_fsr,
        "dt": scenario.grid.dt,
    }


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    scenario = build_scenario(cfg)
    opts = synth_options(cfg)
    out = _resolve_out(args, "synth")
    run = run_synthesis(scenario, **opts)
    _write_pulses(out, run)
    write_json(out / "synth_report.json", _synth_payload(run, scenario))
    print(f"synth: t_f = {run.pair.t_f:.6g}, artifacts in {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_cfg(args)
    scenario = build_scenario(cfg)
    opts = synth_options(cfg)
    noise = noise_params(cfg)
    kappa, gamma = noise.kappa_over_fsr, noise.gamma_over_fsr
    out = _resolve_out(args, "validate")
    pulses_dir = Path(args.pulses) if args.pulses else out
    pair = _load_pulse_pair(pulses_dir)

    if kappa or gamma:
        traj = evolve_with_loss(scenario, pair, kappa, gamma)
    else:
        traj = evolve_single_excitation(scenario, pair)
    t0 = scenario.channel.t0
    report = build_transfer_report(traj, t0=t0, fsr=scenario.channel.fsr,
                                   kappa_over_fsr=kappa, gamma_over_fsr=gamma)
    payload = {k: getattr(report, k) for k in (
        "t_f", "T", "E_integrated", "E_over_t0", "E_buffer_form", "buffer",
        "E_consistency_rel", "peak_channel_population", "final_infidelity",
        "loss_estimate")}
    payload["norm_final"] = float(traj.norm[-1])
    payload["kappa_over_fsr"] = kappa
    payload["gamma_over_fsr"] = gamma
    if kappa or gamma:
        ineff, t_stop = inefficiency_minimum(traj)
        payload["inefficiency_min"] = ineff
        payload["t_stop"] = t_stop
        payload["inefficiency_final"] = final_inefficiency(traj)
    else:
        # compare against the synthesis chain when its trace is available
        try:
            chain = run_synthesis(scenario, **opts)
            payload.update(discrepancy_metrics(chain, traj))
        except ToolkitError:
            pass
    t = traj.grid.times()
    header = ["t", "re_alpha", "im_alpha", "re_beta", "im_beta", "norm",
              "channel_population"]
    mode_cols = []
    for k in range(scenario.channel.n_modes):
        mode_cols += [f"re_c{k}", f"im_c{k}"]
    rows = np.column_stack([t, traj.alpha.real, traj.alpha.imag,
                            traj.beta.real, traj.beta.imag, traj.norm,
                            traj.channel_population()]
                           + [col for k in range(scenario.channel.n_modes)
                              for col in (traj.c_modes[k].real,
                                          traj.c_modes[k].imag)])
    write_csv(out / "trajectory.csv", "trajectory", header + mode_cols, rows)
    write_json(out / "report.json", payload)
    print(f"validate: final infidelity = {report.final_infidelity:.3e}, "
          f"artifacts in {out}")
    return EXIT_OK


def _sweep_point(payload):
    cfg, g = payload
    cfg = json.loads(json.dumps(cfg))   # private copy per worker
    cfg.setdefault("pulse", {})["g_over_fsr"] = g
    scenario = build_scenario(cfg)
    opts = synth_options(cfg)
    noise = noise_params(cfg)
    row = {"g_over_fsr": g, "status": "ok"}
    try:
        run = run_synthesis(scenario, **opts)
        traj = evolve_single_excitation(scenario, run.pair)
        report = build_transfer_report(traj, t0=scenario.channel.t0,
                                       fsr=scenario.channel.fsr,
                                       kappa_over_fsr=noise.kappa_over_fsr,
                                       gamma_over_fsr=noise.gamma_over_fsr)
        row.update(discrepancy_metrics(run, traj))
        row.update(
            t_f=report.t_f, T=report.T, E_integrated=report.E_integrated,
            E_over_t0=report.E_over_t0, buffer=report.buffer,
            E_consistency_rel=report.E_consistency_rel,
            peak_channel_population=report.peak_channel_population,
            final_infidelity=report.final_infidelity,
            loss_estimate=report.loss_estimate,
            capped_steps=run.pair.capped_steps,
        )
    except ToolkitError as exc:
        row["status"] = f"failed: {type(exc).__name__}"
    return row


_SWEEP_COLUMNS = ["g_over_fsr", "t_f", "T", "E_integrated", "E_over_t0",
                  "buffer", "E_consistency_rel", "peak_channel_population",
                  "final_infidelity", "loss_estimate", "discrepancy_alpha",
                  "discrepancy_beta", "capped_steps", "status"]


def cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    grid = cfg.get("sweep", {}).get("g_over_fsr")
    if not grid:
        raise ConfigurationError("sweep.g_over_fsr must be a non-empty list")
    out = _resolve_out(args, "sweep")
    payloads = [(cfg, float(g)) for g in grid]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]
    table = [[row.get(col, "") if col == "status" else row.get(col, float("nan"))
              for col in _SWEEP_COLUMNS] for row in rows]
    write_csv(out / "sweep.csv", "sweep", _SWEEP_COLUMNS, table)
    n_ok = sum(1 for row in rows if row["status"] == "ok")
    print(f"sweep: {n_ok}/{len(rows)} points succeeded, table in {out}")
    return EXIT_OK if n_ok else EXIT_NUMERICAL


def cmd_poles(args) -> int:
    cfg = _load_cfg(args)
    scenario = build_scenario(cfg)
    spec = scenario.channel
    pcfg = cfg.get("poles", {})
    grid = pcfg.get("g_over_fsr") or cfg.get("sweep", {}).get("g_over_fsr") \
        or [scenario.ga_params.g_over_fsr]
    box = default_search_box(spec)
    box = SearchBox(float(pcfg.get("re_min", box.re_min)),
                    float(pcfg.get("re_max", box.re_max)),
                    float(pcfg.get("im_min", box.im_min)),
                    float(pcfg.get("im_max", box.im_max)))
    out = _resolve_out(args, "poles")
    rows = []
    for g in grid:
        poles = find_poles(spec, float(g), box)
        if len(poles.poles) == 0:
            print(f"warning: no poles of the windowed characteristic function "
                  f"inside the box for g/fsr = {g}")
        for z, r in zip(poles.poles, poles.residuals):
            rows.append([float(g), z.real, z.imag, r])
    write_csv(out / "poles.csv", "poles",
              ["g_over_fsr", "re_s", "im_s", "residual"], rows)
    if pcfg.get("single_qubit", False):
        sq_rows = []
        for g in grid:
            for z in single_qubit_poles(spec, float(g)):
                sq_rows.append([float(g), 0.0, z])
        write_csv(out / "single_qubit_poles.csv", "single_qubit_poles",
                  ["g_over_fsr", "re_s", "im_s"], sq_rows)
    print(f"poles: {len(rows)} roots tabulated in {out}")
    return EXIT_OK


def cmd_noise(args) -> int:
    cfg = _load_cfg(args)
    scenario = build_scenario(cfg)
    opts = synth_options(cfg)
    noise = cfg.get("noise", {})
    out = _resolve_out(args, f"noise-{args.study}")
    run = run_synthesis(scenario, **opts)

    if args.study == "leakage":
        ers = noise.get("leakage_er_grid",
                        [0.001, 0.002, 0.005, 0.01, 0.015, 0.02])
        anharm = float(noise.get("anharmonicity_over_fsr", 2.5))
        rows = []
        for er in ers:
            rep = evolve_leakage(scenario, run.pair, float(er), anharm)
            rows.append([er, rep.inefficiency, rep.baseline_inefficiency,
                         rep.pop_2B_over_er, rep.pop_2A_over_er,
                         rep.pop_1A1B_over_er, rep.doubly_excited_over_er,
                         rep.channel_residual_over_er])
        write_csv(out / "noise_leakage.csv", "noise_leakage",
                  ["er", "inefficiency", "baseline_inefficiency",
                   "pop_2B_over_er", "pop_2A_over_er", "pop_1A1B_over_er",
                   "doubly_excited_over_er", "channel_residual_over_er"], rows)
        ers_arr = np.array([r[0] for r in rows])
        ineff = np.array([r[1] for r in rows])
        slope, intercept = np.polyfit(ers_arr, ineff, 1)
        fitted = slope * ers_arr + intercept
        ss_res = float(np.sum((ineff - fitted) ** 2))
        ss_tot = float(np.sum((ineff - ineff.mean()) ** 2))
        write_json(out / "report.json", {
            "study": "leakage", "slope": float(slope),
            "intercept": float(intercept),
            "r_squared": 1.0 - ss_res / ss_tot if ss_tot else 1.0,
            "anharmonicity_over_fsr": anharm,
        })
    elif args.study == "loss":
        kappas = noise.get("kappa_over_fsr_grid", [0.0])
        gammas = noise.get("gamma_over_fsr_grid", [0.0])
        rows = []
        for kappa in kappas:
            for gamma in gammas:
                traj = evolve_with_loss(scenario, run.pair, float(kappa),
                                        float(gamma))
                report = build_transfer_report(
                    traj, t0=scenario.channel.t0, fsr=scenario.channel.fsr,
                    kappa_over_fsr=float(kappa), gamma_over_fsr=float(gamma))
                ineff_min, t_stop = inefficiency_minimum(traj)
                rows.append([kappa, gamma, final_inefficiency(traj),
                             ineff_min, t_stop, report.loss_estimate,
                             report.E_integrated, report.T])
        write_csv(out / "noise_loss.csv", "noise_loss",
                  ["kappa_over_fsr", "gamma_over_fsr", "inefficiency_final",
                   "inefficiency_min", "t_stop", "loss_estimate",
                   "E_integrated", "T"], rows)
    elif args.study == "thermal":
        hrun = evolve_linear_heisenberg(scenario, run.pair)
        traj = evolve_single_excitation(scenario, run.pair)
        b_a = np.abs(hrun.b_from_a()[-1])
        beta_f = float(np.abs(traj.beta_tilde()[-1]))
        row_norms = hrun.receiver_row_norms()
        write_json(out / "report.json", {
            "study": "thermal",
            "unitarity_defect": hrun.unitarity_defect(),
            "b_from_a_final": float(b_a),
            "beta_tilde_final": beta_f,
            "coefficient_match": abs(float(b_a) - beta_f),
            "row_norm_max_error": float(np.max(np.abs(row_norms - 1.0))),
        })
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigurationError(f"unknown noise study {args.study!r}")
    print(f"noise {args.study}: artifacts in {out}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmqst",
        description="Pulse synthesis and verification for quantum state "
                    "transfer through a multimode resonator.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", help="output directory (default: "
                       f"{OUT_ROOT_ENV} root / <config>-<command>)")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="dotted-path config override, repeatable")

    p = sub.add_parser("synth", help="synthesize the receiver pulse")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="integrate the full dynamics")
    common(p)
    p.add_argument("--pulses", help="directory holding pulses.csv from a synth "
                   "run (default: the output directory)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="coupling sweep")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("poles", help="characteristic-function roots")
    common(p)
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("noise", help="robustness studies")
    p.add_argument("study", choices=["leakage", "loss", "thermal"])
    common(p)
    p.set_defaults(func=cmd_noise)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SynthesisRefusedError as exc:
        print(f"synthesis refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
