"""Command-line front end.

Each scenario is a subcommand. Settings come from the scenario's defaults, then an
optional YAML config file (``--config``), then ``--key value`` flags. Results go to
standard output as a summary and, with ``--output PREFIX``, to ``PREFIX.csv`` and
``PREFIX.jsonl``.

Exit codes: 0 success, 2 configuration error, 3 invariant or truncation failure,
4 integrator non-convergence.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from . import analysis, gates
from .metrics import FidelityReport, TruncationError
from .operators import fock_state, thermal_state
from .propagator import ConvergenceError, IntegratorConfig, propagator_deviation

THREADS_ENV = "CAVITYGATE_THREADS"

_COMMON = {
    "preset": None,
    "g_over_2pi_khz": None,
    "photon_decay_time_s": None,
    "method": "adaptive",
    "step": None,
    "tol": 1e-6,
    "output": None,
}

SCENARIOS = {
    "gate": {
        "omega_ratio": 50.0,
        "nbar": 0.0,
        "fock_cutoff": 16,
        "model": "full",
        "kappa_over_g": 0.0,
        "nbar_bath": 0.0,
    },
    "ghz": {
        "n_atoms": 3,
        "omega_ratio": 50.0,
        # auto picks 2n pi for even N and (4n + 3/2) pi for odd N
        "omega_t_family": "auto",
        "family_index": None,
        "nbar": 0.0,
        "fock_cutoff": 14,
        "model": "effective",
        "kappa_over_g": 0.0,
        "nbar_bath": 0.0,
    },
    "thermal-sweep": {
        "omega_ratio": 50.0,
        "nbar_list": [0.0, 0.5, 1.0, 2.0],
        "fock_cutoff": 20,
        "model": "effective",
    },
    "error-budget": {
        "paper_params": False,
        "omega_ratio": 5.0,
        "epsilon": 0.01,
        "fock_cutoff": 12,
        "simulate": True,
    },
    "validate-propagator": {
        "n_samples": 10,
        "seed": 0,
        "n_atoms": 2,
        "fock_cutoff": 12,
        "delta_min": 0.5,
        "delta_max": 2.0,
    },
}

PRESETS = {"reference": dict(analysis.REFERENCE_PRESET)}

_TYPES = {
    "omega_ratio": float, "nbar": float, "fock_cutoff": int, "model": str, "kappa_over_g": float,
    "nbar_bath": float, "n_atoms": int, "omega_t_family": str, "family_index": int,
    "nbar_list": list, "paper_params": bool, "epsilon": float, "simulate": bool, "n_samples": int,
    "seed": int, "delta_min": float, "delta_max": float, "preset": str, "g_over_2pi_khz": float,
    "photon_decay_time_s": float, "method": str, "step": float, "tol": float, "output": str,
}


class ConfigError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    pass


def template(scenario: str) -> dict:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; valid: {', '.join(SCENARIOS)}")
    return {"scenario": scenario, **copy.deepcopy(SCENARIOS[scenario]), **copy.deepcopy(_COMMON)}


def template_text(scenario: str) -> str:
    return yaml.safe_dump(template(scenario), sort_keys=False)


def _coerce(key: str, value):
    if value is None:
        return None
    kind = _TYPES[key]
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("true", "1", "yes"):
                return True
            if str(value).lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if kind is list:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            return [float(v) for v in value]
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def parse_config(text: str, scenario: str | None = None) -> dict:
    """Parse YAML config text, filling defaults and rejecting unknown keys."""
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of keys to values")
    scenario = scenario or raw.get("scenario")
    if raw.get("scenario", scenario) != scenario:
        raise ConfigError(f"config is for scenario {raw['scenario']!r}, not {scenario!r}")
    cfg = template(scenario)
    unknown = sorted(set(raw) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown config keys for {scenario}: {', '.join(unknown)}")
    for k, v in raw.items():
        if k != "scenario":
            cfg[k] = _coerce(k, v)
    return cfg


def validate(cfg: dict) -> dict:
    """Apply presets and check scenario invariants; returns the resolved config."""
    cfg = dict(cfg)
    if cfg.get("preset") is not None:
        if cfg["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {cfg['preset']!r}; valid: {', '.join(PRESETS)}")
        for k, v in PRESETS[cfg["preset"]].items():
            if cfg.get(k) is None:
                cfg[k] = v
    if "fock_cutoff" in cfg and cfg["fock_cutoff"] < 2:
        raise ConfigError("fock_cutoff must be >= 2")
    for k in ("nbar", "kappa_over_g", "nbar_bath", "omega_ratio", "epsilon", "g_over_2pi_khz",
              "photon_decay_time_s"):
        if cfg.get(k) is not None and cfg[k] < 0:
            raise ConfigError(f"{k} must be non-negative")
    if any(n < 0 for n in cfg.get("nbar_list") or []):
        raise ConfigError("nbar_list entries must be non-negative")
    if cfg.get("model") is not None and cfg["model"] not in gates.MODELS:
        raise ConfigError(f"model must be one of {', '.join(gates.MODELS)}")
    if cfg["method"] not in ("rk4", "adaptive"):
        raise ConfigError("method must be rk4 or adaptive")
    if not 0 < cfg["tol"] <= 1e-4:
        raise ConfigError("tol must lie in (0, 1e-4]")
    if cfg["scenario"] == "thermal-sweep" and cfg["model"] == "lindblad":
        raise ConfigError("thermal-sweep supports the effective and full models")
    if cfg["scenario"] == "ghz" and cfg["n_atoms"] < 2:
        raise ConfigError("ghz needs n_atoms >= 2")
    if cfg["scenario"] == "ghz" and cfg["omega_t_family"] not in ("auto", "ghz-even", "ghz-odd"):
        raise ConfigError("omega_t_family must be auto, ghz-even or ghz-odd")
    if cfg["scenario"] == "error-budget" and cfg["paper_params"]:
        cfg["omega_ratio"], cfg["epsilon"] = 5.0, 0.01
    if cfg.get("photon_decay_time_s") is not None and cfg.get("model") == "lindblad":
        if cfg.get("g_over_2pi_khz") is None:
            raise ConfigError("photon_decay_time_s needs g_over_2pi_khz to set the units")
        cfg["kappa_over_g"] = analysis.decay_rate_from_preset(cfg["g_over_2pi_khz"], cfg["photon_decay_time_s"])
    return cfg


def _integrator(cfg: dict) -> IntegratorConfig:
    try:
        return IntegratorConfig(method=cfg["method"], step=cfg["step"], tol=cfg["tol"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _field(cfg: dict):
    if cfg["nbar"] == 0:
        return fock_state(cfg["fock_cutoff"], 0)
    return thermal_state(cfg["fock_cutoff"], cfg["nbar"])


# ---------------------------------------------------------------- flattening


def flatten(report: FidelityReport) -> dict:
    row = {"label": report.label, "fidelity": report.fidelity, "truncation_leakage": report.truncation_leakage}
    for group in ("per_input", "delta_f", "phases", "parameters"):
        for k, v in getattr(report, group).items():
            row[f"{group}.{k}"] = v
    return row


def unflatten(row: dict) -> FidelityReport:
    groups = {"per_input": {}, "delta_f": {}, "phases": {}, "parameters": {}}
    for key, value in row.items():
        if "." in key and value != "":
            group, name = key.split(".", 1)
            groups[group][name] = _cell_value(value)
    return FidelityReport(
        label=row["label"],
        fidelity=float(row["fidelity"]),
        truncation_leakage=float(row["truncation_leakage"]),
        **groups,
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _cell_value(text: str):
    if text in ("True", "False"):
        return text == "True"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_rows(rows: list[dict], columns: list[str], stream, meta: str) -> None:
    stream.write(meta + "\n")
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n", extrasaction="raise")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _cell(row.get(c)) for c in columns})


def read_rows(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def _columns(rows: list[dict]) -> list[str]:
    head = ["label", "fidelity", "truncation_leakage"]
    rest = sorted({k for r in rows for k in r} - set(head))
    return head + rest


# ---------------------------------------------------------------- scenarios


def _check_effective(reports, cfg):
    if cfg.get("model") == "effective":
        for r in reports:
            if r.fidelity < 1 - 1e-8:
                raise InvariantFailure(f"effective-model fidelity {r.fidelity} below 1 - 1e-8")


def _physical(cfg: dict, params) -> dict:
    if cfg.get("g_over_2pi_khz") is None:
        return {}
    return {"interaction_time_s": analysis.interaction_time_s(cfg["g_over_2pi_khz"]) * params.t_units / (2 * np.pi),
            "g_over_2pi_khz": cfg["g_over_2pi_khz"]}


def _wrap(phase: float) -> float:
    """Map a phase into (-pi, pi]."""
    return float(np.pi - (np.pi - phase) % (2 * np.pi)) + 0.0


def run_gate(cfg: dict):
    params = gates.plan_gate(1.0, cfg["omega_ratio"])
    rep = gates.verify_gate(params, _field(cfg), cfg["model"], _integrator(cfg),
                            kappa=cfg["kappa_over_g"], nbar_bath=cfg["nbar_bath"])
    rep.parameters.update(_physical(cfg, params))
    _check_effective([rep], cfg)
    lines = [
        f"phase gate, {cfg['model']} model, Omega = {params.omega_ratio:g} g "
        f"(Omega t = {params.omega_t / np.pi:g} pi), nbar = {cfg['nbar']:g}, cutoff {cfg['fock_cutoff']}",
        f"worst-case fidelity: {rep.fidelity:.10f}",
    ]
    ideal = {"++": np.pi, "+-": 0.0, "-+": 0.0, "--": 0.0}
    for lbl in gates.GATE_INPUTS:
        lines.append(f"  |{lbl}>  fidelity {rep.per_input[lbl]:.10f}  phase {_wrap(rep.phases[lbl]) / np.pi:+.6f} pi"
                     f"  (ideal {ideal[lbl] / np.pi:+g} pi)")
    lines.append(f"  |gg> probe fidelity {rep.per_input['gg']:.10f}")
    lines.append(f"truncation leakage: {rep.truncation_leakage:.3e}")
    if "interaction_time_s" in rep.parameters:
        lines.append(f"interaction time: {rep.parameters['interaction_time_s']:.3e} s")
    return [flatten(rep)], lines, [rep]


def run_ghz(cfg: dict):
    n = cfg["n_atoms"]
    family = cfg["omega_t_family"]
    if family == "auto":
        family = "ghz-even" if n % 2 == 0 else "ghz-odd"
    if cfg["family_index"] is not None:
        omega_t = gates.family_omega_t(family, cfg["family_index"])
        params = gates.GateParameters(t=2 * np.pi, delta=1.0, omega_rabi=omega_t / (2 * np.pi),
                                      k=cfg["family_index"], family=family)
    else:
        planned = gates.plan_ghz(n, 1.0, cfg["omega_ratio"])
        params = gates._plan(1.0, cfg["omega_ratio"], family) if family != planned.family else planned
    rep = gates.run_ghz(n, params.omega_ratio, _field(cfg), cfg["model"], _integrator(cfg), params=params,
                        kappa=cfg["kappa_over_g"], nbar_bath=cfg["nbar_bath"])
    resum = gates.ghz_by_resummation(n, params)
    rep.delta_f["resummation_target_fidelity"] = float(abs(np.vdot(gates.ghz_target(n).data, resum.data)) ** 2)
    rep.parameters.update(_physical(cfg, params))
    if family == ("ghz-even" if n % 2 == 0 else "ghz-odd"):
        _check_effective([rep], cfg)
    lines = [
        f"GHZ generation, N = {n}, {cfg['model']} model, Omega t = {params.omega_t / np.pi:g} pi, "
        f"nbar = {cfg['nbar']:g}",
        f"fidelity vs target: {rep.fidelity:.10f}",
        f"fidelity vs printed odd-N form: {rep.per_input['printed_form']:.10f}",
        f"Dicke resummation vs target: {rep.delta_f['resummation_target_fidelity']:.12f}",
        f"truncation leakage: {rep.truncation_leakage:.3e}",
    ]
    return [flatten(rep)], lines, [rep]


def _executor():
    n = int(os.environ.get(THREADS_ENV, "1") or 1)
    return ThreadPoolExecutor(max_workers=n) if n > 1 else None


def run_thermal(cfg: dict):
    params = gates.plan_gate(1.0, cfg["omega_ratio"])
    ex = _executor()
    try:
        reps = analysis.thermal_sweep(params, cfg["nbar_list"], cfg["model"], cfg["fock_cutoff"],
                                      _integrator(cfg), executor=ex)
    finally:
        if ex is not None:
            ex.shutdown()
    _check_effective(reps, cfg)
    if cfg["model"] == "effective" and reps:
        spread = max(r.fidelity for r in reps) - min(r.fidelity for r in reps)
        if spread > 1e-8:
            raise InvariantFailure(f"effective-model fidelities vary by {spread:.3e} across nbar")
    lines = [f"thermal sweep, {cfg['model']} model, Omega = {params.omega_ratio:g} g"]
    for nb, r in zip(cfg["nbar_list"], reps):
        lines.append(f"  nbar {nb:<5g} cutoff {r.parameters['fock_cutoff']:<3d} worst-case fidelity "
                     f"{r.fidelity:.10f}  leakage {r.truncation_leakage:.2e}")
    return [flatten(r) for r in reps], lines, reps


def run_error_budget(cfg: dict):
    reps = analysis.error_budget(cfg["omega_ratio"], cfg["epsilon"], cfg["fock_cutoff"], _integrator(cfg),
                                 simulate=cfg["simulate"])
    f = reps[0].delta_f
    lines = [
        f"error budget, Omega = {cfg['omega_ratio']:g} g, epsilon = {cfg['epsilon']:g}",
        f"  delta_f1 (Stark-shift formula)            {f['delta_f1']:.4f}",
        f"  delta_f3 (formula, entangling drive)      {f['delta_f3_entangling']:.4f}",
        f"  delta_f3 (formula, nearest gate drive)    {f['delta_f3_gate_admissible']:.4f}",
        f"  delta_f2 printed terms                    {f['printed_term1']:.4f} + {f['printed_term2']:.4f}"
        " (second term inconsistent; not used)",
    ]
    for r in reps[1:]:
        lines.append(f"  {r.label:<14s} simulated loss {r.delta_f['simulated']:.4g}")
    return [flatten(r) for r in reps], lines, reps


def run_validate(cfg: dict):
    rng = np.random.default_rng(cfg["seed"])
    integ = IntegratorConfig(method=cfg["method"], step=cfg["step"], tol=min(cfg["tol"], 1e-6))
    rows, lines, worst = [], ["disentangled propagator vs time-ordered integration"], 0.0
    n, cut = cfg["n_atoms"], cfg["fock_cutoff"]
    for i in range(cfg["n_samples"]):
        delta = float(rng.uniform(cfg["delta_min"], cfg["delta_max"]))
        t = float(rng.uniform(0, 4 * np.pi / delta))
        dev, oracle_cut, steps = propagator_deviation(n, cut, delta, t, integ)
        worst = max(worst, dev)
        rows.append({"index": i, "delta": delta, "t": t, "max_deviation": dev,
                     "oracle_cutoff": oracle_cut, "steps": steps})
        lines.append(f"  delta = {delta:.4f} g  t = {t:.4f}/g  max deviation {dev:.3e}")
    lines.append(f"max deviation over {cfg['n_samples']} samples: {worst:.3e}")
    if worst > 1e-6:
        raise InvariantFailure(f"propagator deviation {worst:.3e} exceeds 1e-6")
    return rows, lines, []


RUNNERS = {
    "gate": run_gate,
    "ghz": run_ghz,
    "thermal-sweep": run_thermal,
    "error-budget": run_error_budget,
    "validate-propagator": run_validate,
}


def execute(cfg: dict, stdout=sys.stdout) -> int:
    """Run a resolved config; returns the exit code."""
    try:
        rows, lines, reports = RUNNERS[cfg["scenario"]](cfg)
        for r in reports:
            r.check()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TruncationError, InvariantFailure, ValueError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"integrator did not converge: {exc}", file=sys.stderr)
        return 4
    for ln in lines:
        print(ln, file=stdout)
    if cfg.get("output"):
        meta_items = {k: v for k, v in sorted(cfg.items()) if k != "output"}
        meta = "# cavitygate " + " ".join(f"{k}={json.dumps(v)}" for k, v in meta_items.items())
        columns = _columns(rows) if reports else list(rows[0]) if rows else []
        with open(cfg["output"] + ".csv", "w", newline="") as fh:
            write_rows(rows, columns, fh, meta)
        with open(cfg["output"] + ".jsonl", "w") as fh:
            for r in reports or rows:
                fh.write((r.to_json() if isinstance(r, FidelityReport) else json.dumps(r, sort_keys=True)) + "\n")
        print(f"wrote {cfg['output']}.csv and {cfg['output']}.jsonl", file=stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavitygate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list scenarios")
    tp = sub.add_parser("template", help="print a config template")
    tp.add_argument("scenario")
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", help="YAML config file")
        for key in template(name):
            if key == "scenario":
                continue
            flag = "--" + key.replace("_", "-")
            if _TYPES[key] is bool:
                sp.add_argument(flag, dest=key, default=None, nargs="?", const="true", metavar="BOOL")
            else:
                sp.add_argument(flag, dest=key, default=None, metavar="VALUE")
    return parser


def main(argv=None, stdout=sys.stdout) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in ("list", "template", "-h", "--help") and argv[0] not in SCENARIOS:
        print(f"error: unknown scenario {argv[0]!r}; valid: {', '.join(SCENARIOS)}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.command == "list":
        for name in SCENARIOS:
            print(name, file=stdout)
        return 0
    if args.command == "template":
        try:
            print(template_text(args.scenario), end="", file=stdout)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(text, args.command)
        for key in template(args.command):
            value = getattr(args, key, None)
            if key != "scenario" and value is not None:
                cfg[key] = _coerce(key, yaml.safe_load(value) if _TYPES[key] is not list else value)
        cfg = validate(cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return execute(cfg, stdout)


if __name__ == "__main__":
    sys.exit(main())
