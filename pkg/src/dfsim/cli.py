"""Command-line front end: scenario files, presets, sweeps, CSV emission.

Scenario files are line-oriented ``key = value`` text with ``#`` comments;
all physical quantities are in units of the coupling strength (gamma = 1
defines the scale, hbar = k_B = 1). Outputs are deterministic: identical
inputs produce byte-identical CSV and report files, with no timestamps.
"""

import argparse
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .liouville import DensityVector
from .scenario import (PRESETS, BMComparison, ScenarioConfig, ScenarioReport,
                       StabilizationCondition, bm_compare, default_grid,
                       preset, run_scenario, sweep)
from .greens import TimeGrid
from .spectral import SpectralKind, SpectralModel

CSV_HEADER = ("t,re_u,im_u,abs_u,v,v_plus_u2,eps_tilde,gamma,gamma_tilde,"
              "kappa,kappa_tilde,rho_vv,rho_pp,re_rho_pm,im_rho_pm,rho_mm,"
              "rho_dd,purity")

_MODEL_KEYS = ("model.kind", "model.gamma", "model.d", "model.eps0",
               "model.mu", "model.T")
_OTHER_KEYS = ("grid.dt", "grid.horizon", "init.state", "init.phi",
               "init.alpha", "init.beta", "switchoff.tol", "switchoff.window")
KNOWN_KEYS = _MODEL_KEYS + _OTHER_KEYS


class ScenarioFileError(ValueError):
    """Scenario text rejected; message names the line and key."""


@dataclass(frozen=True)
class RunManifest:
    command: str
    scenario: Optional[str] = None
    out_dir: str = "dfsim-out"
    precision: int = 12
    overrides: Tuple[Tuple[str, str], ...] = ()


def _parse_float(raw: str, key: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioFileError(
            f"line {line}: key {key} has unparsable number {raw!r}") from None


def _parse_complex(raw: str, key: str, line: int) -> complex:
    try:
        return complex(raw.replace(" ", ""))
    except ValueError:
        raise ScenarioFileError(
            f"line {line}: key {key} has unparsable value {raw!r}") from None


def _scan_pairs(text: str) -> Dict[str, Tuple[str, int]]:
    pairs: Dict[str, Tuple[str, int]] = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        body = rawline.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioFileError(
                f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ScenarioFileError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ScenarioFileError(
                f"line {lineno}: key {key} already set on line {pairs[key][1]}")
        if not value:
            raise ScenarioFileError(f"line {lineno}: key {key} has no value")
        pairs[key] = (value, lineno)
    return pairs


def parse_scenario_file(text: str) -> ScenarioConfig:
    """Build a validated ScenarioConfig from scenario text."""
    pairs = _scan_pairs(text)

    def take(key: str):
        return pairs.pop(key, (None, 0))

    kind_raw, kind_line = take("model.kind")
    if kind_raw is None:
        raise ScenarioFileError("model.kind required (lorentzian or wide-band)")
    try:
        kind = SpectralKind(kind_raw)
    except ValueError:
        raise ScenarioFileError(
            f"line {kind_line}: model.kind must be 'lorentzian' or "
            f"'wide-band', got {kind_raw!r}") from None

    gamma_raw, gamma_line = take("model.gamma")
    if gamma_raw is None:
        raise ScenarioFileError("model.gamma required")
    gamma = _parse_float(gamma_raw, "model.gamma", gamma_line)

    temp_raw, temp_line = take("model.T")
    if temp_raw is None:
        raise ScenarioFileError("model.T required (temperature)")
    temp = _parse_float(temp_raw, "model.T", temp_line)

    d_raw, d_line = take("model.d")
    if kind is SpectralKind.LORENTZIAN and d_raw is None:
        raise ScenarioFileError("model.d required for a lorentzian model")
    if kind is SpectralKind.WIDE_BAND and d_raw is not None:
        raise ScenarioFileError(
            f"line {d_line}: model.d is meaningless for a wide-band model")

    eps0_raw, eps0_line = take("model.eps0")
    eps0 = 0.2 if eps0_raw is None else _parse_float(eps0_raw, "model.eps0", eps0_line)
    mu_raw, mu_line = take("model.mu")
    mu = 0.0 if mu_raw is None else _parse_float(mu_raw, "model.mu", mu_line)

    try:
        if kind is SpectralKind.LORENTZIAN:
            model = SpectralModel.lorentzian(
                gamma, _parse_float(d_raw, "model.d", d_line),
                eps_plus=eps0, mu=mu, temperature=temp)
        else:
            model = SpectralModel.wide_band(gamma, eps_plus=eps0, mu=mu,
                                            temperature=temp)
    except ValueError as exc:
        raise ScenarioFileError(f"model invalid: {exc}") from None

    dt_raw, dt_line = take("grid.dt")
    dt = 1e-3 if dt_raw is None else _parse_float(dt_raw, "grid.dt", dt_line)
    hor_raw, hor_line = take("grid.horizon")
    horizon = (None if hor_raw is None
               else _parse_float(hor_raw, "grid.horizon", hor_line))
    try:
        grid = default_grid(model, dt=dt, horizon=horizon)
    except ValueError as exc:
        raise ScenarioFileError(f"grid invalid: {exc}") from None

    phi_raw, phi_line = take("init.phi")
    phi = 0.0 if phi_raw is None else _parse_float(phi_raw, "init.phi", phi_line)
    state_raw, state_line = take("init.state")
    alpha_raw, alpha_line = take("init.alpha")
    beta_raw, beta_line = take("init.beta")
    wants_super = (state_raw == "superposition" or alpha_raw is not None
                   or beta_raw is not None)
    if wants_super:
        if alpha_raw is None or beta_raw is None:
            raise ScenarioFileError(
                "superposition initial state needs both init.alpha and init.beta")
        if state_raw is not None and state_raw != "superposition":
            raise ScenarioFileError(
                f"line {state_line}: init.state {state_raw!r} conflicts with "
                "init.alpha/init.beta")
        alpha = _parse_complex(alpha_raw, "init.alpha", alpha_line)
        beta = _parse_complex(beta_raw, "init.beta", beta_line)
        try:
            initial = DensityVector.superposition(alpha, beta)
        except ValueError as exc:
            raise ScenarioFileError(f"init.alpha/init.beta invalid: {exc}") from None
    else:
        initial = "v" if state_raw is None else state_raw
        if initial not in ("v", "+", "-", "d"):
            raise ScenarioFileError(
                f"line {state_line}: init.state must be one of v, +, -, d, "
                f"superposition; got {state_raw!r}")

    tol_raw, tol_line = take("switchoff.tol")
    tol = 1e-3 if tol_raw is None else _parse_float(tol_raw, "switchoff.tol", tol_line)
    win_raw, win_line = take("switchoff.window")
    window = 2.0 if win_raw is None else _parse_float(win_raw, "switchoff.window",
                                                      win_line)
    if tol <= 0 or window <= 0:
        raise ScenarioFileError("switchoff.tol and switchoff.window must be > 0")
    return ScenarioConfig(model=model, grid=grid, initial_state=initial,
                          phi=phi, switch_tol=tol, switch_window=window)


def _apply_overrides(text: str, overrides) -> str:
    """Overrides are appended as lines, replacing earlier settings of the key."""
    lines = []
    keys = {k for k, _ in overrides}
    for rawline in text.splitlines():
        body = rawline.split("#", 1)[0]
        if "=" in body and body.split("=", 1)[0].strip() in keys:
            continue
        lines.append(rawline)
    for key, value in overrides:
        if key not in KNOWN_KEYS:
            raise ScenarioFileError(f"override references unknown key {key!r}")
        lines.append(f"{key} = {value}")
    return "\n".join(lines)


def _config_text(cfg: ScenarioConfig) -> str:
    """Round-trip a config to scenario text (for presets + overrides)."""
    m = cfg.model
    lines = [f"model.kind = {m.kind.value}", f"model.gamma = {m.gamma:.12g}"]
    if m.kind is SpectralKind.LORENTZIAN:
        lines.append(f"model.d = {m.d:.12g}")
    lines += [f"model.eps0 = {m.eps_plus:.12g}", f"model.mu = {m.mu:.12g}",
              f"model.T = {m.temperature:.12g}",
              f"grid.dt = {cfg.grid.dt:.12g}",
              f"grid.horizon = {cfg.grid.horizon:.12g}"]
    if isinstance(cfg.initial_state, str):
        lines.append(f"init.state = {cfg.initial_state}")
    else:
        c = cfg.initial_state.components
        alpha = np.sqrt(max(float(c[1].real), 0.0))
        beta = (np.conj(c[2]) / alpha if alpha > 0
                else np.sqrt(max(float(c[4].real), 0.0)))
        lines += ["init.state = superposition", f"init.alpha = {alpha:.12g}",
                  f"init.beta = {complex(beta):.12g}".replace("(", "").replace(")", "")]
    lines += [f"init.phi = {cfg.phi:.12g}",
              f"switchoff.tol = {cfg.switch_tol:.12g}",
              f"switchoff.window = {cfg.switch_window:.12g}"]
    return "\n".join(lines)


def _fmt(value: float, precision: int) -> str:
    return f"%.{precision}g" % value


def emit_csv(report: ScenarioReport, out_dir: str, precision: int = 12) -> List[str]:
    """Write trajectory.csv and report.txt; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if report.green is not None and report.exact is not None:
        gt, rt, ex = report.green, report.rates, report.exact
        t = gt.grid.times
        rho = ex.components
        purity = (np.sum(np.real(rho[[0, 1, 4, 5]]) ** 2, axis=0)
                  + 2.0 * np.abs(rho[2]) ** 2)
        cols = np.column_stack([
            t, gt.u.real, gt.u.imag, np.abs(gt.u), gt.v,
            gt.v + np.abs(gt.u) ** 2,
            rt.eps_tilde, rt.gamma, rt.gamma_tilde, rt.kappa, rt.kappa_tilde,
            rho[0].real, rho[1].real, rho[2].real, rho[2].imag,
            rho[4].real, rho[5].real, purity,
        ])
        path = os.path.join(out_dir, "trajectory.csv")
        try:
            np.savetxt(path, cols, fmt=f"%.{precision}g", delimiter=",",
                       header=CSV_HEADER, comments="")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        paths.append(path)
    path = os.path.join(out_dir, "report.txt")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_report_text(report, precision))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    paths.append(path)
    return paths


def _describe_model(m: SpectralModel) -> str:
    core = f"{m.kind.value} gamma={m.gamma:g} eps0={m.eps_plus:g} mu={m.mu:g} T={m.temperature:g}"
    return core if m.d is None else core + f" d={m.d:g}"


def _report_text(report: ScenarioReport, precision: int = 6) -> str:
    cfg = report.config
    lines = [f"model: {_describe_model(cfg.model)}",
             f"grid: dt={cfg.grid.dt:g} horizon={cfg.grid.horizon:g}"]
    init = (cfg.initial_state if isinstance(cfg.initial_state, str)
            else "superposition")
    lines.append(f"initial state: {init}")
    if not report.ok:
        lines.append(f"FAILED at stage {report.failed_stage}: {report.error}")
        return "\n".join(lines) + "\n"
    sw = report.switch
    t_s = "-" if sw.t_s is None else _fmt(sw.t_s, precision)
    lines += [
        f"switch-off: {sw.which.value} (t_s = {t_s}, tolerance = {sw.tolerance:g}, "
        f"window = {sw.window:g})",
        f"late DF set: {report.df_timeline[-1][1].describe()}",
        f"steady v: {_fmt(report.steady_v.value, precision)} "
        f"(steady={report.steady_v.steady}, dev={report.steady_v.deviation:.3g})",
        f"steady v+|u|^2: {_fmt(report.steady_n.value, precision)} "
        f"(steady={report.steady_n.steady}, dev={report.steady_n.deviation:.3g})",
        f"condition met: {report.verdict.condition_met.value}",
    ]
    pred = report.verdict.predicted_df_state
    lines.append(f"predicted stabilized state: "
                 f"{'none' if pred is None else '|' + pred + '>'}")
    fid = report.verdict.fidelity
    lines.append(f"achieved-state fidelity: "
                 f"{'-' if np.isnan(fid) else _fmt(fid, precision)}")
    if report.ode is not None and report.exact is not None:
        nv = report.ode.n_valid
        dev = np.nanmax(np.abs(report.exact.components[:, :nv]
                               - report.ode.components[:, :nv]))
        lines += [f"map/ode max deviation: {dev:.3e}",
                  f"ode trace drift: {report.ode.trace_drift:.3e}",
                  f"positivity margin: {report.exact.positivity_margin:.3e}"]
        if report.ode.truncated:
            lines.append(f"NOTE: |u| reached its floor at node {nv - 1}; "
                         "rates and ODE states end there")
    return "\n".join(lines) + "\n"


def _emit_bm(cmp: BMComparison, cfg: ScenarioConfig, out_dir: str,
             precision: int) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "comparison.txt")
    lines = [
        f"model: {_describe_model(cfg.model)}",
        f"comparison window: t in [{cmp.window[0]:g}, {cmp.window[1]:g}]",
        f"max |u_exact - u_bm| / |u_bm|: {_fmt(cmp.u_rel_max, precision)}",
        f"max |v_exact - v_bm| / max|v_bm|: {_fmt(cmp.v_rel_max, precision)}",
        f"max |kappa_exact - kappa_bm| / (J(eps0)/2): {_fmt(cmp.kappa_dev, precision)}",
        f"max |kappa_tilde_exact - kappa_tilde_bm| / (J(eps0)/2): "
        f"{_fmt(cmp.kappa_tilde_dev, precision)}",
        f"BM DF set: {cmp.bm_df.describe()}",
        f"exact late-time DF set (rates below {cmp.rel_tol:g} * J/2 off): "
        f"{cmp.exact_df.describe()}",
        f"classification match: {cmp.df_match}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return [path]


def _load_configs(scenario: str, overrides) -> List[Tuple[str, ScenarioConfig]]:
    """A preset name fans out to members; a path loads one scenario file."""
    if scenario in PRESETS:
        rows = preset(scenario)
        out = []
        for label, cfg in rows:
            text = _apply_overrides(_config_text(cfg), overrides)
            out.append((label, parse_scenario_file(text)))
        return out
    try:
        with open(scenario, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioFileError(
            f"{scenario!r} is neither a preset ({', '.join(PRESETS)}) nor a "
            f"readable scenario file: {exc}") from None
    return [("scenario", parse_scenario_file(_apply_overrides(text, overrides)))]


def _cmd_run(manifest: RunManifest) -> int:
    members = _load_configs(manifest.scenario, manifest.overrides)
    failures = []
    for label, cfg in members:
        out = (manifest.out_dir if len(members) == 1
               else os.path.join(manifest.out_dir, label))
        report = run_scenario(cfg)
        emit_csv(report, out, manifest.precision)
        if not report.ok:
            failures.append(f"{label}: stage {report.failed_stage}: {report.error}")
        else:
            print(f"{label}: wrote {out}/trajectory.csv "
                  f"(switch-off {report.switch.which.value})")
    for msg in failures:
        print(f"error: {msg}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_sweep(manifest: RunManifest, param: str, values: Sequence[float]) -> int:
    members = _load_configs(manifest.scenario, manifest.overrides)
    base = members[0][1]
    rows = sweep(param, list(values), base)
    os.makedirs(manifest.out_dir, exist_ok=True)
    summary = ["value,steady_v,steady_n,switch,t_s,condition,predicted,fidelity,failed_stage"]
    failures = 0
    p = manifest.precision
    for value, report in rows:
        cell = os.path.join(manifest.out_dir, f"{param}={value:g}")
        emit_csv(report, cell, p)
        if report.ok:
            sw = report.switch
            summary.append(",".join([
                _fmt(value, p), _fmt(report.steady_v.value, p),
                _fmt(report.steady_n.value, p), sw.which.value,
                "-" if sw.t_s is None else _fmt(sw.t_s, p),
                report.verdict.condition_met.value,
                report.verdict.predicted_df_state or "-",
                "-" if np.isnan(report.verdict.fidelity)
                else _fmt(report.verdict.fidelity, p), "-"]))
        else:
            failures += 1
            summary.append(",".join([_fmt(value, p)] + ["-"] * 7
                                    + [report.failed_stage]))
            print(f"error: {param}={value:g}: stage {report.failed_stage}: "
                  f"{report.error}", file=sys.stderr)
    path = os.path.join(manifest.out_dir, "summary.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary) + "\n")
    print(f"wrote {path} ({len(rows)} rows)")
    return 1 if failures else 0


def _cmd_bm(manifest: RunManifest) -> int:
    members = _load_configs(manifest.scenario, manifest.overrides)
    failures = 0
    for label, cfg in members:
        out = (manifest.out_dir if len(members) == 1
               else os.path.join(manifest.out_dir, label))
        try:
            cmp = bm_compare(cfg)
        except Exception as exc:
            failures += 1
            print(f"error: {label}: stage bm-compare: {type(exc).__name__}: {exc}",
                  file=sys.stderr)
            continue
        _emit_bm(cmp, cfg, out, manifest.precision)
        print(f"{label}: BM match={cmp.df_match} u_rel={cmp.u_rel_max:.3g} "
              f"kappa_dev={cmp.kappa_dev:.3g}")
    return 1 if failures else 0


def _cmd_presets() -> int:
    for name in PRESETS:
        rows = preset(name)
        print(f"{name}:")
        for label, cfg in rows:
            print(f"  {label}: {_describe_model(cfg.model)} "
                  f"horizon={cfg.grid.horizon:g}")
    return 0


def _parse_overrides(raw: Optional[List[str]]):
    pairs = []
    for item in raw or []:
        if "=" not in item:
            raise ScenarioFileError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return tuple(pairs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfsim",
        description="Non-Markovian two-level fermionic dynamics: Green "
                    "functions, decoherence rates, DF-state reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="dfsim-out", help="output directory")
        p.add_argument("--precision", type=int, default=12,
                       help="significant digits in CSV output")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="override a scenario key (repeatable)")

    p_run = sub.add_parser("run", help="run a scenario file or preset")
    p_run.add_argument("scenario", help="scenario file path or preset name")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="sweep bias or bandwidth")
    p_sweep.add_argument("scenario", help="base scenario file or preset name")
    p_sweep.add_argument("--param", required=True, choices=("bias", "bandwidth"))
    p_sweep.add_argument("--values", required=True, nargs="+", type=float)
    common(p_sweep)

    p_bm = sub.add_parser("bm-compare", help="exact vs Born-Markov comparison")
    p_bm.add_argument("scenario", help="scenario file path or preset name")
    common(p_bm)

    sub.add_parser("presets", help="list built-in presets")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            return _cmd_presets()
        manifest = RunManifest(command=args.command, scenario=args.scenario,
                               out_dir=args.out, precision=args.precision,
                               overrides=_parse_overrides(args.override))
        if manifest.precision < 1 or manifest.precision > 17:
            print("error: --precision must be in 1..17", file=sys.stderr)
            return 2
        if args.command == "run":
            return _cmd_run(manifest)
        if args.command == "sweep":
            return _cmd_sweep(manifest, args.param, args.values)
        return _cmd_bm(manifest)
    except ScenarioFileError as exc:
        print(f"error: stage scenario-parse: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: stage output: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
