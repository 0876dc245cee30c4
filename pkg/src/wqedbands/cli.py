"""Command-line front end: spectra, gap reports, dispersion curves and mode tables.

Exit codes
    0  success
    1  validate found a deviation (or replay produced different bytes)
    2  bad configuration / options / empty grid
    3  numerical failure
    4  --analytic requested but no closed-form regime matches
    5  Markov-only command run on a full-phase configuration
    6  degenerate collective spectrum

Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import functools
import json
import math
import os
import sys

import click
import numpy as np

from . import __version__
from .bandgap import (GAP_TOL, closed_form_prediction, gap_regions, nearest_regime)
from .dispersion import dispersion_curve
from .errors import DegenerateSpectrum, WqedError
from .io import ConfigError, config_to_dict, csv_text, json_text, load_config, parse_config_text, sha256_text
from .model import PhaseMode
from .modes import lorentzian_decomposition, mode_components, subradiant_metrics
from .oracle import direct_solve, random_config
from .scattering import DetuningGrid, chain_amplitudes, spectrum_sweep, transmittance_reflectance

VALIDATE_TOL = 1e-9


class CliFailure(Exception):
    def __init__(self, code, message, **extra):
        super().__init__(message)
        self.code = code
        self.extra = extra


def _fail_json(exc: CliFailure):
    payload = {"error": type(exc.__cause__).__name__ if exc.__cause__ else "CliFailure",
               "exit_code": exc.code, "message": str(exc)}
    payload.update(exc.extra)
    click.echo(json.dumps(payload), err=True)


def _guarded(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CliFailure as exc:
            _fail_json(exc)
            sys.exit(exc.code)
        except ConfigError as exc:
            _fail_json(_config_failure(exc))
            sys.exit(2)
    return wrapper


def _config_failure(exc: ConfigError) -> CliFailure:
    failure = CliFailure(2, str(exc), line=exc.line, field=exc.field)
    failure.__cause__ = exc
    return failure


def _require_markov(config, command):
    if config.phase_mode is not PhaseMode.MARKOV:
        raise CliFailure(5, f"{command} needs Delta-independent phases; set phase_mode = markov "
                            "(the Bloch and mode pictures are defined in the Markov regime)")


# -- commands as pure functions of (config, params) -> {role: text} ----------

def run_spectrum(config, params):
    g = config.gamma
    try:
        grid = DetuningGrid(params["dmin"] * g, params["dmax"] * g, params["points"])
    except ValueError as exc:
        raise CliFailure(2, str(exc)) from exc
    try:
        samples = spectrum_sweep(config, grid)
    except WqedError:
        samples = None
    bad = None
    if samples is None:
        for d in grid.values():
            try:
                transmittance_reflectance(config, d)
            except WqedError:
                bad = d
                break
    else:
        bad = next((s.delta for s in samples if not (math.isfinite(s.T) and math.isfinite(s.R))), None)
    if bad is not None:
        raise CliFailure(3, f"numerical failure at Delta/gamma={bad / g!r}", delta_over_gamma=bad / g)
    rows = [(s.delta / g, s.T, s.R, s.y, s.zeta) for s in samples]
    return {"main": csv_text(rows, ["delta_over_gamma", "T", "R", "y", "zeta"])}


def _gap_entry(config, interval, resolution, analytic):
    g = config.gamma
    lo, hi = interval
    rep = gap_regions(config, (lo * g, hi * g), resolution * g)
    entry = {
        "gaps": [{"lo": a / g, "hi": b / g, "width": (b - a) / g, "center": 0.5 * (a + b) / g}
                 for a, b in rep.gaps],
        "passbands": [[a / g, b / g] for a, b in rep.passbands],
    }
    if analytic:
        if config.phase_mode is not PhaseMode.MARKOV:
            raise CliFailure(4, "closed forms assume the Markov phase mode", nearest_regime=None)
        pred = closed_form_prediction(config)
        if pred is None:
            near = nearest_regime(config) if config.atoms_per_cell == 2 else "none"
            raise CliFailure(4, f"no closed-form regime matches this configuration "
                                f"(nearest dimer regime: {near})", nearest_regime=near)
        # closed forms describe the infinite chain; compare edges inside the scanned window
        pg = [(max(a, lo * g), min(b, hi * g)) for a, b in pred.gaps if b > lo * g and a < hi * g]
        if len(pg) == len(rep.gaps):
            dev = [[(a - c) / g, (b - d) / g] for (a, b), (c, d) in zip(rep.gaps, pg)]
            worst = max((abs(x) for pair in dev for x in pair), default=0.0)
        else:
            dev, worst = None, math.inf
        entry["analytic"] = {
            "regime": pred.regime,
            "gaps": [[a / g, b / g] for a, b in pred.gaps],
            "widths": [w / g for w in pred.widths],
            "centers": [c / g for c in pred.centers],
            "passband_widths": [w / g for w in pred.passband_widths],
            "aux": {k: (v / g if isinstance(v, float) and k not in ("f", "eta", "J_reduced") else v)
                    for k, v in pred.aux.items()},
            "edge_deviation": dev,
            "max_deviation": worst,
        }
    return entry


def _sweep_values(spec):
    start, stop, num = spec
    return np.linspace(start, stop, int(num))


def run_bandgaps(config, params):
    interval = tuple(params["range"])
    resolution = params["resolution"]
    analytic = params["analytic"]
    out = {"command": "bandgaps", "interval_over_gamma": list(interval),
           "resolution_over_gamma": resolution, "gap_tol": GAP_TOL}
    try:
        if params.get("sweep_j"):
            n = config.atoms_per_cell
            rows = []
            for J in _sweep_values(params["sweep_j"]):
                J = float(J) * config.gamma
                if n == 4 and len(set(config.couplings[::2])) == 1 and config.couplings[0] != 0:
                    eta = config.couplings[1] / config.couplings[0]
                    couplings = (J, eta * J, J)
                else:
                    couplings = (J,) * (n - 1)
                rows.append({"J_over_gamma": J / config.gamma,
                             **_gap_entry(config.with_(couplings=couplings), interval, resolution, analytic)})
            out["sweep"] = {"parameter": "J", "points": rows}
        elif params.get("sweep_eta"):
            if config.atoms_per_cell != 4:
                raise CliFailure(2, "--sweep-eta needs atoms_per_cell = 4")
            J = config.couplings[0]
            rows = []
            for eta in _sweep_values(params["sweep_eta"]):
                cfg = config.with_(couplings=(J, float(eta) * J, J))
                rows.append({"eta": float(eta), **_gap_entry(cfg, interval, resolution, analytic)})
            out["sweep"] = {"parameter": "eta", "points": rows}
        else:
            out.update(_gap_entry(config, interval, resolution, analytic))
    except ValueError as exc:
        raise CliFailure(2, str(exc)) from exc
    except WqedError as exc:
        raise CliFailure(3, str(exc)) from exc
    return {"main": json_text(out)}


def run_dispersion(config, params):
    _require_markov(config, "dispersion")
    g = config.gamma
    lo, hi = params["range"]
    res = params["resolution"] * g
    try:
        rep = gap_regions(config, (lo * g, hi * g), res)
        rows = []
        for k, band in enumerate(rep.passbands):
            if band[1] - band[0] <= 0:
                continue
            curve = dispersion_curve(config, band, res, band_index=k)
            rows.extend((k, d / g, q / math.pi, v / g)
                        for d, q, v in zip(curve.delta, curve.qL, curve.group_velocity))
    except ValueError as exc:
        raise CliFailure(2, str(exc)) from exc
    except WqedError as exc:
        raise CliFailure(3, str(exc)) from exc
    header = ["band_index", "delta_over_gamma", "qL_over_pi", "dDelta_dqL_over_gamma"]
    return {"main": csv_text(rows, header)}


def run_modes(config, params):
    _require_markov(config, "modes")
    g = config.gamma
    try:
        grid = DetuningGrid(params["dmin"] * g, params["dmax"] * g, params["points"])
    except ValueError as exc:
        raise CliFailure(2, str(exc)) from exc
    try:
        modes = lorentzian_decomposition(config)
    except DegenerateSpectrum as exc:
        raise CliFailure(6, str(exc), min_gap=exc.min_gap,
                         suggestion="perturb one coupling by about 1e-7 gamma") from exc
    gms, w = subradiant_metrics(modes) if len(modes) >= 2 else (None, None)
    summary = {
        "command": "modes",
        "n_modes": len(modes),
        "modes": [{"index": j + 1, "delta_tilde_over_gamma": float(modes.shifts[j]) / g,
                   "gamma_tilde_over_gamma": float(modes.widths[j]) / g,
                   "abs_c": float(abs(modes.c[j])) / g, "abs_d": float(abs(modes.d[j])) / g}
                  for j in range(len(modes))],
        "gamma_ms_over_gamma": None if gms is None else gms / g,
        "w_over_gamma": None if w is None else w / g,
        "components": "magnitude |L_j(Delta)| of d_j / (Delta - lambda_j)",
    }
    d = grid.values()
    comp = mode_components(modes, d)
    r_modes = np.abs(comp.sum(axis=1)) ** 2
    header = ["delta_over_gamma"] + [f"L_{j + 1}" for j in range(len(modes))] + ["R_modes"]
    rows = [(d[k] / g, *np.abs(comp[k]), r_modes[k]) for k in range(d.size)]
    return {"main": json_text(summary), "components": csv_text(rows, header)}


def run_validate(config, params):
    rng = np.random.default_rng(params["seed"])
    n = params["samples"]
    if n < 1:
        raise CliFailure(2, "--samples must be at least 1")
    worst, worst_case = 0.0, None
    for _ in range(n):
        cfg = config if config is not None else random_config(rng)
        for _attempt in range(20):
            delta = float(rng.uniform(-10.0, 10.0)) * cfg.gamma
            try:
                sol = direct_solve(cfg, delta)
                t, r = chain_amplitudes(cfg, delta)
                break
            except WqedError:
                continue
        else:
            raise CliFailure(3, "could not find a regular detuning for a sampled configuration",
                             config=config_to_dict(cfg))
        dev = abs(sol.t - t) + abs(sol.r - r)
        # a nan deviation must surface as the worst case
        if worst_case is None or not dev <= worst:
            worst, worst_case = dev, (cfg, delta)
    report = {"command": "validate", "samples": n, "seed": params["seed"], "tolerance": VALIDATE_TOL,
              "max_deviation": worst, "worst_config": config_to_dict(worst_case[0]),
              "worst_delta": worst_case[1]}
    if not worst < VALIDATE_TOL:
        raise CliFailure(1, f"oracle deviation {worst:.3e} exceeds {VALIDATE_TOL:g}",
                         max_deviation=worst, config=config_to_dict(worst_case[0]), delta=worst_case[1])
    return {"main": json_text(report)}


RUNNERS = {"spectrum": run_spectrum, "bandgaps": run_bandgaps, "dispersion": run_dispersion,
           "modes": run_modes, "validate": run_validate}


# -- output and manifests -----------------------------------------------------

def _output_paths(out, roles):
    if out is None:
        return {}
    paths = {"main": out}
    if "components" in roles:
        stem, _ = os.path.splitext(out)
        paths["components"] = stem + "_components.csv"
    return paths


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _emit(command, config, text, params, out):
    outputs = RUNNERS[command](config, params)
    paths = _output_paths(out, outputs)
    if not paths:
        click.echo(outputs["main"], nl=False)
        return outputs
    for role, body in outputs.items():
        _write(paths[role], body)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "params": params,
        "config": None if config is None else config_to_dict(config),
        "config_text": text,
        "config_sha256": None if text is None else sha256_text(text),
        "outputs": {role: {"path": paths[role], "sha256": sha256_text(body)} for role, body in outputs.items()},
    }
    _write(out + ".manifest.json", json_text(manifest))
    return outputs


def _load(path):
    if path is None:
        return None, None
    return load_config(path)


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True,
                             help="Chain configuration file (key = value).")
out_option = click.option("--out", type=click.Path(dir_okay=False), default=None,
                          help="Output file; a <out>.manifest.json is written next to it.")


@click.group()
@click.version_option(__version__, prog_name="wqed-bands")
def main():
    """Photonic band structure of atom-polymer chains in a waveguide."""


@main.command()
@config_option
@click.option("--dmin", type=float, default=-5.0, show_default=True, help="Lowest detuning / gamma.")
@click.option("--dmax", type=float, default=5.0, show_default=True, help="Highest detuning / gamma.")
@click.option("--points", type=int, default=1001, show_default=True)
@out_option
@_guarded
def spectrum(config_path, dmin, dmax, points, out):
    """T, R, y and zeta on a uniform detuning grid (CSV)."""
    config, text = _load(config_path)
    _emit("spectrum", config, text, {"dmin": dmin, "dmax": dmax, "points": points}, out)


@main.command()
@config_option
@click.option("--range", "range_", type=float, nargs=2, default=(-10.0, 10.0), show_default=True,
              help="Scan window in units of gamma.")
@click.option("--resolution", type=float, default=0.01, show_default=True)
@click.option("--analytic", is_flag=True, help="Attach the closed-form prediction and edge deviations.")
@click.option("--sweep-j", type=float, nargs=3, default=None, help="START STOP NUM coupling sweep.")
@click.option("--sweep-eta", type=float, nargs=3, default=None, help="START STOP NUM tetramer eta sweep.")
@out_option
@_guarded
def bandgaps(config_path, range_, resolution, analytic, sweep_j, sweep_eta, out):
    """Gap intervals, widths and centres (JSON)."""
    config, text = _load(config_path)
    params = {"range": list(range_), "resolution": resolution, "analytic": analytic,
              "sweep_j": list(sweep_j) if sweep_j else None,
              "sweep_eta": list(sweep_eta) if sweep_eta else None}
    _emit("bandgaps", config, text, params, out)


@main.command()
@config_option
@click.option("--range", "range_", type=float, nargs=2, default=(-5.0, 5.0), show_default=True)
@click.option("--resolution", type=float, default=0.001, show_default=True)
@out_option
@_guarded
def dispersion(config_path, range_, resolution, out):
    """Bloch branches qL(Delta) and group velocity per passband (CSV)."""
    config, text = _load(config_path)
    _emit("dispersion", config, text, {"range": list(range_), "resolution": resolution}, out)


@main.command()
@config_option
@click.option("--dmin", type=float, default=-5.0, show_default=True)
@click.option("--dmax", type=float, default=5.0, show_default=True)
@click.option("--points", type=int, default=1001, show_default=True)
@out_option
@_guarded
def modes(config_path, dmin, dmax, points, out):
    """Collective modes (JSON) and per-mode Lorentzian components (CSV)."""
    config, text = _load(config_path)
    _emit("modes", config, text, {"dmin": dmin, "dmax": dmax, "points": points}, out)


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Pin every sample to this configuration (random detunings only).")
@click.option("--samples", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@out_option
@_guarded
def validate(config_path, samples, seed, out):
    """Differential test of the transfer-matrix path against the direct solve."""
    config, text = _load(config_path)
    _emit("validate", config, text, {"samples": samples, "seed": seed}, out)


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--check", is_flag=True, help="Compare against recorded hashes instead of writing.")
@_guarded
def replay(manifest, check):
    """Re-run a manifest; with --check, exit 1 unless every output is byte-identical."""
    with open(manifest, encoding="utf-8") as fh:
        man = json.load(fh)
    text = man.get("config_text")
    config = None if text is None else parse_config_text(text)
    outputs = RUNNERS[man["command"]](config, man["params"])
    mismatched = [role for role, body in outputs.items()
                  if sha256_text(body) != man["outputs"][role]["sha256"]]
    if check:
        if mismatched:
            raise CliFailure(1, f"outputs differ from manifest: {', '.join(mismatched)}")
        click.echo(json_text({"replay": "identical", "outputs": sorted(outputs)}), nl=False)
        return
    for role, body in outputs.items():
        _write(man["outputs"][role]["path"], body)


if __name__ == "__main__":
    main()
