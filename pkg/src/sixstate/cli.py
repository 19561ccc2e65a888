"""Command-line front end.

Subcommands: rate, asymptotic, sweep, min-pulses, simulate, threshold.
Options come from defaults, then a flat `key = value` config file, then
flags, in increasing precedence; the effective configuration is echoed in
every output header.  Exit codes: 0 success/feasible, 1 usage or invariant
error, 2 infeasible (no positive key).

All numeric cells are serialized with 17 significant digits, and nothing
time- or host-dependent is ever emitted, so identical inputs produce
byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .errors import ConvergenceError, InfeasibleError, ParameterError
from .optimize import SearchSpace, optimize_asymptotic, optimize_key_length
from .rates import (
    SecurityBudget,
    SiftingProbabilities,
    asymptotic_rate,
    min_pulses_for_key,
    qber_threshold,
)
from .simulate import simulate, zscore_p11, zscore_qber
from .spdc import SetupParams, coincidence_probability, expected_qber

COLUMNS = ["L_km", "N_source", "lambda_opt", "p_x_opt", "eps_bar", "eps_pe",
           "eps_pa", "e_pdc", "p11", "key_bits", "rate"]

_DEFAULTS = {
    "L": "0", "alpha": "0.17", "eta_d": "1", "eta_d_bob": None, "eta_m": "0",
    "lambda": "opt", "px": "opt", "N": None,
    "eps": "1e-9", "eps_ec": "1e-10", "fec": "1.2", "strict_pe": "false",
    "target_bits": "1", "pulses": None, "seed": None,
    "var": None, "values": None, "start": None, "stop": None, "count": None,
    "scale": "linear", "asymptotic": "false", "columns": None, "plot": None,
    "jobs": "1", "format": "csv", "config": None,
}

_COMMAND_DEFAULTS = {"simulate": {"px": "0.25"}}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _as_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParameterError(f"{key} = {raw!r} is not a number") from None


def _as_count(key: str, raw: str) -> int:
    value = _as_float(key, raw)
    if value < 1:
        raise ParameterError(f"{key} = {raw!r} must be >= 1")
    return int(value)


def _as_int(key: str, raw: str) -> int:
    try:
        return int(raw, 0)
    except ValueError:
        raise ParameterError(f"{key} = {raw!r} is not an integer") from None


def _as_bool(key: str, raw: str) -> bool:
    lowered = str(raw).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"{key} = {raw!r} is not a boolean")


def _as_opt_float(key: str, raw: str):
    if str(raw).strip().lower() == "opt":
        return None
    return _as_float(key, raw)


def _load_config(path: str) -> dict:
    """Flat `key = value` file; `#` starts a comment; keys match flag names."""
    entries = {}
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path!r}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParameterError(f"{path}:{lineno}: expected `key = value`")
        key, value = (part.strip() for part in body.split("=", 1))
        entries[key.replace("-", "_")] = value
    return entries


def _effective(args: argparse.Namespace, keys: tuple) -> dict:
    """Merge defaults, config file and flags; flags win."""
    raw = dict(vars(args))
    command = raw.pop("command")
    config = _load_config(raw["config"]) if raw.get("config") else {}
    for key in config:
        if key not in keys:
            raise ParameterError(f"unknown config key {key!r} for {command}")
    merged = {}
    for key in keys:
        value = raw.get(key)
        if value is None:
            value = config.get(key)
        if value is None:
            value = _COMMAND_DEFAULTS.get(command, {}).get(key, _DEFAULTS[key])
        merged[key] = value
    return merged


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return "%.17g" % value
    return str(value)


def _header_lines(command: str, shown: dict) -> list:
    lines = [f"# sixstate {__version__}", f"# command = {command}"]
    lines += [f"# {key} = {_fmt(value)}" for key, value in sorted(shown.items())
              if value is not None]
    return lines


def _emit_rows(command: str, shown: dict, rows: list, fmt: str,
               columns: list, out) -> None:
    if fmt == "json":
        payload = {
            "tool": {"name": "sixstate", "version": __version__,
                     "command": command},
            "config": {k: v for k, v in sorted(shown.items()) if v is not None},
            "columns": columns,
            "rows": [{col: row.get(col) for col in columns} for row in rows],
        }
        print(json.dumps(payload, indent=2, sort_keys=True), file=out)
        return
    for line in _header_lines(command, shown):
        print(line, file=out)
    print(",".join(columns), file=out)
    for row in rows:
        print(",".join(_fmt(row.get(col)) for col in columns), file=out)


def _setup_for(opts: dict, brightness: float) -> SetupParams:
    eta_bob = opts["eta_d_bob"]
    return SetupParams(
        brightness=brightness,
        distance_km=_as_float("L", opts["L"]),
        attenuation_db_per_km=_as_float("alpha", opts["alpha"]),
        eta_det_alice=_as_float("eta_d", opts["eta_d"]),
        eta_det_bob=_as_float("eta_d_bob", eta_bob) if eta_bob is not None
        else _as_float("eta_d", opts["eta_d"]),
        misalignment=_as_float("eta_m", opts["eta_m"]),
    )


def _finite_row(opts: dict, n_source: int) -> dict:
    """Optimize the finite key length and lay the result out as one row."""
    fixed_lambda = _as_opt_float("lambda", opts["lambda"])
    fixed_px = _as_opt_float("px", opts["px"])
    setup = _setup_for(opts, fixed_lambda if fixed_lambda is not None else 1.0)
    space = SearchSpace.pinned(brightness=fixed_lambda, p_x=fixed_px)
    best = optimize_key_length(
        setup, _as_float("eps", opts["eps"]), _as_float("eps_ec", opts["eps_ec"]),
        n_source, _as_float("fec", opts["fec"]), space=space,
        strict_pe=_as_bool("strict_pe", opts["strict_pe"]))
    row = {"L_km": _as_float("L", opts["L"]), "N_source": n_source}
    if not best.feasible:
        return row
    params = best.best_params
    at_best = replace(setup, brightness=params.brightness)
    row.update({
        "lambda_opt": params.brightness, "p_x_opt": params.p_x,
        "eps_bar": params.eps_bar, "eps_pe": params.eps_pe,
        "eps_pa": params.eps_pa,
        "e_pdc": expected_qber(at_best), "p11": coincidence_probability(at_best),
        "key_bits": best.best_value, "rate": best.best_value / n_source,
    })
    return row


def _asymptotic_row(opts: dict) -> dict:
    fixed_lambda = _as_opt_float("lambda", opts["lambda"])
    setup = _setup_for(opts, fixed_lambda if fixed_lambda is not None else 1.0)
    row = {"L_km": _as_float("L", opts["L"]), "N_source": math.inf}
    if fixed_lambda is not None:
        rate = asymptotic_rate(setup)
        row.update({"lambda_opt": fixed_lambda,
                    "e_pdc": expected_qber(setup),
                    "p11": coincidence_probability(setup),
                    "rate": rate if rate > 0.0 else None})
        return row
    try:
        lam, rate = optimize_asymptotic(setup)
    except InfeasibleError:
        return row
    at_best = replace(setup, brightness=lam)
    row.update({"lambda_opt": lam, "e_pdc": expected_qber(at_best),
                "p11": coincidence_probability(at_best), "rate": rate})
    return row


def cmd_rate(opts: dict) -> int:
    if opts["N"] is None:
        raise ParameterError("rate requires --N (emitted pulses)")
    row = _finite_row(opts, _as_count("N", opts["N"]))
    _emit_rows("rate", opts, [row], opts["format"], COLUMNS, sys.stdout)
    return 0 if row.get("rate") is not None else 2


def cmd_asymptotic(opts: dict) -> int:
    row = _asymptotic_row(opts)
    _emit_rows("asymptotic", opts, [row], opts["format"], COLUMNS, sys.stdout)
    return 0 if row.get("rate") is not None else 2


def cmd_min_pulses(opts: dict) -> int:
    fixed_lambda = _as_opt_float("lambda", opts["lambda"])
    fixed_px = _as_opt_float("px", opts["px"])
    setup = _setup_for(opts, fixed_lambda if fixed_lambda is not None else 1.0)
    space = SearchSpace.pinned(brightness=fixed_lambda, p_x=fixed_px)
    budget = SecurityBudget.even_split(_as_float("eps", opts["eps"]),
                                       _as_float("eps_ec", opts["eps_ec"]))
    n_min = min_pulses_for_key(
        setup, budget, _as_float("fec", opts["fec"]),
        target_bits=_as_int("target_bits", opts["target_bits"]), space=space,
        strict_pe=_as_bool("strict_pe", opts["strict_pe"]))
    row = _finite_row(opts, n_min)
    _emit_rows("min-pulses", opts, [row], opts["format"], COLUMNS, sys.stdout)
    return 0


def cmd_threshold(opts: dict) -> int:
    value = qber_threshold()
    if opts["format"] == "json":
        print(json.dumps({"qber_threshold": value}, indent=2, sort_keys=True))
    else:
        print(_fmt(value))
    return 0


def cmd_simulate(opts: dict) -> int:
    fixed_lambda = _as_opt_float("lambda", opts["lambda"])
    fixed_px = _as_opt_float("px", opts["px"])
    if fixed_lambda is None:
        raise ParameterError("simulate requires a numeric --lambda")
    if fixed_px is None:
        raise ParameterError("simulate requires a numeric --px")
    if opts["pulses"] is None:
        raise ParameterError("simulate requires --pulses")
    if opts["seed"] is None:
        raise ParameterError("simulate requires --seed")
    seed = _as_int("seed", opts["seed"])
    if not 0 <= seed < 2**64:
        raise ParameterError(f"seed = {seed} outside [0, 2^64)")
    setup = _setup_for(opts, fixed_lambda)
    sifting = SiftingProbabilities(fixed_px)
    tally = simulate(setup, sifting, _as_count("pulses", opts["pulses"]), seed)

    p11_model = coincidence_probability(setup)
    qber_model = expected_qber(setup)
    sifted_total = tally.sifted_total
    report = {
        "tool": {"name": "sixstate", "version": __version__,
                 "command": "simulate"},
        "config": {k: v for k, v in sorted(opts.items()) if v is not None},
        "tally": {
            "n_pulses": tally.n_pulses,
            "seed": tally.seed,
            "p_x": tally.p_x,
            "coincidences": tally.coincidences,
            "sifted": tally.sifted,
            "errors": tally.errors,
            "basis_counts_alice": tally.basis_counts_alice,
            "basis_counts_bob": tally.basis_counts_bob,
            "coincidences_by_pair_number":
                {str(k): v for k, v in tally.coincidences_by_pair_number.items()},
        },
        "analytic": {"p11": p11_model, "e_pdc": qber_model},
        "empirical": {
            "p11": tally.coincidences / tally.n_pulses,
            "qber_pooled": (tally.errors_total / sifted_total
                            if sifted_total else None),
            "qber_by_basis": {
                basis: (tally.errors[basis] / tally.sifted[basis]
                        if tally.sifted[basis] else None)
                for basis in tally.sifted
            },
        },
        "zscores": {"p11": zscore_p11(tally, p11_model),
                    "qber_pooled": zscore_qber(tally, qber_model)},
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _sweep_values(opts: dict) -> list:
    if opts["values"] is not None:
        values = [_as_float("values", part)
                  for part in str(opts["values"]).split(",") if part.strip()]
    else:
        if opts["start"] is None or opts["stop"] is None or opts["count"] is None:
            raise ParameterError("sweep requires --values or --start/--stop/--count")
        start = _as_float("start", opts["start"])
        stop = _as_float("stop", opts["stop"])
        count = _as_count("count", opts["count"])
        scale = str(opts["scale"]).lower()
        if scale == "linear":
            values = [float(v) for v in np.linspace(start, stop, count)]
        elif scale == "log":
            if start <= 0 or stop <= 0:
                raise ParameterError("log scale requires positive start/stop")
            values = [float(v) for v in np.geomspace(start, stop, count)]
        else:
            raise ParameterError(f"scale = {scale!r} is neither linear nor log")
    if not values:
        raise ParameterError("sweep has no values")
    diffs = [b - a for a, b in zip(values, values[1:])]
    if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
        raise ParameterError("sweep values must be strictly monotone")
    return values


def _sweep_task(opts: dict, variable: str, value: float, do_asymptotic: bool,
                n_source) -> dict:
    point = dict(opts)
    if variable == "L":
        point["L"] = repr(value)
    elif variable == "N_source":
        point["N"] = repr(value)
    else:
        point["lambda"] = repr(value)
    try:
        if do_asymptotic:
            row = _asymptotic_row(point)
        else:
            source = _as_count("N", point["N"]) if variable == "N_source" \
                else n_source
            row = _finite_row(point, source)
    except (InfeasibleError, ZeroDivisionError):
        row = {"L_km": _as_float("L", point["L"]),
               "N_source": None if do_asymptotic else n_source}
    if variable == "lambda" and row.get("lambda_opt") is None:
        row["lambda_opt"] = value
    if variable == "N_source":
        row["N_source"] = _as_count("N", point["N"])
    return row


def cmd_sweep(opts: dict) -> int:
    aliases = {"L": "L", "N": "N_source", "N_source": "N_source",
               "lambda": "lambda"}
    if opts["var"] not in aliases:
        raise ParameterError(
            f"var = {opts['var']!r}; expected one of L, N_source, lambda")
    variable = aliases[opts["var"]]
    do_asymptotic = _as_bool("asymptotic", opts["asymptotic"])
    if variable == "N_source" and do_asymptotic:
        raise ParameterError("an N_source sweep cannot be asymptotic")
    values = _sweep_values(opts)
    jobs = max(1, _as_int("jobs", opts["jobs"]))

    n_source = None
    if not do_asymptotic:
        if variable != "N_source" and opts["N"] is None:
            raise ParameterError("finite sweep requires --N (or --asymptotic)")
        if variable != "N_source":
            n_source = _as_count("N", opts["N"])

    columns = COLUMNS
    if opts["columns"] is not None:
        columns = [name.strip() for name in str(opts["columns"]).split(",")]
        unknown = [name for name in columns if name not in COLUMNS]
        if unknown:
            raise ParameterError(f"unknown columns: {', '.join(unknown)}")

    def run(value: float) -> dict:
        return _sweep_task(opts, variable, value, do_asymptotic, n_source)

    if jobs == 1:
        rows = [run(value) for value in values]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, values))

    _emit_rows("sweep", opts, rows, opts["format"], columns, sys.stdout)
    if opts["plot"] is not None:
        from .plots import render_sweep_figure
        render_sweep_figure(
            rows, variable, opts["plot"],
            threshold=qber_threshold() if variable == "lambda" else None)
    return 0


def _add_common(parser: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "L": ("--L", "total distance in km"),
        "alpha": ("--alpha", "fiber attenuation in dB/km"),
        "eta_d": ("--eta-d", "detector efficiency (both sides unless --eta-d-bob)"),
        "eta_d_bob": ("--eta-d-bob", "detector efficiency on the second side"),
        "eta_m": ("--eta-m", "misalignment probability in [0, 0.5]"),
        "lambda": ("--lambda", "source brightness, or `opt` to optimize"),
        "px": ("--px", "X/Y basis probability in (0, 1/3), or `opt`"),
        "N": ("--N", "emitted pulses (scientific notation accepted)"),
        "eps": ("--eps", "total security failure probability"),
        "eps_ec": ("--eps-ec", "error-verification failure probability"),
        "fec": ("--fec", "error-correction inefficiency, >= 1"),
        "strict_pe": ("--strict-pe", "charge the PE failure budget once per basis"),
        "target_bits": ("--target-bits", "key bits the pulse search must reach"),
        "pulses": ("--pulses", "pulses to simulate"),
        "seed": ("--seed", "64-bit RNG seed"),
        "var": ("--var", "sweep variable: L, N_source or lambda"),
        "values": ("--values", "comma-separated sweep values"),
        "start": ("--start", "sweep range start"),
        "stop": ("--stop", "sweep range stop"),
        "count": ("--count", "number of sweep points"),
        "scale": ("--scale", "sweep spacing: linear or log"),
        "asymptotic": ("--asymptotic", "sweep the asymptotic rate (no --N)"),
        "columns": ("--columns", "comma-separated output column subset"),
        "plot": ("--plot", "also render a figure to this file"),
        "jobs": ("--jobs", "concurrent sweep evaluations"),
        "format": ("--format", "output format: csv or json"),
        "config": ("--config", "flat key = value config file"),
    }
    for name in names:
        flag, help_text = flags[name]
        if name in ("strict_pe", "asymptotic"):
            parser.add_argument(flag, action="store_const", const="true",
                                default=None, help=help_text)
        elif name == "format":
            parser.add_argument(flag, choices=("csv", "json"), default=None,
                                help=help_text)
        else:
            parser.add_argument(flag, default=None, help=help_text)


_SETUP = ("L", "alpha", "eta_d", "eta_d_bob", "eta_m")
_SECURITY = ("eps", "eps_ec", "fec", "strict_pe")

_COMMAND_KEYS = {
    "rate": _SETUP + _SECURITY + ("lambda", "px", "N", "format", "config"),
    "asymptotic": _SETUP + ("lambda", "format", "config"),
    "sweep": _SETUP + _SECURITY + ("lambda", "px", "N", "var", "values",
                                   "start", "stop", "count", "scale",
                                   "asymptotic", "columns", "plot", "jobs",
                                   "format", "config"),
    "min-pulses": _SETUP + _SECURITY + ("lambda", "px", "target_bits",
                                        "format", "config"),
    "simulate": _SETUP + ("lambda", "px", "pulses", "seed", "config"),
    "threshold": ("format", "config"),
}

_HANDLERS = {
    "rate": cmd_rate,
    "asymptotic": cmd_asymptotic,
    "sweep": cmd_sweep,
    "min-pulses": cmd_min_pulses,
    "simulate": cmd_simulate,
    "threshold": cmd_threshold,
}

_DESCRIPTIONS = {
    "rate": "optimized finite secret-key rate at a fixed pulse budget",
    "asymptotic": "asymptotic secret-key rate, optionally optimized over brightness",
    "sweep": "evaluate rates over a range of one variable, CSV/JSON out",
    "min-pulses": "smallest pulse budget that yields the target key bits",
    "simulate": "Monte Carlo run of the protocol with a model comparison",
    "threshold": "largest QBER the protocol tolerates",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sixstate",
                     description="Six-state protocol secret-key rates for a "
                                 "midpoint down-conversion source")
    parser.add_argument("--version", action="version",
                        version=f"sixstate {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, keys in _COMMAND_KEYS.items():
        sub = subparsers.add_parser(command, help=_DESCRIPTIONS[command],
                                    description=_DESCRIPTIONS[command])
        _add_common(sub, *keys)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _effective(args, _COMMAND_KEYS[args.command])
        return _HANDLERS[args.command](opts)
    except (ParameterError, ConvergenceError) as exc:
        print(f"sixstate: error: {exc}", file=sys.stderr)
        return 1
    except (InfeasibleError, ZeroDivisionError) as exc:
        print(f"sixstate: infeasible: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
