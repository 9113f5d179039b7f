"""Command-line entry point: table reproduction, bound evaluation, simulation, verification.

Every command first builds and validates all of its inputs, then runs.  A
rejected input produces a JSON error naming the field and exit status 2; a
verification that runs but fails exits with status 1.  Outputs carry the
merged configuration and the package version.

Configuration precedence is defaults < ``--config`` file < explicit flags.
The file holds ``key = value`` lines; keys are flag names with or without
leading dashes.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._errors import ConfigError, DomainError, NumericError, RangeError
from .bounds import (
    PRINTED_TABLE2,
    PRINTED_TABLE3,
    DiminishingSchedule,
    DriftCertificate,
    GrowthCertificate,
    TailLowerBound,
    adapt_upper_bound,
    log_table1_envelope,
    mhi_constants,
    mhi_lower_bound,
    mhi_upper_bound,
    rwm_lower_rate,
    table3_delta,
    tv_lower_bound,
    ula_lower_rate,
    weak_lower_rate,
)
from .oracle import (
    GridConfig,
    VerificationReport,
    _jsonable,
    calibrate_growth,
    measure_diminishing,
    tv_trace,
    verify_drift_and_contraction,
    verify_growth,
    verify_stationarity,
)
from .rates import ConstantRate, LogRate, PowerRate, parse_rate
from .samplers import (
    FixedPlan,
    IndependenceMH,
    RandomWalkMetropolis,
    SampleCovariancePlan,
    SchedulePlan,
    StochasticApproxPlan,
    UnadjustedLangevin,
    run_adaptive,
    write_manifest,
)

# schedule parameter used for each decay kind when reproducing the envelope table
TABLE1_SCHEDULES = {"exp_linear": 1.0, "exp_power": 0.5, "polynomial": 2.0}
TABLE1_RATES = ("power", "log")


# -- value parsers ----------------------------------------------------------------


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _pairs(text):
    if isinstance(text, (list, tuple)):
        return [tuple(map(float, p)) for p in text]
    out = []
    for chunk in str(text).split(","):
        a, b = chunk.split(":")
        out.append((float(a), float(b)))
    return out


def _schedule(text, s_eps=0):
    kind, _, a = str(text).partition(":")
    return DiminishingSchedule(kind, float(a) if a else 1.0, int(s_eps))


@contextlib.contextmanager
def _field(name):
    """Re-raise any validation failure inside the block as a ConfigError on ``name``."""
    try:
        yield
    except ConfigError as exc:
        raise ConfigError(str(exc), field=exc.field or name) from exc
    except (DomainError, RangeError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{name}: {exc}", field=name) from exc


def _positive_ints(values, name):
    with _field(name):
        out = [int(v) for v in values]
        if any(v < 1 or v != float(w) for v, w in zip(out, values)):
            raise ConfigError(f"{name} must hold positive integers", field=name)
    return out


# -- option tables ----------------------------------------------------------------

COMMON = {
    "seed": (int, None, "master seed (falls back to SUBGEO_SEED, then 0)"),
    "out": (str, None, "output path (stdout when omitted)"),
    "format": (str, "csv", "csv or json"),
    "grid_nodes": (int, 2**14, "quadrature nodes for the exact oracle"),
    "x_max": (float, 28.0, "truncation point of the oracle grid"),
}

T_DECADES = "1000,10000,100000,1000000"

OPTIONS = {
    "table1": {
        "c": (float, 1.0, "rate scale"),
        "beta": (float, 0.5, "rate exponent"),
        "K": (float, 1.0, "drift constant"),
        "delta": (float, 0.5, "drift split"),
        "contraction_alpha": (float, 0.5, "contraction constant"),
        "eps": (float, 0.1, "failure allowance"),
        "t_min": (float, 1e3, "start of the log grid"),
        "t_max": (float, 1e6, "end of the log grid"),
        "n_t": (int, 61, "number of grid points"),
    },
    "table2": {
        "gamma_pairs": (str, "3:5,4:6,8:10", "comma list of gamma_*:gamma^*"),
        "t_list": (str, T_DECADES, "comma list of times"),
    },
    "table3": {
        "gamma_pairs": (str, "1.2:1.5,1.2:1.6,1.2:1.7", "comma list of gamma_*:gamma^*"),
        "t_list": (str, T_DECADES, "comma list of times"),
        "eps": (float, 0.01, "drift exponent loss"),
        "s_delta": (int, 0, "onset time of the decay"),
        "r": (float, 1.0, "radius outside which adaptation is frozen"),
        "G": (str, "exp_linear:1", "decay kind:a"),
    },
    "bounds.thm31": {
        "C": (float, 1.0, "tail constant"),
        "kappa": (float, 1.0, "tail exponent"),
        "alpha": (float, 2.0, "growth exponent"),
        "phi": (str, "power:1:0.5", "rate function kind:args"),
        "w0": (float, 1.0, "H anchor"),
        "t": (str, "8", "comma list of times"),
    },
    "bounds.thm44": {
        "phi": (str, "power:1:0.5", "rate function kind:args"),
        "K": (float, 1.0, "drift constant"),
        "contraction_alpha": (float, 0.5, "contraction constant"),
        "delta": (float, 0.5, "drift split"),
        "V_x0": (float, 1.0, "V at the start"),
        "pi_V": (float, 1.0, "target mean of V"),
        "G": (str, "exp_linear:1", "decay kind:a"),
        "s_eps": (int, 0, "onset time of the decay"),
        "eps": (float, 0.1, "failure allowance"),
        "t": (str, T_DECADES, "comma list of times"),
    },
    "bounds.prop51": {
        "gamma_star": (float, 3.0, "lower proposal rate"),
        "gamma_upper": (float, 5.0, "upper proposal rate"),
        "x0": (float, 0.0, "start"),
        "t": (str, T_DECADES, "comma list of times"),
    },
    "bounds.prop52": {
        "gamma_star": (float, 1.2, "lower proposal rate"),
        "gamma_upper": (float, 1.5, "upper proposal rate"),
        "eps": (float, 0.01, "drift exponent loss"),
        "delta": (float, None, "drift split (default: the time-dependent choice)"),
        "G": (str, "exp_linear:1", "decay kind:a"),
        "s_delta": (int, 0, "onset time of the decay"),
        "r": (float, 1.0, "radius outside which adaptation is frozen"),
        "t": (str, T_DECADES, "comma list of times"),
    },
    "bounds.ula": {
        "v": (float, 3.0, "Student-t degrees of freedom"),
        "d": (int, 2, "dimension"),
        "M": (float, 1.0, "leading constant"),
        "t": (str, T_DECADES, "comma list of times"),
    },
    "bounds.rwm": {
        "m": (float, 0.5, "Weibull tail exponent"),
        "M_star": (float, 1.0, "leading constant"),
        "c_star": (float, 1.0, "rate constant"),
        "t": (str, T_DECADES, "comma list of times"),
    },
}
OPTIONS["bounds.thm32"] = {**OPTIONS["bounds.thm31"], "eps": (float, 0.1, "Wasserstein radius")}

FAMILY_OPTIONS = {
    "mhi": {
        "gamma_star": (float, 3.0, "lower proposal rate"),
        "gamma_upper": (float, 5.0, "upper proposal rate"),
    },
    "ula": {
        "v": (float, 3.0, "Student-t degrees of freedom"),
        "d": (int, 2, "dimension"),
        "step_lo": (float, 0.1, "smallest step size"),
        "step_hi": (float, 0.9, "largest step size"),
    },
    "rwm": {
        "m": (float, 0.5, "Weibull tail exponent"),
        "d": (int, 1, "dimension"),
        "lambda_star": (float, 0.5, "smallest covariance eigenvalue"),
        "lambda_upper": (float, 2.0, "largest covariance eigenvalue"),
        "proposal_radius": (float, 2.0, "proposal truncation radius"),
    },
}

SIM_OPTIONS = {
    "plan": (str, None, "fixed:g | alternate:a,b,... | sa[:h0[:power]] | cov[:h]"),
    "t": (int, 100, "number of steps"),
    "chains": (int, 1, "number of chains"),
    "x0": (str, "0", "start (comma list for vectors)"),
    "oracle": (bool, False, "report exact TV and the lower bound (mhi, deterministic plans)"),
}
for fam, opts in FAMILY_OPTIONS.items():
    OPTIONS[f"simulate.{fam}"] = {**opts, **SIM_OPTIONS}

VERIFY_FAMILY = {"family": (str, "mhi", "mhi, ula or rwm")}
OPTIONS["verify.growth"] = {
    **VERIFY_FAMILY,
    "gamma_star": (float, 3.0, "mhi: lower proposal rate"),
    "gamma_upper": (float, 5.0, "mhi: upper proposal rate"),
    "alpha": (float, None, "growth exponent (mhi default gamma_*, ula 1, rwm 1)"),
    "x_grid": (str, None, "comma list of states (family default)"),
    "gammas": (str, None, "comma list of parameters (family default)"),
    "n": (int, 100_000, "Monte Carlo draws per grid point"),
    "compact_radius": (float, 1.0, "rwm: radius of the set carrying the slack"),
    **{k: v for f in ("ula", "rwm") for k, v in FAMILY_OPTIONS[f].items() if k not in ("d",)},
    "d": (int, None, "dimension (ula 2, rwm 1)"),
}
OPTIONS["verify.drift"] = {
    "family": (str, "mhi", "mhi or rwm"),
    "gamma_star": (float, 1.2, "mhi: lower proposal rate"),
    "gamma_upper": (float, 1.5, "mhi: upper proposal rate"),
    "eps": (float, 0.01, "drift exponent loss"),
    "x_grid": (str, None, "comma list of states (family default)"),
    "gammas": (str, None, "comma list of parameters (family default)"),
    "n": (int, 20_000, "Monte Carlo draws per pair"),
    "pairs": (int, 20, "rwm: random pairs per parameter"),
    **FAMILY_OPTIONS["rwm"],
}
OPTIONS["verify.diminishing"] = {
    "family": (str, "mhi", "mhi or rwm"),
    "gamma_star": (float, 1.2, "mhi: lower proposal rate"),
    "gamma_upper": (float, 1.5, "mhi: upper proposal rate"),
    "radius": (float, 1.0, "states checked lie in [0, radius]"),
    "pairs": (int, 50, "random parameter pairs"),
    "n": (int, 20_000, "rwm: Monte Carlo draws"),
    **FAMILY_OPTIONS["rwm"],
}
OPTIONS["verify.stationarity"] = {
    "gammas": (str, "3,4,5", "comma list of parameters"),
    "tol": (float, 1e-6, "largest admissible L1 move"),
}
OPTIONS["verify.mhi-all"] = {
    "growth_pair": (str, "3:5", "gamma_*:gamma^* for the growth check"),
    "alpha": (float, None, "growth exponent (default gamma_*)"),
    "growth_gammas": (str, None, "parameters for the growth check (default: interior points)"),
    "drift_pair": (str, "1.2:1.5", "gamma_*:gamma^* for drift, contraction and diminishing"),
    "eps": (float, 0.01, "drift exponent loss"),
    "pairs": (int, 50, "random parameter pairs for diminishing"),
}

SUBCOMMANDS = {
    "bounds": ("thm31", "thm32", "thm44", "prop51", "prop52", "ula", "rwm"),
    "simulate": ("mhi", "ula", "rwm"),
    "verify": ("growth", "drift", "diminishing", "stationarity", "mhi-all"),
}


def _add_options(parser, table):
    for dest, (typ, _default, help_text) in table.items():
        flag = "--" + dest.replace("_", "-")
        if typ is bool:
            parser.add_argument(flag, dest=dest, action="store_true", default=argparse.SUPPRESS, help=help_text)
        else:
            parser.add_argument(flag, dest=dest, type=typ, default=argparse.SUPPRESS, help=help_text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _add_options(common, COMMON)
    common.add_argument("--config", dest="config", default=argparse.SUPPRESS, help="key=value file")

    parser = argparse.ArgumentParser(prog="subgeo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("table1", "table2", "table3"):
        p = sub.add_parser(name, parents=[common])
        _add_options(p, OPTIONS[name])
    for group, names in SUBCOMMANDS.items():
        g = sub.add_parser(group)
        gsub = g.add_subparsers(dest="target", required=True)
        for n in names:
            p = gsub.add_parser(n, parents=[common])
            _add_options(p, OPTIONS[f"{group}.{n}"])
    return parser


def _read_config_file(path, table):
    out = {}
    with _field("config"):
        with open(path) as fh:
            lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value", field="config")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in table:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}", field=key)
        typ = table[key][0]
        with _field(key):
            if typ is bool:
                if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                    raise ConfigError(f"not a boolean: {value!r}", field=key)
                out[key] = value.lower() in ("1", "true", "yes")
            else:
                out[key] = typ(value)
    return out


def resolve_config(ns):
    """Merge defaults, the optional config file and explicit flags into one flat dict."""
    given = dict(vars(ns))
    command = given.pop("command")
    target = given.pop("target", None)
    key = command if target is None else f"{command}.{target}"
    table = {**COMMON, **OPTIONS[key]}
    cfg = {k: v[1] for k, v in table.items()}
    path = given.pop("config", None)
    if path is not None:
        cfg.update(_read_config_file(path, table))
    cfg.update(given)
    if cfg["seed"] is None:
        env = os.environ.get("SUBGEO_SEED")
        with _field("seed"):
            cfg["seed"] = int(env) if env is not None else 0
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json; got {cfg['format']!r}", field="format")
    with _field("grid_nodes"):
        GridConfig(cfg["x_max"], cfg["grid_nodes"])
    cfg["command"] = key
    return cfg


# -- output ---------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_cell(x) for x in np.ravel(np.asarray(v, dtype=float)))
    return v


def render(result, fmt):
    """Serialize a result dict; CSV gets ``# key=json`` header lines before the rows."""
    if fmt == "json":
        return json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    for k in sorted(result):
        if k != "rows":
            buf.write(f"# {k}={json.dumps(_jsonable(result[k]), sort_keys=True)}\n")
    rows = result.get("rows", [])
    keys = list(dict.fromkeys(k for r in rows for k in r))
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _cell(r.get(k, "")) for k in keys})
    return buf.getvalue()


def _result(cfg, rows, **extra):
    return {"command": cfg["command"], "version": __version__, "config": cfg, "rows": rows, **extra}


# -- tables -----------------------------------------------------------------------


def _decimals(printed):
    text = repr(float(printed))
    return len(text.split(".")[1]) if "." in text and "e" not in text else 4


def cmd_table1(cfg):
    with _field("t_min"):
        if not 1 < cfg["t_min"] < cfg["t_max"]:
            raise ConfigError("need 1 < t_min < t_max", field="t_min")
    rates = {}
    with _field("c"):
        rates["power"] = PowerRate(cfg["c"], cfg["beta"])
        rates["log"] = LogRate(cfg["c"], cfg["beta"])
    certs = {}
    for kind, phi in rates.items():
        with _field("K"):
            certs[kind] = DriftCertificate(phi, cfg["K"], cfg["contraction_alpha"], cfg["delta"])
    scheds = {k: DiminishingSchedule(k, a) for k, a in TABLE1_SCHEDULES.items()}
    with _field("eps"):
        if not 0 < cfg["eps"] < 1:
            raise ConfigError("eps must lie in (0, 1)", field="eps")
    grid = np.logspace(math.log10(cfg["t_min"]), math.log10(cfg["t_max"]), cfg["n_t"])
    last_decade = cfg["t_max"] / 10
    rows, variation = [], {}
    for gk, sched in scheds.items():
        for pk in TABLE1_RATES:
            params = {"c": cfg["c"], "beta": cfg["beta"], "a": sched.a}
            ratios = []
            for t in grid:
                value, T, consts = adapt_upper_bound(certs[pk], sched, cfg["eps"], float(t), clamp=False)
                log_env = log_table1_envelope(gk, pk, params, float(t))
                log_ratio = consts["log_vanishing"] - log_env
                rows.append({
                    "G": gk, "phi": pk, "t": float(t), "bound": value, "T_eps_t": T,
                    "log_vanishing": consts["log_vanishing"], "log_envelope": log_env,
                    "log_ratio": log_ratio,
                })
                if t >= last_decade * (1 - 1e-12):
                    ratios.append(log_ratio)
            gap = max(ratios) - min(ratios) if ratios else float("nan")
            spread = math.expm1(gap) if gap < 700 else float("inf")
            variation[f"{gk}/{pk}"] = spread
    return _result(cfg, rows, final_decade_variation=variation, schedules=TABLE1_SCHEDULES)


def cmd_table2(cfg):
    with _field("gamma_pairs"):
        pairs = _pairs(cfg["gamma_pairs"])
        for gs, gu in pairs:
            if not 1 < gs < gu:
                raise ConfigError(f"need 1 < gamma_* < gamma^*; got ({gs}, {gu})", field="gamma_pairs")
    with _field("t_list"):
        ts = _floats(cfg["t_list"])
        if any(t < 0 for t in ts):
            raise ConfigError("times must be nonnegative", field="t_list")
    rows = []
    for gs, gu in pairs:
        printed_row = PRINTED_TABLE2.get((gs, gu), {})
        for t in ts:
            value = mhi_lower_bound(gs, gu, 0.0, t)
            printed = printed_row.get(int(t)) if float(t).is_integer() else None
            row = {"gamma_star": gs, "gamma_upper": gu, "t": t, "computed": value}
            if printed is not None:
                k = _decimals(printed)
                row.update(printed=printed, display=f"{value:.{k}f}", within_last_digit=abs(value - printed) <= 10.0**-k)
            rows.append(row)
    return _result(cfg, rows)


def cmd_table3(cfg):
    with _field("gamma_pairs"):
        pairs = _pairs(cfg["gamma_pairs"])
        for gs, gu in pairs:
            if not 1 < gs < gu < 2 - cfg["eps"]:
                raise ConfigError(f"need 1 < gamma_* < gamma^* < 2 - eps; got ({gs}, {gu})", field="gamma_pairs")
    with _field("t_list"):
        ts = _positive_ints(_floats(cfg["t_list"]), "t_list")
    with _field("G"):
        sched = _schedule(cfg["G"], cfg["s_delta"])
    rows = []
    for gs, gu in pairs:
        printed_row = PRINTED_TABLE3.get((gs, gu), {})
        for t in ts:
            delta = table3_delta(gu, cfg["eps"], t)
            value, consts = mhi_upper_bound(gs, gu, cfg["eps"], delta, sched, cfg["r"], t)
            raw = consts["raw"]
            printed = printed_row.get(t)
            rows.append({
                "gamma_star": gs, "gamma_upper": gu, "t": t, "delta": delta, "computed": raw,
                "display": f"{raw:.3e}", "printed": "" if printed is None else printed,
                "ratio": "" if printed is None else raw / printed,
            })
    assumed = {"s_delta": cfg["s_delta"], "r": cfg["r"], "G": cfg["G"],
               "note": "s_delta and r are not fixed by the reference values; the defaults above are used"}
    return _result(cfg, rows, assumed=assumed)


# -- bounds -------------------------------------------------------------------------


def _times(cfg, integer=False):
    with _field("t"):
        ts = _floats(cfg["t"])
        if not ts or any(t < 0 for t in ts):
            raise ConfigError("times must be nonnegative", field="t")
    return _positive_ints(ts, "t") if integer else ts


def _tail_growth(cfg):
    with _field("C"):
        tail = TailLowerBound(cfg["C"], cfg["kappa"])
    with _field("phi"):
        phi = parse_rate(cfg["phi"])
    with _field("alpha"):
        growth = GrowthCertificate(phi, cfg["alpha"], cfg["w0"])
        if not growth.alpha > tail.kappa:
            raise ConfigError("need alpha > kappa", field="alpha")
    return tail, growth


def cmd_bounds(cfg):
    target = cfg["command"].split(".", 1)[1]
    rows, extra = [], {}
    if target == "thm31":
        tail, growth = _tail_growth(cfg)
        for t in _times(cfg):
            rows.append({"t": t, "value": tv_lower_bound(tail, growth, t),
                         "raw": tv_lower_bound(tail, growth, t, clamp=False)})
    elif target == "thm32":
        tail, growth = _tail_growth(cfg)
        with _field("eps"):
            if not 0 < cfg["eps"] < 1:
                raise ConfigError("eps must lie in (0, 1)", field="eps")
        for t in _times(cfg):
            value, valid_from = weak_lower_rate(tail, growth, cfg["eps"], t)
            rows.append({"t": t, "value": value, "valid_from": valid_from})
    elif target == "thm44":
        with _field("phi"):
            phi = parse_rate(cfg["phi"])
        with _field("K"):
            cert = DriftCertificate(phi, cfg["K"], cfg["contraction_alpha"], cfg["delta"], cfg["V_x0"], cfg["pi_V"])
        with _field("G"):
            sched = _schedule(cfg["G"], cfg["s_eps"])
        ts = _times(cfg)
        with _field("eps"):
            adapt_upper_bound(cert, sched, cfg["eps"], max(ts[0], 1))
        with _field("t"):
            if min(ts) < 1:
                raise ConfigError("t must be >= 1", field="t")
        for t in ts:
            value, T, consts = adapt_upper_bound(cert, sched, cfg["eps"], t)
            rows.append({"t": t, "time": T + t, "value": value, **{k: consts[k] for k in ("raw", "T_eps_t", "m_t")}})
            extra["constants"] = {k: v for k, v in consts.items() if k not in ("raw", "clamped", "m_t", "T_eps_t")}
    elif target == "prop51":
        with _field("gamma_star"):
            M, c = mhi_constants(cfg["gamma_star"], cfg["gamma_upper"])
        with _field("x0"):
            if cfg["x0"] < 0:
                raise ConfigError("x0 must be nonnegative", field="x0")
        for t in _times(cfg):
            rows.append({"t": t, "value": mhi_lower_bound(cfg["gamma_star"], cfg["gamma_upper"], cfg["x0"], t)})
        extra["constants"] = {"M_star": M, "c_star": c}
    elif target == "prop52":
        gs, gu, eps = cfg["gamma_star"], cfg["gamma_upper"], cfg["eps"]
        with _field("G"):
            sched = _schedule(cfg["G"], cfg["s_delta"])
        ts = _times(cfg, integer=True)
        with _field("gamma_upper"):
            mhi_upper_bound(gs, gu, eps, 0.5, sched, cfg["r"], 1)
        with _field("delta"):
            if cfg["delta"] is not None and not 0 < cfg["delta"] < 1:
                raise ConfigError("delta must lie in (0, 1)", field="delta")
        for t in ts:
            delta = table3_delta(gu, eps, t) if cfg["delta"] is None else cfg["delta"]
            value, consts = mhi_upper_bound(gs, gu, eps, delta, sched, cfg["r"], t)
            rows.append({"t": t, "delta": delta, "value": value, "raw": consts["raw"],
                         "T_delta_t": consts["T_delta_t"], "m": consts["m"]})
    elif target == "ula":
        with _field("v"):
            ula_lower_rate(cfg["v"], cfg["d"], cfg["M"], 0.0)
        for t in _times(cfg):
            rows.append({"t": t, "value": ula_lower_rate(cfg["v"], cfg["d"], cfg["M"], t)})
        extra["exponent"] = cfg["v"] + cfg["d"] - 2
    elif target == "rwm":
        with _field("m"):
            rwm_lower_rate(cfg["m"], cfg["M_star"], cfg["c_star"], 0.0)
        for t in _times(cfg):
            rows.append({"t": t, "value": rwm_lower_rate(cfg["m"], cfg["M_star"], cfg["c_star"], t)})
        extra["exponent"] = cfg["m"] / (2 - cfg["m"])
    return _result(cfg, rows, **extra)


# -- families and plans ---------------------------------------------------------------


def make_family(name, cfg):
    with _field("family"):
        if name == "mhi":
            with _field("gamma_star"):
                return IndependenceMH(cfg["gamma_star"], cfg["gamma_upper"])
        if name == "ula":
            with _field("v"):
                return UnadjustedLangevin(cfg["v"], cfg.get("d") or 2, (cfg["step_lo"], cfg["step_hi"]))
        if name == "rwm":
            with _field("m"):
                return RandomWalkMetropolis(cfg.get("d") or 1, cfg["m"], cfg["lambda_star"],
                                            cfg["lambda_upper"], cfg["proposal_radius"])
        raise ConfigError(f"unknown family {name!r}", field="family")


def _gamma0(name, family):
    if name == "mhi":
        return family.midpoint
    if name == "ula":
        return 0.5 * (family.step_range[0] + family.step_range[1])
    return float(np.clip(1.0, family.lambda_star, family.lambda_upper)) * np.eye(family.d)


def make_plan(text, name, family):
    """Parse ``fixed:g``, ``alternate:a,b``, ``sa[:h0[:power]]`` or ``cov[:h]``."""
    if not text:
        raise ConfigError("a plan is required", field="plan")
    kind, _, arg = text.partition(":")
    with _field("plan"):
        if kind == "fixed":
            g = float(arg)
            gamma = g * np.eye(family.d) if name == "rwm" else g
            if not family.contains(gamma):
                raise ConfigError(f"fixed parameter {g} is outside the parameter set", field="plan")
            return FixedPlan(gamma)
        if kind in ("alternate", "alt"):
            vals = _floats(arg)
            if name == "rwm":
                raise ConfigError("alternating schedules take scalar parameters", field="plan")
            if not all(family.contains(v) for v in vals):
                raise ConfigError("alternating values must lie in the parameter set", field="plan")
            return SchedulePlan.alternating(*vals)
        if kind == "sa":
            if name != "mhi":
                raise ConfigError("stochastic approximation is available for mhi", field="plan")
            nums = [float(v) for v in arg.split(":") if v] if arg else []
            return StochasticApproxPlan(h0=nums[0] if nums else 0.5, power=nums[1] if len(nums) > 1 else 1.0)
        if kind == "cov":
            if name != "rwm":
                raise ConfigError("covariance adaptation is available for rwm", field="plan")
            return SampleCovariancePlan(float(arg) if arg else 1.0)
    raise ConfigError(f"unknown plan {text!r}", field="plan")


def cmd_simulate(cfg):
    name = cfg["command"].split(".", 1)[1]
    family = make_family(name, cfg)
    plan = make_plan(cfg["plan"], name, family)
    with _field("t"):
        if cfg["t"] < 1 or cfg["chains"] < 1:
            raise ConfigError("t and chains must be positive", field="t" if cfg["t"] < 1 else "chains")
    with _field("x0"):
        x0 = _floats(cfg["x0"])
        x0 = x0[0] if name == "mhi" else np.resize(np.asarray(x0, dtype=float), family.d)
        family.check_state(x0)
    if cfg["oracle"]:
        if name != "mhi" or not isinstance(plan, (FixedPlan, SchedulePlan)):
            raise ConfigError("the exact oracle needs the mhi family and a deterministic plan", field="oracle")
        grid = GridConfig(cfg["x_max"], cfg["grid_nodes"])
        with _field("x0"):
            if not 0 <= x0 <= grid.x_max:
                raise ConfigError("x0 must lie on the oracle grid", field="x0")
        tv = tv_trace(lambda s: plan.next(s, None, None, None), cfg["t"], x0, grid)
        rows = []
        for s in range(1, cfg["t"] + 1):
            lb = mhi_lower_bound(family.gamma_star, family.gamma_upper, x0, s)
            rows.append({"t": s, "tv": float(tv[s]), "lower_bound": lb, "margin": float(tv[s]) - lb})
        passed = all(r["margin"] >= 0 for r in rows)
        return _result(cfg, rows, passed=passed, worst_margin=min(r["margin"] for r in rows))
    trajectories = run_adaptive(family, plan, x0, _gamma0(name, family), cfg["t"], cfg["chains"], cfg["seed"])
    rows = [
        {"chain_id": tr.chain_id, "t": s, "param": np.asarray(p, dtype=float), "state": np.asarray(x, dtype=float)}
        for tr in trajectories
        for s, (p, x) in enumerate(zip(tr.params, tr.states))
    ]
    extra = {"family": family.describe(), "plan": plan.describe(),
             "chain_seeds": [tr.seed for tr in trajectories]}
    ratios = [max(tr.diagnostics.get("adaptation_over_G") or [0.0]) for tr in trajectories]
    if any(tr.diagnostics for tr in trajectories):
        extra["max_adaptation_over_G"] = max(ratios)
    if cfg["out"]:
        write_manifest(cfg["out"] + ".manifest.json", cfg["seed"], _jsonable(cfg), family, plan, __version__)
    return _result(cfg, rows, **extra)


# -- verification ---------------------------------------------------------------------


def _report_rows(reports):
    rows = []
    for rep in reports:
        for r in rep.rows:
            rows.append({"condition": rep.condition, **r})
    return rows


def _verification_result(cfg, reports):
    summary = {rep.condition: {"passed": rep.passed, "worst_margin": rep.worst_margin,
                               "constants": rep.constants, "notes": rep.notes} for rep in reports}
    passed = all(rep.passed for rep in reports)
    return _result(cfg, _report_rows(reports), passed=passed, reports=summary)


def _grid_or(cfg, key, default):
    if cfg.get(key) is None:
        return list(default)
    with _field(key):
        return _floats(cfg[key])


def _mhi_growth_report(family, alpha, gammas):
    _, c_star = mhi_constants(family.gamma_star, family.gamma_upper)
    cert = GrowthCertificate(ConstantRate(c_star), alpha, 1.0)
    return verify_growth(family, cert, np.linspace(0, 50, 200), gammas, method="closed_form")


def _interior(family, k=2):
    lo, hi = family.gamma_star, family.gamma_upper
    return [lo + (hi - lo) * i / k for i in range(1, k + 1)]


def _diminishing_report(family, pairs, seed, radius=1.0, n=20_000):
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rows = []
    xs = np.linspace(0, radius, 21)
    for _ in range(pairs):
        if isinstance(family, IndependenceMH):
            ga, gb = rng.uniform(family.gamma_star, family.gamma_upper, size=2)
            dist = abs(ga - gb)
            sup, J = measure_diminishing(family, ga, gb, xs, radius=radius)
        else:
            la, lb = rng.uniform(family.lambda_star, family.lambda_upper, size=2)
            ga, gb = la * np.eye(family.d), lb * np.eye(family.d)
            dist = float(np.linalg.norm(ga - gb))
            sup, J = measure_diminishing(family, ga, gb, np.linspace(-radius, radius, 5), n=n,
                                         seed=int(rng.integers(2**31)))
        rows.append({"gamma_a": float(np.ravel(ga)[0]), "gamma_b": float(np.ravel(gb)[0]),
                     "sup_tv": sup, "bound": J * dist, "margin": J * dist - sup})
    return rows


def cmd_verify(cfg):
    target = cfg["command"].split(".", 1)[1]
    seed = cfg["seed"]
    if target == "growth":
        name = cfg["family"]
        family = make_family(name, cfg)
        if name == "mhi":
            alpha = cfg["alpha"] if cfg["alpha"] is not None else family.gamma_star
            gammas = _grid_or(cfg, "gammas", [family.midpoint, family.gamma_upper])
            rep = _mhi_growth_report(family, alpha, gammas)
        else:
            alpha = cfg["alpha"] if cfg["alpha"] is not None else 1.0
            if name == "ula":
                xs = _grid_or(cfg, "x_grid", np.linspace(0, 10, 20))
                gammas = _grid_or(cfg, "gammas", [family.step_range[0], 0.5])
            else:
                xs = _grid_or(cfg, "x_grid", np.linspace(0, 30, 20))
                gammas = _grid_or(cfg, "gammas", [family.lambda_star, family.lambda_upper])
            with _field("gammas"):
                for g in gammas:
                    if not family.contains(g * np.eye(family.d) if name == "rwm" else g):
                        raise ConfigError(f"parameter {g} outside the parameter set", field="gammas")
            # constants are fitted on one stream and checked on an independent one
            phi, slack = calibrate_growth(family, alpha, xs, gammas, cfg["n"], seed, cfg["compact_radius"])
            rep = verify_growth(family, GrowthCertificate(phi, alpha), xs, gammas, method="monte_carlo",
                                n=cfg["n"], seed=seed + 1, slack=slack)
        return _verification_result(cfg, [rep])
    if target == "drift":
        name = cfg["family"]
        with _field("family"):
            if name not in ("mhi", "rwm"):
                raise ConfigError("drift verification covers mhi and rwm", field="family")
        family = make_family(name, cfg)
        if name == "mhi":
            with _field("eps"):
                mhi_upper_bound(family.gamma_star, family.gamma_upper, cfg["eps"], 0.5,
                                DiminishingSchedule("exp_linear", 1.0), 1.0, 1)
            xs = _grid_or(cfg, "x_grid", np.linspace(0, 50, 200))
            gammas = _grid_or(cfg, "gammas", [family.gamma_star, family.midpoint, family.gamma_upper])
        else:
            xs = _grid_or(cfg, "x_grid", [])
            gammas = _grid_or(cfg, "gammas", [family.lambda_star, family.lambda_upper])
        drift, contraction = verify_drift_and_contraction(family, xs, gammas, cfg["eps"], cfg["n"], seed,
                                                          pairs=cfg["pairs"])
        return _verification_result(cfg, [r for r in (drift, contraction) if r is not None])
    if target == "diminishing":
        name = cfg["family"]
        with _field("family"):
            if name not in ("mhi", "rwm"):
                raise ConfigError("diminishing verification covers mhi and rwm", field="family")
        family = make_family(name, cfg)
        rows = _diminishing_report(family, cfg["pairs"], seed, cfg["radius"], cfg["n"])
        return _verification_result(cfg, [VerificationReport.from_rows("diminishing", rows, 1e-12)])
    if target == "stationarity":
        gammas = _grid_or(cfg, "gammas", [])
        with _field("gammas"):
            IndependenceMH(min(gammas), max(gammas)) if len(set(gammas)) > 1 else None
            if any(g <= 1 for g in gammas):
                raise ConfigError("proposal rates must exceed 1", field="gammas")
        rep = verify_stationarity(gammas, GridConfig(cfg["x_max"], cfg["grid_nodes"]), cfg["tol"])
        return _verification_result(cfg, [rep])
    if target == "mhi-all":
        with _field("growth_pair"):
            (gs, gu), = _pairs(cfg["growth_pair"])
            gfam = IndependenceMH(gs, gu)
        with _field("drift_pair"):
            (ds, du), = _pairs(cfg["drift_pair"])
            dfam = IndependenceMH(ds, du)
            mhi_upper_bound(ds, du, cfg["eps"], 0.5, DiminishingSchedule("exp_linear", 1.0), 1.0, 1)
        alpha = cfg["alpha"] if cfg["alpha"] is not None else gs
        gammas = _grid_or(cfg, "growth_gammas", _interior(gfam))
        growth = _mhi_growth_report(gfam, alpha, gammas)
        drift, contraction = verify_drift_and_contraction(
            dfam, np.linspace(0, 50, 200), [ds, dfam.midpoint, du], cfg["eps"]
        )
        dim = VerificationReport.from_rows("diminishing", _diminishing_report(dfam, cfg["pairs"], seed), 1e-12)
        return _verification_result(cfg, [growth, drift, contraction, dim])
    raise ConfigError(f"unknown verify target {target!r}", field="command")


DISPATCH = {"table1": cmd_table1, "table2": cmd_table2, "table3": cmd_table3,
            "bounds": cmd_bounds, "simulate": cmd_simulate, "verify": cmd_verify}


def run(argv=None):
    """Validate the arguments, then execute; returns ``(exit_status, result_or_error_dict)``."""
    ns = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(ns)
        result = DISPATCH[cfg["command"].split(".", 1)[0]](cfg)
    except ConfigError as exc:
        return 2, {"status": "error", "error": "ConfigError", "field": exc.field, "message": str(exc)}
    except (DomainError, RangeError, NumericError) as exc:
        return 2, {"status": "error", "error": type(exc).__name__, "field": None, "message": str(exc)}
    except Exception as exc:  # still report machine-readably
        return 3, {"status": "error", "error": type(exc).__name__, "field": None, "message": str(exc)}
    status = 0 if result.get("passed", True) else 1
    return status, result


def main(argv=None):
    status, result = run(argv)
    if result.get("status") == "error":
        sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
        return status
    text = render(result, result["config"]["format"])
    out = result["config"]["out"]
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status:
        failed = sorted(k for k, v in result.get("reports", {}).items() if not v["passed"]) or [result["command"]]
        sys.stderr.write(json.dumps({"status": "failed", "failed": failed}, sort_keys=True) + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
