"""Command-line front end.

    collapse-lab simulate          run the engine from a JSON state or a sampled construction
    collapse-lab construct-zk      build the explicit collapse datum, run it, certify it
    collapse-lab sweep             construct-zk over an (r, cos theta0, seed) grid
    collapse-lab spectrum          triangular spectrum over an r grid
    collapse-lab triangular-probe  iterate the restricted limit matrix from a cone point

Every option can also come from ``--config FILE``, a flat ``key = value``
file using the long option names (dashes or underscores).  Command-line flags
override the file, which overrides the defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import gmpy2
import numpy as np

from . import __version__
from .analysis import classify_order, convergence_report, relative_configs, zk_regime_report
from .core import CollapseLabError, InvalidArgument, SystemState, is_mp
from .engine import CollapseCriteria, Limits, SimulationOutcome, run
from .nearlinear import (NoConstruction, build_construction, run_construction, sample_initial_configuration,
                         verify_recursion)
from .triangular import cone_membership, iterate_cone_exit, spectrum

CSV_HEADER = "# collapse-lab v1"
EXIT_OK, EXIT_USAGE, EXIT_STRICT = 0, 2, 3
MODES = ("simulate", "construct-zk", "sweep", "spectrum", "triangular-probe")


class UsageError(CollapseLabError):
    pass


# --------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    """17 significant digits; mpfr values keep their full exponent range."""
    if is_mp(x):
        return format(x, ".17g")
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(obj):
    if is_mp(obj):
        f = float(obj)
        if f == 0 and obj != 0 or math.isinf(f):
            return fmt(obj)
        return f
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def pair_code(pair) -> str:
    return f"{pair[0]}{pair[1]}"


def events_csv(events) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "t", "pair", "eta_pre", "eta_post", "zeta", "tau"])
    for ev in events:
        w.writerow([ev.index, fmt(ev.time), pair_code(ev.pair), fmt(ev.eta_pre), fmt(ev.eta_post),
                    fmt(ev.zeta), fmt(ev.tau)])
    return buf.getvalue()


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    try:
        d = os.path.dirname(os.path.abspath(path))
        os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


# --------------------------------------------------------------------------
# configuration


def parse_config_file(path: str) -> dict:
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def parse_float_list(text) -> list:
    """Comma list ``0.1,0.2`` or ``linspace:a:b:n``."""
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    text = str(text).strip()
    if not text:
        return []
    if text.startswith("linspace:"):
        _, a, b, n = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_int_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    text = str(text).strip()
    if ":" in text and "," not in text:
        a, b = text.split(":")
        return list(range(int(a), int(b)))
    return [int(x) for x in text.split(",") if x.strip()]


DEFAULTS = {
    "r": 0.02,
    "cos_theta0": -0.9,
    "theta0_deg": None,
    "delta_theta": 0.05,
    "dim": 2,
    "seed": 1,
    "n_collisions": 500,
    "max_collisions": None,
    "max_time": None,
    "precision": None,
    "initial_state": None,
    "strict": False,
    "out_dir": ".",
    "r_grid": "0.02",
    "cos_grid": "-0.9",
    "seeds": "1",
    "workers": 1,
    "x0": "-1,0,-1,1",
    "max_iter": 500,
    "v0": 1.0,
}

_TYPES = {
    "r": float, "cos_theta0": float, "theta0_deg": float, "delta_theta": float, "dim": int, "seed": int,
    "n_collisions": int, "max_collisions": int, "max_time": float, "precision": int, "initial_state": str,
    "out_dir": str, "r_grid": str, "cos_grid": str, "seeds": str, "workers": int, "x0": str, "max_iter": int,
    "v0": float,
}


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {v!r}")


@dataclass
class RunConfig:
    mode: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def cos0(self) -> float:
        if self.values.get("theta0_deg") is not None:
            return math.cos(math.radians(self.values["theta0_deg"]))
        return self.values["cos_theta0"]


def resolve_config(mode: str, flags: dict) -> RunConfig:
    values = dict(DEFAULTS)
    if flags.get("config"):
        for k, v in parse_config_file(flags["config"]).items():
            if k == "mode":
                continue
            if k not in DEFAULTS:
                raise UsageError(f"unknown config key {k!r}")
            values[k] = v
    for k, v in flags.items():
        if k in DEFAULTS and v is not None:
            values[k] = v
    if flags.get("cos_theta0") is not None:
        # an explicit cosine flag overrides an angle from the file
        values["theta0_deg"] = None
    for k, v in list(values.items()):
        if v is None:
            continue
        try:
            if k == "strict":
                values[k] = _as_bool(v)
            elif k in _TYPES:
                values[k] = _TYPES[k](v)
        except ValueError as exc:
            raise UsageError(f"bad value for {k}: {v!r}") from exc
    cfg = RunConfig(mode, values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    if not 0 < v["r"] < 1:
        raise UsageError(f"0 < r < 1 fails for r = {v['r']!r}")
    if v["dim"] < 2:
        raise UsageError(f"dim >= 2 fails for dim = {v['dim']!r}")
    if not -1 <= cfg.cos0 <= 1:
        raise UsageError(f"-1 <= cos_theta0 <= 1 fails for cos_theta0 = {cfg.cos0!r}")
    if not v["delta_theta"] > 0:
        raise UsageError(f"delta_theta > 0 fails for delta_theta = {v['delta_theta']!r}")
    if v["n_collisions"] < 1:
        raise UsageError("n_collisions >= 1 fails")
    if v["workers"] < 1:
        raise UsageError("workers >= 1 fails")
    if v["precision"] is not None and v["precision"] < 53:
        raise UsageError("precision >= 53 bits fails")
    if cfg.mode in ("construct-zk",) or (cfg.mode == "simulate" and v["initial_state"] is None):
        _construction(cfg)  # raises UsageError naming the violated inequality
    if cfg.mode == "sweep":
        if not parse_float_list(v["r_grid"]) or not parse_float_list(v["cos_grid"]) or not parse_int_list(v["seeds"]):
            raise UsageError("sweep grids must be nonempty")
    if cfg.mode == "spectrum":
        grid = parse_float_list(v["r_grid"])
        if not grid:
            raise UsageError("r grid must be nonempty")
        bad = [r for r in grid if not 0 < r < 1]
        if bad:
            raise UsageError(f"0 < r < 1 fails for r = {bad[0]!r}")
    if cfg.mode == "triangular-probe":
        x0 = parse_float_list(v["x0"])
        if len(x0) != 4:
            raise UsageError("x0 needs four components")
        if not cone_membership(*x0, v["r"])[1]:
            raise UsageError("x0 must lie in the cone C2: x < 0, z < (1+r)/4 x, y < t")


def _construction(cfg: RunConfig):
    try:
        return build_construction(cfg.r, cos_theta0=cfg.cos0, delta_theta=cfg.delta_theta, V0=cfg.v0)
    except NoConstruction as exc:
        raise UsageError(f"construction inadmissible: {exc}") from exc


# --------------------------------------------------------------------------
# state files


def load_state(path: str) -> SystemState:
    """JSON ``{"positions": [[..],[..],[..]], "velocities": [...], "t": 0}``; numbers may be strings."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read initial state {path}: {exc}") from exc
    try:
        pos = [[gmpy2.mpfr(str(x)) for x in p] for p in data["positions"]]
        vel = [[gmpy2.mpfr(str(x)) for x in p] for p in data["velocities"]]
        return SystemState.from_lists(pos, vel, gmpy2.mpfr(str(data.get("t", 0))))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise UsageError(f"malformed initial state {path}: {exc}") from exc


def state_to_dict(state: SystemState) -> dict:
    return {"positions": [[fmt(x) for x in p] for p in state.positions],
            "velocities": [[fmt(x) for x in v] for v in state.velocities], "t": fmt(state.t)}


# --------------------------------------------------------------------------
# reports


def order_dict(outcome: SimulationOutcome) -> dict:
    o = classify_order(outcome.events, termination=outcome.termination)
    return {"kind": o.kind, "period_start_index": o.period_start_index, "central_particle": o.central_particle}


def convergence_dict(outcome: SimulationOutcome) -> dict:
    rep = convergence_report(outcome.events, outcome.states)
    last = {pair_code(p): (v[-1] if v else None) for p, v in rep.eta_l2_partial_sums.items()}
    return {
        "termination": outcome.termination,
        "n_events": len(outcome.events),
        "eta_l2_sums": last,
        "tau_sum": rep.tau_partial_sums[-1],
        "tau_star_estimate": rep.tau_star_estimate,
        "eta_decay_rate": rep.eta_decay_rate,
        "omega_cauchy_residual": {pair_code(p): (v[0] if v else None) for p, v in rep.omega_cauchy_residuals.items()},
        "final_gap": rep.gap_tail[-1] if rep.gap_tail else None,
    }


def _report(outcome, certificate=None, zk=None) -> dict:
    rep = {}
    if outcome.events:
        rep["order"] = order_dict(outcome)
        rep["convergence"] = convergence_dict(outcome)
    if certificate is not None:
        rep["certificate"] = certificate.to_dict()
    if zk is not None:
        rep["zk_construction"] = zk.to_dict()
    return rep


def _strict_failure(cfg: RunConfig, outcome) -> bool:
    return cfg.strict and outcome.termination in ("triple-collision", "grazing")


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: RunConfig) -> int:
    zk = None
    if cfg.initial_state:
        state = load_state(cfg.initial_state)
        bits = cfg.precision
    else:
        zk = _construction(cfg)
        state = sample_initial_configuration(zk, cfg.seed, cfg.dim, precision=cfg.precision,
                                             n_collisions=cfg.n_collisions + 16)
        bits = cfg.precision or state.x0[0].precision
    limits = Limits(max_collisions=cfg.max_collisions or cfg.n_collisions, max_time=cfg.max_time,
                    collapse=CollapseCriteria())
    outcome = run(state, cfg.r, limits, precision=bits)
    cert = verify_recursion(outcome, zk) if zk is not None else None
    _write(os.path.join(cfg.out_dir, "events.csv"), events_csv(outcome.events))
    _write(os.path.join(cfg.out_dir, "report.json"), dumps_json(_report(outcome, cert, zk)))
    return EXIT_STRICT if _strict_failure(cfg, outcome) else EXIT_OK


def cmd_construct_zk(cfg: RunConfig) -> int:
    zk = _construction(cfg)
    res = run_construction(zk, cfg.seed, cfg.n_collisions, cfg.dim, cfg.precision)
    _write(os.path.join(cfg.out_dir, "events.csv"), events_csv(res.outcome.events))
    _write(os.path.join(cfg.out_dir, "initial_state.json"), dumps_json(state_to_dict(res.state)))
    _write(os.path.join(cfg.out_dir, "report.json"), dumps_json(_report(res.outcome, res.certificate, zk)))
    return EXIT_STRICT if _strict_failure(cfg, res.outcome) else EXIT_OK


SWEEP_HEADER = ["r", "cos_theta0", "seed", "status", "collapse", "n_collisions", "final_cos_angle",
                "eta_decay_rate", "zeta_max_ratio", "certificate_clean", "termination"]


def _sweep_row(args):
    r, c0, seed, delta_theta, n, dim, v0 = args
    try:
        zk = build_construction(r, cos_theta0=c0, delta_theta=delta_theta, V0=v0)
    except NoConstruction as exc:
        return [r, c0, seed, "inadmissible: " + str(exc), False, 0, "", "", "", False, ""]
    try:
        res = run_construction(zk, seed, n, dim)
        out = res.outcome
        cert = res.certificate
        zeta = zk_regime_report(relative_configs(out)[:cert.n_checked + 1]).max_zeta_ratio
        collapse = out.termination == "collapse-detected" and cert.clean
        return [r, c0, seed, "ok", collapse, len(out.events),
                cert.final_cos_angle if cert.final_cos_angle is not None else "",
                res.eta_decay_rate if res.eta_decay_rate is not None else "",
                zeta if zeta is not None else "", cert.clean, out.termination]
    except Exception as exc:  # recorded per row, the sweep goes on
        return [r, c0, seed, f"error: {type(exc).__name__}: {exc}", False, 0, "", "", "", False, ""]


def sweep_rows(cfg: RunConfig) -> list:
    jobs = [(r, c0, s, cfg.delta_theta, cfg.n_collisions, cfg.dim, cfg.v0)
            for r in sorted(parse_float_list(cfg.r_grid))
            for c0 in sorted(parse_float_list(cfg.cos_grid))
            for s in sorted(parse_int_list(cfg.seeds))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(j) for j in jobs]


def cmd_sweep(cfg: RunConfig) -> int:
    rows = sweep_rows(cfg)
    _write(os.path.join(cfg.out_dir, "sweep.csv"), table_csv(SWEEP_HEADER, rows))
    return EXIT_OK


SPECTRUM_HEADER = ["r", "lambda0", "re_lambda_plus", "im_lambda_plus", "abs_lambda_plus", "viete_residual",
                   "bounds_ok"]


def cmd_spectrum(cfg: RunConfig) -> int:
    reports = [spectrum(r) for r in parse_float_list(cfg.r_grid)]
    rows = [[s.r, s.lambda0, s.lambda_plus.real, s.lambda_plus.imag, abs(s.lambda_plus), s.viete_residual,
             s.all_bounds_ok] for s in reports]

    def margin(s):
        # smallest slack over the strict inequalities; positive when all hold
        m = abs(s.lambda_plus)
        return min(s.lambda0 + s.r, -s.r ** 3 - s.lambda0, m - abs(s.lambda0), 1 - m)

    summary = {
        "n": len(reports),
        "violations": sum(1 for s in reports if not s.all_bounds_ok),
        "min_bound_margin": min(margin(s) for s in reports),
        "max_viete_residual": max(s.viete_residual for s in reports),
        "rows": [s.to_dict() for s in reports],
    }
    _write(os.path.join(cfg.out_dir, "spectrum.csv"), table_csv(SPECTRUM_HEADER, rows))
    _write(os.path.join(cfg.out_dir, "spectrum.json"), dumps_json(summary))
    return EXIT_OK


def cmd_triangular_probe(cfg: RunConfig) -> int:
    x0 = parse_float_list(cfg.x0)
    it = iterate_cone_exit(x0, cfg.r, cfg.max_iter)
    rep = spectrum(cfg.r)
    rows = [[k, *x, d] for k, (x, d) in enumerate(zip(it.orbit, it.distances))]
    _write(os.path.join(cfg.out_dir, "orbit.csv"), table_csv(["k", "x", "y", "z", "t", "distance"], rows))
    summary = {"r": cfg.r, "x0": x0, "exit_index": it.exit_index, "fitted_rate": it.rate,
               "abs_lambda_plus": abs(rep.lambda_plus)}
    _write(os.path.join(cfg.out_dir, "probe.json"), dumps_json(summary))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "construct-zk": cmd_construct_zk, "sweep": cmd_sweep,
            "spectrum": cmd_spectrum, "triangular-probe": cmd_triangular_probe}


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="collapse-lab", description="three inelastic hard spheres: collapse experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--r", type=float)

    def zk(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--cos-theta0", dest="cos_theta0", type=float)
        g.add_argument("--theta0-deg", dest="theta0_deg", type=float)
        sp.add_argument("--delta-theta", dest="delta_theta", type=float)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--n-collisions", dest="n_collisions", type=int)
        sp.add_argument("--precision", type=int, help="mpfr bits (default: sized from the construction)")
        sp.add_argument("--v0", type=float)
        sp.add_argument("--strict", action="store_const", const=True)

    s = sub.add_parser("simulate", help="run the engine")
    common(s)
    zk(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--initial-state", dest="initial_state", help="JSON state file")
    s.add_argument("--max-collisions", dest="max_collisions", type=int)
    s.add_argument("--max-time", dest="max_time", type=float)

    s = sub.add_parser("construct-zk", help="explicit collapse datum with certificate")
    common(s)
    zk(s)
    s.add_argument("--seed", type=int)

    s = sub.add_parser("sweep", help="construct-zk over a grid")
    common(s)
    zk(s)
    s.add_argument("--r-grid", dest="r_grid")
    s.add_argument("--cos-grid", dest="cos_grid")
    s.add_argument("--seeds")
    s.add_argument("--workers", type=int)

    s = sub.add_parser("spectrum", help="triangular spectrum over an r grid")
    common(s)
    s.add_argument("--r-grid", dest="r_grid")

    s = sub.add_parser("triangular-probe", help="linear iteration from a cone point")
    common(s)
    s.add_argument("--x0")
    s.add_argument("--max-iter", dest="max_iter", type=int)
    return p


_LIST_OPTIONS = ("--cos-grid", "--r-grid", "--x0", "--seeds")


def _glue_list_values(argv: list) -> list:
    # "-0.5,-0.9" does not look like a number to argparse, so bind it to its option here
    out, it = [], iter(argv)
    for a in it:
        if a in _LIST_OPTIONS:
            out.append(f"{a}={next(it, '')}")
        else:
            out.append(a)
    return out


def main(argv: Optional[list] = None) -> int:
    argv = _glue_list_values(list(sys.argv[1:] if argv is None else argv))
    try:
        ns = build_parser().parse_args(argv)
        flags = vars(ns)
        mode = flags.pop("mode")
        if mode == "spectrum" and flags.get("r") is not None and flags.get("r_grid") is None:
            flags["r_grid"] = str(flags["r"])
        cfg = resolve_config(mode, flags)
        return COMMANDS[mode](cfg)
    except UsageError as exc:
        print(f"collapse-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidArgument as exc:
        print(f"collapse-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"collapse-lab: {exc}", file=sys.stderr)
        return 1


__all__ = ["main", "build_parser", "resolve_config", "RunConfig", "UsageError", "events_csv", "table_csv",
           "load_state", "state_to_dict", "parse_config_file", "CSV_HEADER", "sweep_rows"]
