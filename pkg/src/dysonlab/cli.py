"""Batch driver: ``dysonlab run CONFIG`` and ``dysonlab list``.

Configs are INI files. ``[experiment]`` holds ``name``, ``seed`` and ``threads``;
``[params]`` holds ``alpha``, ``beta``, ``h`` (comma lists expand to a grid);
``[window]`` and ``[options]`` hold experiment-specific integers and strings.

Outputs in the output directory: ``summary.json`` (deterministic), one CSV per
result series, and ``timing.json``. Exit codes: 0 all pass, 1 config error,
2 invariant failure, 3 estimator warnings only.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import math
import re
import resource
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .analysis import (
    _exact_pieces,
    claim3_scan,
    cylinder_scan,
    inequality_audit,
    kakutani_experiment,
    plateau,
    t_sequence,
)
from .dobrushin import uniqueness_verdict
from .gibbs import BoundaryCondition, ESSCollapseError, Schedule
from .intermediate import (
    enumerate_cross_bonds,
    direct_normalizer,
    gcb_sandwich,
    ladder,
    relative_entropy_sequence,
)
from .model import BCKind, ModelParams, RegimeWarning
from .transfer import build_transfer, leading_eig, pressure_sequence, spin_flip_identity_check

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_WARN = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(where + msg)
        self.line, self.col = line, col


# ---------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    """Seventeen significant digits; non-finite values as JSON strings."""
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v).strip('"') if isinstance(v, (float, np.floating)) else
                    (str(bool(v)).lower() if isinstance(v, (bool, np.bool_)) else v) for v in r])
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# config


@dataclass
class ExperimentConfig:
    name: str
    grid: list[ModelParams]
    seed: int = 0
    threads: int = 1
    window: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)  # resolved config echo

    @property
    def params(self) -> ModelParams:
        return self.grid[0]


def _positions(text: str) -> dict:
    pos, section = {}, None
    for ln, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"(\s*)([^=:#;\s][^=:]*?)\s*[=:]\s*", line)
        if m and section is not None:
            pos[(section, m.group(2).strip())] = (ln, m.end() + 1)
    return pos


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside any [section]", e.lineno, 1) from None
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate key {e.option!r} in [{e.section}]", e.lineno, 1) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", e.lineno, 1) from None
    except configparser.ParsingError as e:
        ln = e.errors[0][0] if e.errors else None
        raise ConfigError("malformed line, expected key = value", ln, 1) from None
    pos = _positions(text)

    def where(sec, key):
        return pos.get((sec, key), (None, None))

    if not cp.has_section("experiment") or not cp.has_option("experiment", "name"):
        raise ConfigError("missing [experiment] name", 1, 1)
    name = cp.get("experiment", "name").strip()
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}", *where("experiment", "name"))
    spec = EXPERIMENTS[name]

    def number(sec, key, conv):
        raw = cp.get(sec, key)
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"[{sec}] {key}: cannot read {raw!r} as {conv.__name__}", *where(sec, key)) from None

    seed = number("experiment", "seed", int) if cp.has_option("experiment", "seed") else 0
    threads = number("experiment", "threads", int) if cp.has_option("experiment", "threads") else 1
    if threads < 1:
        raise ConfigError("threads must be at least 1", *where("experiment", "threads"))

    axes = {}
    for key in ("alpha", "beta", "h"):
        if not cp.has_option("params", key):
            if key in spec.defaults:
                axes[key] = [spec.defaults[key]]
                continue
            raise ConfigError(f"missing [params] {key}", *(where("params", key) if cp.has_section("params") else (1, 1)))
        raw = cp.get("params", key)
        try:
            axes[key] = [float(v) for v in raw.split(",")]
        except ValueError:
            raise ConfigError(f"[params] {key}: expected comma-separated numbers, got {raw!r}", *where("params", key)) from None
    grid = []
    for a, b, h in itertools.product(axes["alpha"], axes["beta"], axes["h"]):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RegimeWarning)
                grid.append(ModelParams(a, b, h))
        except ValueError as e:
            raise ConfigError(f"[params] {e}", *where("params", "alpha")) from None
    if len(grid) > 1 and not spec.grid:
        raise ConfigError(f"experiment {name!r} takes a single parameter point", *where("params", "alpha"))

    values = {}
    for sec in ("window", "options"):
        values[sec] = {}
        for key, conv in spec.keys.get(sec, {}).items():
            if cp.has_option(sec, key):
                values[sec][key] = number(sec, key, conv)
            elif key in spec.defaults:
                values[sec][key] = spec.defaults[key]
            else:
                raise ConfigError(f"missing [{sec}] {key}", 1, 1)
        if cp.has_section(sec):
            for key in cp.options(sec):
                if key not in spec.keys.get(sec, {}):
                    raise ConfigError(f"unknown key [{sec}] {key} for {name!r}", *where(sec, key))
    source = {
        "experiment": {"name": name, "seed": seed},
        "params": {k: v for k, v in axes.items()},
        "window": values["window"],
        "options": values["options"],
    }
    return ExperimentConfig(name, grid, seed, threads, values["window"], values["options"], source)


# ---------------------------------------------------------------------------
# results


@dataclass
class RunReport:
    rows: dict = field(default_factory=dict)  # series -> (header, rows)
    results: dict = field(default_factory=dict)
    invariants: list = field(default_factory=list)

    def check(self, name: str, invariant: str, ok: bool | None, witness=None, warn: bool = False) -> None:
        status = "warn" if (ok is None or warn) else ("pass" if ok else "fail")
        entry = {"name": name, "invariant": invariant, "status": status}
        if witness is not None:
            entry["witness"] = witness
        self.invariants.append(entry)

    @property
    def exit_code(self) -> int:
        st = {i["status"] for i in self.invariants}
        if "fail" in st:
            return EXIT_FAIL
        if "warn" in st:
            return EXIT_WARN
        return EXIT_OK


def _bc(opts: dict, p: ModelParams) -> BoundaryCondition:
    kind = opts.get("bc", "aligned")
    if kind == "aligned":
        return BoundaryCondition.aligned(p.h)
    return {"free": BoundaryCondition.free(), "all_plus": BoundaryCondition.plus(),
            "all_minus": BoundaryCondition.minus()}[BCKind(kind).value]


def _exp_duc(cfg: ExperimentConfig, rep: RunReport) -> None:
    rows = []
    for p in cfg.grid:
        v = uniqueness_verdict(p)
        rows.append([p.alpha, p.beta, p.h, v.high_temp_ok, v.high_temp_margin, v.strong_field_ok,
                     v.strong_field_margin, v.generic_rhs, v.closed_form_rhs, v.ok])
        if p.beta > 0:
            rep.check(f"threshold[{p.alpha},{p.beta},{p.h}]", "generic strong-field side equals closed form",
                      abs(v.generic_rhs - v.closed_form_rhs) <= 1e-10, {"generic": v.generic_rhs, "closed": v.closed_form_rhs})
    rep.rows["duc"] = (["alpha", "beta", "h", "high_temp_ok", "high_temp_margin", "strong_field_ok",
                        "strong_field_margin", "generic_rhs", "closed_form_rhs", "unique"], rows)
    rep.results["points"] = len(rows)
    rep.results["unique"] = sum(bool(r[-1]) for r in rows)


def _exp_spectrum(cfg: ExperimentConfig, rep: RunReport) -> None:
    m, tail = cfg.options["m"], cfg.options["tail"]
    rows = []
    for p in cfg.grid:
        T = build_transfer(m, tail, p)
        r = leading_eig(T)
        rows.append([p.alpha, p.beta, p.h, m, r.lam, r.log_lambda, r.residual, r.iterations, T.truncation_bound])
        rep.check(f"residual[{p.alpha},{p.beta},{p.h}]", "eigenfunction residual below 1e-10 relative",
                  r.residual <= 1e-10 * max(1.0, r.lam), {"residual": r.residual})
        if p.beta == 0:
            ref = 2.0 * math.cosh(p.h)
            rep.check(f"free_spins[{p.h}]", "independent spins give lambda = 2 cosh h",
                      abs(r.lam - ref) <= 1e-12 * ref, {"lambda": r.lam, "expected": ref})
        if m <= 12:
            dev = spin_flip_identity_check(m, p, tail)
            rep.check(f"spin_flip[{p.alpha},{p.beta},{p.h}]", "spin flip maps the operator at h to the one at -h",
                      dev <= 1e-12, {"deviation": dev})
    rep.rows["spectrum"] = (["alpha", "beta", "h", "m", "lambda", "log_lambda", "residual", "iterations",
                             "truncation_bound"], rows)


def _exp_pressure(cfg: ExperimentConfig, rep: RunReport) -> None:
    p, m_max, tail = cfg.params, cfg.options["m_max"], cfg.options["tail"]
    seq = pressure_sequence(m_max, tail, p)
    rep.rows["pressure"] = (["m", "log_lambda", "truncation_bound"], [list(s) for s in seq])
    final = seq[-1][1]
    worst = 0.0
    for m, ll, bound in seq[:-1]:
        worst = max(worst, abs(ll - final) - 2.0 * bound)
    rep.check("truncation", "|log lambda_m - log lambda_M| at most twice the dropped tail at range m",
              worst <= 1e-12, {"worst_excess": worst})
    rep.results["log_lambda_final"] = final


def _exp_tsequence(cfg: ExperimentConfig, rep: RunReport) -> None:
    p, o, w = cfg.params, cfg.options, cfg.window
    sched = Schedule(o["sweeps"], o["burn_in"], 1)
    ts = t_sequence(o["n_max"], p, w["L"], w["R"], bc=_bc(o, p), backend=o["backend"], sensitivity=bool(o["sensitivity"]),
                    schedule=sched, seed=cfg.seed, threads=cfg.threads)
    ceil = ts.ceiling if ts.ceiling is not None else np.full(ts.n.size, math.nan)
    rows = [[int(n), t, e, c] + [ts.sensitivity[k][i] for k in sorted(ts.sensitivity)]
            for i, (n, t, e, c) in enumerate(zip(ts.n, ts.t, ts.err, ceil))]
    rep.rows["tsequence"] = (["n", "t", "stderr", "ceiling"] + [f"t_{k}" for k in sorted(ts.sensitivity)], rows)
    rep.results.update(mu0=ts.mu0, bc=ts.bc, backend=ts.backend, fit_range=list(ts.fit_range))
    if ts.fit is not None:
        rep.results["fit"] = {"exponent": ts.fit.exponent, "prefactor": ts.fit.prefactor, "residual": ts.fit.residual,
                              "expected": -(p.alpha - 1.0)}
    rep.check("nonnegative", "t_n >= 0", bool(np.all(ts.t >= 0)))
    if ts.ceiling is None:
        rep.check("ceiling", "t_n below the comparison ceiling (exploratory: no contraction)", None)
    else:
        rep.check("ceiling", "t_n - 3 stderr below the comparison ceiling at every n", ts.below_ceiling)


def _exp_claim3(cfg: ExperimentConfig, rep: RunReport) -> None:
    p, o, w = cfg.params, cfg.options, cfg.window
    r = claim3_scan(o["N_max"], p, w["L"], w["R"], bc=_bc(o, p), rel_tol=o["rel_tol"], threads=cfg.threads)
    rep.rows["claim3"] = (["N", "cov_sum", "gap_sum"], [[int(n), a, b] for n, a, b in zip(r.N, r.cov_sums, r.gap_sums)])
    cp, cw = r.cov_plateau
    gp, gw = r.gap_plateau
    rep.results.update(cov_worst_increment=cw, gap_worst_increment=gw)
    d = r.gap_increment_decay
    if d is not None:
        rep.results["gap_increment_exponent"] = d.exponent
    rep.check("cov_plateau", "covariance partial sums plateau", cp, {"worst_relative_increment": cw})
    rep.check("gap_plateau", "mean-gap partial sums plateau", gp, {"worst_relative_increment": gw})
    rep.check("gap_monotone", "mean-gap partial sums nondecreasing", r.gap_monotone)
    rep.check("follmer", "each covariance below the resolvent ceiling", r.follmer_ok)


def _exp_cylinder(cfg: ExperimentConfig, rep: RunReport) -> None:
    p, o, w = cfg.params, cfg.options, cfg.window
    s = cylinder_scan(o["n_max"], o["N"], p, w["L"], w["R"], bc=_bc(o, p), threads=cfg.threads)
    rep.rows["cylinder"] = (["n", "average", "stderr", "lower_bound", "lower_bound_limit", "jensen_bound"],
                            [[int(n), a, e, lb, li, jb] for n, a, e, lb, li, jb in
                             zip(s.n, s.average, s.error, s.lower_bound, s.lower_bound_limit, s.jensen_bound)])
    rep.results.update(c9=s.c9, R=s.R, kappa=s.kappa, mu0=s.mu0, exploratory=s.exploratory, flipped=s.flipped,
                       growth_slope=s.growth_fit[0], half_slopes=list(s.half_slopes))
    rep.check("increasing", "A_n strictly increasing", s.strictly_increasing)
    rep.check("lower_bound", "A_n + 3 stderr above the closed-form lower bound", s.dominates_bound)
    rep.check("growth", "log A_n vs n^(2-alpha) slope positive and stable", s.stable_growth,
              {"half_slopes": list(s.half_slopes)})


def _exp_audit(cfg: ExperimentConfig, rep: RunReport) -> None:
    bcs = [BoundaryCondition.free(), BoundaryCondition.plus()]
    r = inequality_audit(cfg.options["w_max"], cfg.grid, tol=cfg.options["tol"], bcs=bcs)
    rep.rows["audit"] = (["check", "count", "worst_margin"],
                         [[k, r.checks[k], r.worst_margin[k]] for k in r.checks])
    for k in r.checks:
        wit = [v for v in r.violations if v["check"] == k][:5]
        rep.check(k, f"{k} holds on every subset pair", not wit, wit or None)


def _exp_kakutani(cfg: ExperimentConfig, rep: RunReport) -> None:
    o = cfg.options
    rows = []
    for p in cfg.grid:
        r = kakutani_experiment(o["n_max"], p.alpha, p.beta, o["plateau_tol"])
        key = f"{p.alpha},{p.beta}"
        rows += [[p.alpha, p.beta, int(n), a, s] for n, a, s in zip(r.record_n, r.a_n, r.partial_sums)]
        rep.results[key] = {"verdict": r.verdict, "ratio_gap_band": list(r.ratio_gap), "gap_limit": r.gap_limit,
                            "ratio_power_band": list(r.ratio_power), "last_decade_increment": r.last_decade_increment,
                            "drift_gap": r.drift_gap, "drift_power": r.drift_power}
        rep.check(f"bands[{key}]", "both affinity ratios stay in a bounded band", r.bands_bounded)
        if 2.0 * p.alpha - 2.0 > 1.0:
            rep.check(f"plateau[{key}]", "partial sums plateau over the last decade", r.plateau,
                      {"increment": r.last_decade_increment})
        else:
            rep.check(f"growth[{key}]", "partial sums grow with no plateau", r.monotone and not r.plateau,
                      {"increment": r.last_decade_increment})
    rep.rows["kakutani"] = (["alpha", "beta", "n", "a_n", "partial_sum"], rows)


def _exp_ladder(cfg: ExperimentConfig, rep: RunReport) -> None:
    p, o, w = cfg.params, cfg.options, cfg.window
    nm, npl, _ = _exact_pieces(w["L"], w["R"], p, _bc(o, p), cfg.threads)
    rows, worst = [], 0.0
    for N in range(1, o["N_telescope"] + 1):
        steps = ladder(N, nm, npl, p)
        tele = math.fsum(math.log(s.normalizer) for s in steps)
        direct = direct_normalizer(N, nm, npl, p)
        lo, _, hi = gcb_sandwich(N, p, nm, npl)
        worst = max(worst, abs(math.exp(tele) - math.exp(direct)))
        rows.append([N, len(steps), tele, direct, lo, hi])
    rep.rows["telescope"] = (["N", "steps", "log_telescoped", "log_direct", "gcb_lower", "gcb_upper"], rows)
    rep.check("telescoping", "product of step normalisers equals the direct integral to 1e-8", worst <= 1e-8,
              {"worst": worst})
    rep.check("sandwich", "direct log-normaliser inside the concentration bounds",
              all(r[4] <= r[3] <= r[5] for r in rows))
    pts = relative_entropy_sequence(range(1, o["N_entropy"] + 1), p, (nm, npl))
    ent = [pt.entropy.value for pt in pts]
    rep.rows["entropy"] = (["N", "mean_minus_w", "log_normalizer", "entropy"],
                           [[pt.N, pt.mean_minus_w.value, pt.log_normalizer.value, pt.entropy.value] for pt in pts])
    ok, worst_inc = plateau(ent, o["rel_tol"])
    rep.results["entropy_worst_increment"] = worst_inc
    rep.results["bond_count"] = enumerate_cross_bonds(o["N_entropy"]).prefix_marks[o["N_entropy"]]
    rep.check("entropy_plateau", "relative entropy sequence plateaus", ok, {"worst_relative_increment": worst_inc})


@dataclass(frozen=True)
class ExperimentSpec:
    run: Callable
    claim: str
    keys: dict
    defaults: dict
    grid: bool = False


_ONE_SIDED = {"window": {"L": int, "R": int}}
EXPERIMENTS: dict[str, ExperimentSpec] = {
    "duc": ExperimentSpec(_exp_duc, "uniqueness holds at high temperature or in a strong field; "
                          "the general strong-field criterion reduces to the closed Dyson threshold",
                          {}, {}, grid=True),
    "spectrum": ExperimentSpec(_exp_spectrum, "the truncated transfer operator has a simple positive "
                               "leading eigenvalue whose log approximates the pressure",
                               {"options": {"m": int, "tail": str}}, {"m": 10, "tail": "free"}, grid=True),
    "pressure": ExperimentSpec(_exp_pressure, "log lambda_m converges at the rate of the dropped tail",
                               {"options": {"m_max": int, "tail": str}}, {"m_max": 14, "tail": "free"}),
    "tsequence": ExperimentSpec(_exp_tsequence, "one-point gaps between the split and the full chain "
                                "decay like (n+1)^-(alpha-1) under a resolvent ceiling",
                                {**_ONE_SIDED, "options": {"n_max": int, "bc": str, "backend": str, "sensitivity": int,
                                                           "sweeps": int, "burn_in": int}},
                                {"L": 16, "R": 16, "n_max": 12, "bc": "aligned", "backend": "exact",
                                 "sensitivity": 0, "sweeps": 20000, "burn_in": 2000}),
    "claim3": ExperimentSpec(_exp_claim3, "the weighted cross covariance and mean-gap double sums stay bounded",
                             {**_ONE_SIDED, "options": {"N_max": int, "bc": str, "rel_tol": float}},
                             {"L": 16, "R": 16, "N_max": 12, "bc": "aligned", "rel_tol": 1e-3}),
    "cylinder": ExperimentSpec(_exp_cylinder, "averages of the half-line density over plus cylinders grow "
                               "without bound, so the density has no continuous version",
                               {**_ONE_SIDED, "options": {"n_max": int, "N": int, "bc": str}},
                               {"L": 18, "R": 18, "n_max": 12, "N": 17, "bc": "aligned"}),
    "audit": ExperimentSpec(_exp_audit, "GKS and FKG correlation inequalities hold for the ferromagnetic chain "
                            "with nonnegative field",
                            {"options": {"w_max": int, "tol": float}}, {"w_max": 5, "tol": 1e-12}, grid=True),
    "kakutani": ExperimentSpec(_exp_kakutani, "Bernoulli products with the one-sided field law are equivalent "
                               "to the limit product exactly when alpha > 3/2",
                               {"options": {"n_max": int, "plateau_tol": float}},
                               {"n_max": 1000000, "plateau_tol": 1e-6, "beta": 0.5, "h": 0.0}, grid=True),
    "ladder": ExperimentSpec(_exp_ladder, "restoring cross bonds one at a time telescopes the density normaliser "
                             "and the relative entropy of the split chain stays bounded",
                             {**_ONE_SIDED, "options": {"N_telescope": int, "N_entropy": int, "bc": str,
                                                        "rel_tol": float}},
                             {"L": 12, "R": 12, "N_telescope": 6, "N_entropy": 12, "bc": "aligned", "rel_tol": 1e-3}),
}


def list_experiments() -> str:
    lines = []
    for name, spec in EXPERIMENTS.items():
        keys = ["[params] alpha, beta, h" + (" (lists allowed)" if spec.grid else "")]
        for sec, ks in spec.keys.items():
            keys.append(f"[{sec}] " + ", ".join(ks))
        lines.append(f"{name}\n  claim: {spec.claim}\n  keys:  " + "; ".join(keys))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry points


def run(config_path: str | Path, out: str | Path | None = None, *, threads: int | None = None,
        seed: int | None = None, stderr=None) -> int:
    stderr = stderr or sys.stderr
    path = Path(config_path)
    try:
        text = path.read_text()
    except OSError as e:
        print(f"{path}: {e.strerror}", file=stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
    except ConfigError as e:
        print(f"{path}: {e}", file=stderr)
        return EXIT_CONFIG
    if threads is not None:
        cfg.threads = threads
    if seed is not None:
        cfg.seed = cfg.source["experiment"]["seed"] = seed
    out_dir = Path(out) if out is not None else path.with_suffix("")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"{out_dir}: {e.strerror}", file=stderr)
        return EXIT_CONFIG

    rep = RunReport()
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeWarning)
        try:
            EXPERIMENTS[cfg.name].run(cfg, rep)
        except ESSCollapseError as e:
            rep.check("estimator", "effective sample size above the floor", None, {"error": str(e)})
        except (ValueError, IndexError, OverflowError) as e:
            print(f"{path}: {type(e).__name__}: {e}", file=stderr)
            return EXIT_CONFIG
    wall = time.perf_counter() - t0
    notes = sorted({str(w.message) for w in caught if issubclass(w.category, RegimeWarning)})
    summary = {
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.source,
        "results": rep.results,
        "invariants": rep.invariants,
        "regime_notes": notes,
        "tables": sorted(f"{k}.csv" for k in rep.rows),
        "exit_code": rep.exit_code,
    }
    (out_dir / "summary.json").write_text(to_json(summary) + "\n")
    for key, (header, rows) in rep.rows.items():
        write_csv(out_dir / f"{key}.csv", header, rows)
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    (out_dir / "timing.json").write_text(to_json({"wall_seconds": wall, "peak_rss_kib": peak,
                                                   "threads": cfg.threads}) + "\n")
    return rep.exit_code


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="dysonlab", description="Dyson chain experiment driver")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    sub.add_parser("list", help="list experiments")
    args = ap.parse_args(argv)
    if args.cmd == "list":
        sys.stdout.write(list_experiments())
        return EXIT_OK
    return run(args.config, args.out, threads=args.threads, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
