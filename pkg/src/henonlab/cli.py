"""Command line driver: fixed point, family sweeps, overlap runs, covers and a summary report.

    henonlab <command> [--config run.json] [--out DIR] [--set key=value ...]

Every command writes only inside the output directory, stamps each CSV row
with the config hash and the schema tag, and exits 0 only when all of its
checks pass.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, HenonLabError

SCHEMA = "henonlab/1"
log = logging.getLogger("henonlab")


# --- configuration ---------------------------------------------------------------

@dataclass
class FixedPointConfig:
    degree: int = 40
    tol: float = 1e-9


@dataclass
class FamilyConfig:
    shape: str = "y"
    b_grid: list = field(default_factory=lambda: [0.01, 0.05, 0.1])
    depth: int = 4
    tune_depth: int = 12


@dataclass
class UniversalConfig:
    fp_depth: int = 14
    thick_b: float = 0.1
    a_level: int = 4
    max_word: int = 7


@dataclass
class OverlapConfig:
    schedule: list | str = "auto"        # [[m, n], ...] or "auto": m in {1, 2}, n - m in {N, N + 2}
    offsets: list = field(default_factory=lambda: [0.0, -1.0])   # log10 factors applied to b^(p^m)
    margin_required: float = 0.25
    samples: int = 256
    distortion_samples: int = 512


@dataclass
class CoverRunConfig:
    A0: float | None = None               # None: take the window found by the overlap pipeline
    A1: float | None = None
    sigma: float | None = None
    b_range: list = field(default_factory=lambda: [0.05, 0.9])
    stages: int = 2
    refinements: int = 8
    m_limit: int = 60
    mc_samples: int = 100_000
    membership_samples: int = 200


@dataclass
class ExperimentConfig:
    p: int = 2
    fixed_point: FixedPointConfig = field(default_factory=FixedPointConfig)
    family: FamilyConfig = field(default_factory=FamilyConfig)
    universal: UniversalConfig = field(default_factory=UniversalConfig)
    overlap: OverlapConfig = field(default_factory=OverlapConfig)
    cover: CoverRunConfig = field(default_factory=CoverRunConfig)
    max_depth: int = 24
    output_dir: str = "henonlab-out"
    seed: int = 0
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.p != 2:
            raise ConfigError("only p = 2 towers are implemented")
        if self.fixed_point.degree < 10:
            raise ConfigError("fixed_point.degree must be at least 10")
        if not self.family.b_grid:
            raise ConfigError("family.b_grid is empty")
        if any(not 0 < b < 0.5 for b in self.family.b_grid):
            raise ConfigError("family.b_grid entries must lie in (0, 0.5)")
        if self.family.depth + 1 > self.max_depth:
            raise ConfigError(f"family.depth exceeds the depth budget {self.max_depth}")
        from .henon import SHAPES
        if self.family.shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.family.shape!r}")
        sched = self.overlap.schedule
        if sched != "auto":
            for pair in sched:
                m, n = pair
                if not 0 < m < n:
                    raise ConfigError(f"schedule pair {pair} needs 0 < m < n")
                if (n - m) % 2:
                    raise ConfigError(f"schedule pair {pair} breaks m = n (mod 2)")
                if n + self.universal.max_word + 2 > self.max_depth:
                    raise ConfigError(f"schedule pair {pair} exceeds the depth budget {self.max_depth}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Hash of everything that can change results (not where they go or how many workers run)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(cls, data, "config").validate()


def _build(kind, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    fields = {f.name: f for f in dataclasses.fields(kind)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            value = _build(sub, value, f"{where}.{name}")
        kwargs[name] = value
    return kind(**kwargs)


def _apply_override(data: dict, item: str):
    key, sep, raw = item.partition("=")
    if not sep:
        raise ConfigError(f"override {item!r} is not key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = data
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def load_config(path: str | None, overrides=(), out: str | None = None) -> ExperimentConfig:
    data = json.loads(Path(path).read_text()) if path else {}
    for item in overrides:
        _apply_override(data, item)
    if out is not None:
        data["output_dir"] = out
    return ExperimentConfig.from_dict(data)


# --- output ------------------------------------------------------------------------

class Output:
    """Writes confined to one directory; keeps the manifest."""

    def __init__(self, cfg: ExperimentConfig):
        self.root = Path(cfg.output_dir).resolve()
        self.root.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.hash = cfg.hash()
        self.files: dict[str, str] = {}

    def path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root not in p.parents:
            raise ConfigError(f"refusing to write outside {self.root}: {name}")
        return p

    def json(self, name: str, obj):
        p = self.path(name)
        p.write_text(json.dumps(obj, sort_keys=True, indent=1, default=_plain) + "\n")
        self.files[name] = str(p)

    def csv(self, name: str, rows: list[dict]):
        p = self.path(name)
        stamped = [{"config_hash": self.hash, "schema": SCHEMA, **r} for r in rows]
        cols: list[str] = []
        for r in stamped:
            cols.extend(k for k in r if k not in cols)
        with p.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols or ["config_hash", "schema"])
            w.writeheader()
            for r in stamped:
                w.writerow({k: _cell(v) for k, v in r.items()})
        self.files[name] = str(p)

    def manifest(self, command: str, seconds: float, checks: dict):
        manifest = {"schema": SCHEMA, "command": command, "config_hash": self.hash,
                    "config": self.cfg.to_dict(), "files": dict(sorted(self.files.items())),
                    "wall_clock_s": round(seconds, 3), "checks": checks}
        self.path(f"manifest_{command}.json").write_text(json.dumps(manifest, sort_keys=True, indent=1,
                                                                    default=_plain) + "\n")


def _plain(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return str(x)


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return v


# --- shared pieces -------------------------------------------------------------------

def _fixed_point(cfg: ExperimentConfig):
    from .unimodal import cached_fixed_point
    return cached_fixed_point(cfg.fixed_point.degree, cfg.fixed_point.tol)


def universal_pipeline(cfg: ExperimentConfig):
    """Universal data and the well-chosen window, both derived from the fixed point."""
    from .henon import build_tower, iota, tuned_tower
    from .overlap import estimate_universal, find_well_chosen
    fp = _fixed_point(cfg)
    uc = cfg.universal
    T0 = build_tower(iota(fp.fstar), uc.fp_depth)
    thick = tuned_tower(fp.fstar, uc.thick_b, uc.a_level + 2, cfg.family.shape, cfg.family.tune_depth)
    U = estimate_universal(T0, thick, a_level=uc.a_level)
    D = find_well_chosen(U, fp.fstar, max_depth=uc.max_word, tower_fp=T0)
    return fp, U, D


def auto_schedule(N: int) -> list[tuple[int, int]]:
    return [(m, m + d) for m in (1, 2) for d in (N, N + 2)]


# --- commands ------------------------------------------------------------------------

def cmd_fixed_point(cfg: ExperimentConfig, out: Output) -> dict:
    from .unimodal import feigenbaum_scaling_oracle, solve_fixed_point
    fp = solve_fixed_point(cfg.fixed_point.degree, cfg.fixed_point.tol)
    oracle, ladder = feigenbaum_scaling_oracle()
    out.json("fixed_point.json", {**fp.to_json(), "degree": cfg.fixed_point.degree,
                                  "lambda_oracle": oracle, "oracle_ladder": ladder})
    return {"residual_below_tol": fp.residual < cfg.fixed_point.tol,
            "lambda_matches_oracle": abs(fp.lam - oracle) < 1e-6}


def _sweep_row(args):
    cfg_dict, b_bar = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    from .henon import average_jacobian, tuned_tower
    fp = _fixed_point(cfg)
    fam = cfg.family
    rows = []
    try:
        T = tuned_tower(fp.fstar, b_bar, fam.depth, fam.shape, fam.tune_depth)
        b0 = average_jacobian(T)
        for n in range(fam.depth + 1):
            bn = average_jacobian(T, level=n)
            rows.append({"b_bar": b_bar, "level": n, "b_F": b0.value(), "b_level": bn.value(),
                         "log_b_level": bn.log_value, "log_ratio": bn.log_value / b0.log_value,
                         "b_power": (b0 ** (cfg.p ** n)).value(), "error": ""})
    except HenonLabError as exc:
        rows.append({"b_bar": b_bar, "level": "", "error": f"{type(exc).__name__}: {exc}"})
    return rows


def cmd_family_sweep(cfg: ExperimentConfig, out: Output) -> dict:
    from .overlap import dagger_log
    from .logmag import LogMagnitude
    jobs = [(cfg.to_dict(), float(b)) for b in cfg.family.b_grid]
    results = _map(_sweep_row, jobs, cfg.workers)
    rows = [r for chunk in results for r in chunk]
    window = _window_if_cached(out)
    if window is not None:
        A0, A1, sigma, schedule = window
        for r in rows:
            if r.get("level") == 0:
                b = LogMagnitude.of(r["b_F"])
                for m, n in schedule:
                    q = dagger_log(b, m, n, sigma, cfg.p)
                    r[f"window_{m}_{n}"] = math.log(A0) < q < math.log(A1)
    out.csv("family_sweep.csv", rows)
    ok_rows = [r for r in rows if not r.get("error")]
    checks = {"no_row_failed": len(ok_rows) == len(rows)}
    if cfg.family.shape == "y":
        checks["b_F_equals_b_bar"] = all(abs(r["b_F"] - r["b_bar"]) < 1e-10 for r in ok_rows if r["level"] == 0)
    checks["level1_log_ratio_near_p"] = all(abs(r["log_ratio"] - cfg.p) <= 0.05
                                            for r in ok_rows if r["level"] == 1)
    return checks


def _window_if_cached(out: Output):
    p = out.path("universal.json")
    if not p.exists():
        return None
    data = json.loads(p.read_text())
    return data["A0"], data["A1"], data["sigma"], [tuple(x) for x in data["schedule"]]


def _overlap_job(args):
    cfg_dict, m, n, offset, bundle = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    from .henon import average_jacobian, tuned_tower
    from .overlap import (class_a_check, detect_overlap, distortion_report, predict_overlap,
                          predictor_margin)
    from .paramset import CoverConfig, choose_b_for_overlap
    fp, U, D = bundle
    t0 = time.time()
    win = CoverConfig(D.A0, D.A1, U.sigma, cfg.p)
    b_bar = choose_b_for_overlap(win, m, n) * 10 ** (offset / cfg.p ** m)
    row = {"m": m, "n": n, "offset_log10": offset, "b_bar": b_bar}
    try:
        T = tuned_tower(fp.fstar, b_bar, n + len(D.w) + 2, cfg.family.shape, cfg.family.tune_depth)
        b = average_jacobian(T)
        row.update(b=b.value(), predicted=predict_overlap(b, m, n, D, U.sigma, cfg.p),
                   margin=predictor_margin(b, m, n, D, U.sigma, cfg.p),
                   detected=detect_overlap(T, D, m, n, cfg.overlap.samples))
        if row["detected"]:
            rep = distortion_report(T, D, m, n, b, cfg.overlap.distortion_samples)
            row.update(dist=rep["dist"], diam=rep["diam"], ratio=rep["ratio"], C0=rep["C0"], C1=rep["C1"])
        if T.depth >= n + max(len(a) for a in D.addresses):
            ca = class_a_check(T, D, m, n, U, b)
            row["class_a"] = ca.passed
            row["class_a_flags"] = ";".join(k for k, (ok, _) in ca.items.items() if not ok)
        row["error"] = ""
    except HenonLabError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["seconds"] = round(time.time() - t0, 2)
    return row


def cmd_overlap(cfg: ExperimentConfig, out: Output) -> dict:
    fp, U, D = universal_pipeline(cfg)
    N = D.entry_threshold(U)
    sched = auto_schedule(N) if cfg.overlap.schedule == "auto" else [tuple(x) for x in cfg.overlap.schedule]
    out.json("universal.json", {"sigma": U.sigma, "rho": U.rho_est, "C": U.C_est, "a": U.a_const,
                                "v_star": U.v_star.to_json(), "meta": U.meta, "N": N,
                                "schedule": [list(s) for s in sched], **D.to_json()})
    # the deepest tower needed must fit the budget (auto schedules are checked here)
    for m, n in sched:
        if n + len(D.w) + 2 > cfg.max_depth:
            raise ConfigError(f"scheduled ({m}, {n}) exceeds the depth budget {cfg.max_depth}")
    jobs = [(cfg.to_dict(), m, n, float(off), (fp, U, D)) for m, n in sched for off in cfg.overlap.offsets]
    rows = _map(_overlap_job, jobs, cfg.workers)
    out.csv("overlap.csv", rows)
    checks = {"no_row_failed": all(not r["error"] for r in rows)}
    centred = [r for r in rows if r["offset_log10"] == 0 and not r["error"]]
    checks["predicted_rows_detected"] = all(r["detected"] for r in centred
                                            if r["predicted"] and r["margin"] >= cfg.overlap.margin_required)
    checks["off_window_rows_not_detected"] = all(not r["detected"] for r in rows
                                                 if abs(r["offset_log10"]) >= 1 and not r["error"])
    decay = distortion_decay(centred, U.sigma)
    out.csv("distortion_decay.csv", decay)
    checks["distortion_decay_within_envelope"] = all(r["within"] for r in decay)
    return checks


def distortion_decay(rows: list[dict], sigma: float) -> list[dict]:
    """Ratio of dist/diam between m and m + 1 at equal n - m, against [sigma / 2, 2 sigma]."""
    by = {(r["m"], r["n"] - r["m"]): r["ratio"] for r in rows if "ratio" in r}
    out = []
    for (m, d), ratio in sorted(by.items()):
        if (m + 1, d) in by:
            f = by[(m + 1, d)] / ratio
            out.append({"m": m, "d": d, "factor": f, "lo": sigma / 2, "hi": 2 * sigma,
                        "within": sigma / 2 <= f <= 2 * sigma})
    return out


def cmd_cover(cfg: ExperimentConfig, out: Output) -> dict:
    from .logmag import LogMagnitude
    from .overlap import predict_overlap
    from .paramset import CoverConfig, Regime, build_cover, covered_mask, membership
    cc = cfg.cover
    A0, A1, sigma = cc.A0, cc.A1, cc.sigma
    if A0 is None or A1 is None or sigma is None:
        fp, U, D = universal_pipeline(cfg)
        A0 = D.A0 if A0 is None else A0
        A1 = D.A1 if A1 is None else A1
        sigma = U.sigma if sigma is None else sigma
    pc = CoverConfig(A0, A1, sigma, cfg.p, tuple(cc.b_range))
    cover = build_cover(pc, cc.stages, cc.refinements, cc.m_limit)
    out.json("cover.json", cover.to_json())
    ledger = cover.ledger_rows()
    L = pc.L
    rng = np.random.default_rng(cfg.seed)
    checks = {}
    contraction_ok = ledger_ok = True
    mc_rows = []
    for s in cover.stages:
        for k, r in enumerate(s.refinements):
            contraction_ok &= r.uncovered_bound <= (1 - L) ** k * s.measure * (1 + 1e-12)
            ledger_ok &= abs(r.covered + r.uncovered - r.parent) <= 1e-12 * max(1.0, r.parent)
        xs = rng.uniform(s.T[0], s.T[1], cc.mc_samples)
        frac = float(covered_mask(xs, s).mean())
        expect = 1 - s.refinements[-1].uncovered / s.measure
        mc_rows.append({"stage": s.index, "samples": cc.mc_samples, "mc_covered": frac, "ledger_covered": expect})
    for row in ledger:
        row["bound"] = (1 - L) ** row["refinement"] * (row["T_hi"] - row["T_lo"])
    out.csv("cover_ledger.csv", ledger)
    out.csv("cover_montecarlo.csv", mc_rows)
    checks["uncovered_within_contraction_bound"] = bool(contraction_ok)
    checks["ledger_additive"] = bool(ledger_ok)
    checks["montecarlo_matches_ledger"] = all(abs(r["mc_covered"] - r["ledger_covered"]) <= 1e-2 for r in mc_rows)
    if cover.regime is Regime.OVERLAPPING:
        checks["trivial_stage"] = len(cover.stages) == 1 and cover.stages[0].refinements[-1].uncovered == 0.0
    mem_rows = []
    b1, b0 = cc.b_range
    ok = True
    for b in np.sort(rng.uniform(b1, b0, cc.membership_samples)):
        lb = LogMagnitude.of(float(b))
        for h in membership(float(b), cover):
            pred = predict_overlap(lb, h.m, h.n, pc, sigma, cfg.p)
            ok &= pred
            mem_rows.append({"b": float(b), "stage": h.stage, "refinement": h.refinement, "m": h.m,
                             "n": h.n, "d": h.d, "delta": h.delta, "predicted": pred})
    out.csv("membership.csv", mem_rows)
    checks["membership_hits_satisfy_window"] = bool(ok)
    return checks


def cmd_report(cfg: ExperimentConfig, out: Output) -> dict:
    """Collect the checks recorded by earlier commands in this output directory."""
    checks = {}
    for p in sorted(out.root.glob("manifest_*.json")):
        if p.name == "manifest_report.json":
            continue
        data = json.loads(p.read_text())
        for k, v in data.get("checks", {}).items():
            checks[f"{data['command']}.{k}"] = v
    lines = [f"{'PASS' if v else 'FAIL'}  {k}" for k, v in sorted(checks.items())]
    text = "\n".join(lines) if lines else "no manifests found"
    out.path("report.txt").write_text(text + "\n")
    out.files["report.txt"] = str(out.path("report.txt"))
    print(text)
    return checks if checks else {"manifests_present": False}


COMMANDS = {
    "fixed-point": cmd_fixed_point,
    "family-sweep": cmd_family_sweep,
    "overlap": cmd_overlap,
    "cover": cmd_cover,
    "report": cmd_report,
}


def _map(fn, jobs, workers: int):
    if workers == 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))       # order preserved: one collector, deterministic files


def run(command: str, cfg: ExperimentConfig) -> tuple[int, dict]:
    out = Output(cfg)
    t0 = time.time()
    checks = COMMANDS[command](cfg, out)
    checks = {k: bool(v) for k, v in checks.items()}
    out.manifest(command.replace("-", "_"), time.time() - t0, checks)
    return (0 if all(checks.values()) else 1), checks


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="henonlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry, dotted keys, JSON values")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.set, args.out)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        code, checks = run(args.command, cfg)
    except HenonLabError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for k, v in checks.items():
        log.info("%s %s", "ok  " if v else "FAIL", k)
    return code


if __name__ == "__main__":
    sys.exit(main())
