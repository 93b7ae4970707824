"""Experiment configuration, orchestration, persistence and reporting."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .constructions import max_ne, sum_ne, sum_worst_clique
from .dynamics import DeviationFamily, Scheduler, candidate_weights, random_profile, run_dynamics
from .errors import InvalidConfig, NCGError, PreconditionFailed, ValidationError
from .game import EPS, GameKind, realize
from .price import parse_price
from .verifier import (bound_suite, certify_ne, families_for, poa_report, pos_report,
                       worst_clique_realized_ratio)

log = logging.getLogger(__name__)

CHECK_NAMES = ("Lemma1-lower", "Lemma6-upper", "Lemma5-diameter",
               "Lemma11-lower", "Lemma13-upper", "Lemma14-diameter")

COLUMNS = (["game", "price", "alpha", "eps", "n", "case", "ne_weight", "stable", "family",
            "ne_cost", "opt_cost", "opt_label", "pos_ratio", "pos_ceiling",
            "poa_ratio", "poa_bound", "bound_curve", "thm9_ratio", "thm9_realized_ratio",
            "thm9_stable", "dyn_runs", "dyn_converged", "dyn_stable", "dyn_max_ratio",
            "violations"]
           + [f"slack_{c}" for c in CHECK_NAMES] + ["error"])


def _parse_list(value, cast=float):
    out = []
    for item in filter(None, (s.strip() for s in value.split(","))):
        if ".." in item and cast is int:
            a, b = item.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(cast(item))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    game: GameKind
    price: str                      # template; may contain {alpha} and {eps}
    n: tuple
    alpha: tuple = ()
    eps: tuple = ()
    grid: int = 64
    family: str = "auto"            # auto: exhaustive up to exhaustive_limit, restricted above
    exhaustive_limit: int = 8
    scheduler: str = "round-robin"
    seed: int = 0
    dynamics_runs: int = 0
    max_rounds: int = 50
    density: float = 0.4
    tolerance: float = EPS

    KEYS = ("game", "price", "n", "alpha", "eps", "grid", "family", "exhaustive_limit",
            "scheduler", "seed", "dynamics_runs", "max_rounds", "density", "tolerance")

    @classmethod
    def from_text(cls, text):
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not eq or key not in cls.KEYS:
                raise InvalidConfig(f"line {lineno}: expected 'key = value' with a known key, got {line!r}")
            values[key] = value.strip()
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values):
        try:
            kw = {
                "game": GameKind.parse(values.get("game", "sum")),
                "price": str(values["price"]).strip(),
                "n": tuple(_parse_list(str(values.get("n", "")), int)),
                "alpha": tuple(_parse_list(str(values.get("alpha", "")))),
                "eps": tuple(_parse_list(str(values.get("eps", "")))),
            }
            for key, cast in (("grid", int), ("exhaustive_limit", int), ("seed", int),
                              ("dynamics_runs", int), ("max_rounds", int),
                              ("density", float), ("tolerance", float),
                              ("family", str), ("scheduler", str)):
                if values.get(key) not in (None, ""):
                    kw[key] = cast(values[key])
        except KeyError as exc:
            raise InvalidConfig(f"missing config key {exc}") from None
        except (ValueError, ValidationError) as exc:
            raise InvalidConfig(str(exc)) from exc
        config = cls(**kw)
        config.check()
        return config

    def check(self):
        if not self.n:
            raise InvalidConfig("n list is empty")
        if min(self.n) < 2:
            raise InvalidConfig("every n must be at least 2")
        if self.grid < 2 or self.max_rounds < 1:
            raise InvalidConfig("grid must be >= 2 and max_rounds >= 1")
        try:
            Scheduler.parse(self.scheduler)
            if self.family != "auto":
                DeviationFamily.parse(self.family)
        except ValidationError as exc:
            raise InvalidConfig(str(exc)) from exc
        for spec, _, _ in self.price_instances():
            try:
                parse_price(spec)
            except (ValidationError, OSError) as exc:
                raise InvalidConfig(f"price {spec!r}: {exc}") from exc

    def price_instances(self):
        """Yield ``(spec, alpha, eps)`` for every parameter combination the template uses."""
        alphas = self.alpha if "{alpha}" in self.price else (None,)
        epss = self.eps if "{eps}" in self.price else (None,)
        if not alphas or not epss:
            raise InvalidConfig("price template has a placeholder with an empty value list")
        for a, e in itertools.product(alphas, epss):
            spec = self.price
            if a is not None:
                spec = spec.replace("{alpha}", repr(a))
            if e is not None:
                spec = spec.replace("{eps}", repr(e))
            yield spec, a, e

    def canonical_prices(self):
        return [(parse_price(s).spec(), a, e) for s, a, e in self.price_instances()]

    def instances(self):
        for spec, a, e in self.canonical_prices():
            for n in self.n:
                yield {"price": spec, "alpha": a, "eps": e, "n": n}

    def canonical(self):
        def fmt(v):
            if isinstance(v, tuple):
                return ",".join(repr(x) for x in v)
            return v.value if isinstance(v, GameKind) else repr(v) if isinstance(v, float) else str(v)
        return "\n".join(f"{k} = {fmt(getattr(self, k))}" for k in sorted(self.KEYS)) + "\n"

    def fingerprint(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def row_key(row):
    return (row["price"], int(row["n"]))


def _families(config, n):
    if config.family == "auto":
        return families_for(n, config.exhaustive_limit)
    return (DeviationFamily.parse(config.family),)


def run_instance(config: ExperimentConfig, inst: dict) -> dict:
    """Build, certify and bound-check one (price, n) instance.  Errors land in the row."""
    row = {c: "" for c in COLUMNS}
    row.update(game=config.game.value, price=inst["price"], n=inst["n"],
               alpha="" if inst["alpha"] is None else inst["alpha"],
               eps="" if inst["eps"] is None else inst["eps"])
    try:
        _fill_row(config, inst, row)
    except NCGError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _fill_row(config, inst, row):
    p, n, kind = parse_price(inst["price"]), inst["n"], config.game
    tol = config.tolerance
    cands = candidate_weights(p, n, config.grid)
    fams = _families(config, n)
    limit = max(config.exhaustive_limit, n) if config.family == "exhaustive" else config.exhaustive_limit
    ne = sum_ne(n, p) if kind is GameKind.SUM else max_ne(n, p)
    report = certify_ne(ne.profile, fams, cands, eps=tol, exhaustive_limit=limit)
    game = realize(ne.profile)
    checks = bound_suite(game, report)
    row.update(case=ne.case, ne_weight=ne.weight, stable=report.stable, family=report.family,
               ne_cost=game.social_cost())
    violations = sum(not c.satisfied for c in checks)
    for c in checks:
        row[f"slack_{c.name}"] = c.slack
    pos = pos_report(kind, n, p)
    row.update(opt_cost=pos.opt_cost, opt_label=pos.opt_label, pos_ratio=pos.ratio,
               pos_ceiling=pos.ceiling)
    equilibria = [(ne.profile, report)] if report.stable else []

    if kind is GameKind.SUM:
        try:
            worst = sum_worst_clique(n, p)
        except PreconditionFailed:
            worst = None
        if worst is not None:
            wrep = certify_ne(worst.profile, fams, cands, eps=tol, exhaustive_limit=limit)
            row.update(thm9_ratio=worst.details["ratio"],
                       thm9_realized_ratio=worst_clique_realized_ratio(n, p),
                       thm9_stable=wrep.stable)
            if wrep.stable:
                equilibria.append((worst.profile, wrep))
                violations += sum(not c.satisfied for c in bound_suite(realize(worst.profile), wrep))

    dyn_conv = dyn_stable = 0
    dyn_ratios = []
    if config.dynamics_runs:
        sched = Scheduler.parse(config.scheduler)
        # dynamics needs a single family; above the exhaustive limit single additions drive it
        dyn_family = fams[0] if len(fams) == 1 else DeviationFamily.SINGLE_ADD
        for i in range(config.dynamics_runs):
            init = random_profile(n, p, kind, cands, seed=config.seed + i, density=config.density)
            trace = run_dynamics(init, cands, sched, dyn_family, config.max_rounds, eps=tol,
                                 exhaustive_limit=limit)
            if not trace.converged:
                continue
            dyn_conv += 1
            rep = certify_ne(trace.final, fams, cands, eps=tol, exhaustive_limit=limit)
            if not rep.stable:
                continue
            dyn_stable += 1
            g = realize(trace.final)
            violations += sum(not c.satisfied for c in bound_suite(g, rep))
            equilibria.append((trace.final, rep))
            dyn_ratios.append(g.social_cost() / pos.opt_cost)
    row.update(dyn_runs=config.dynamics_runs, dyn_converged=dyn_conv, dyn_stable=dyn_stable,
               dyn_max_ratio=max(dyn_ratios) if dyn_ratios else "")

    if equilibria:
        poa = poa_report(kind, n, p, equilibria)
        row["poa_ratio"] = poa.ratio
        if kind is GameKind.SUM:
            row["poa_bound"] = poa.bounds["thm7"]
            row["bound_curve"] = poa.bounds.get("cor10", poa.bounds["thm7"])
        else:
            row["poa_bound"] = poa.bounds["cube_root"]
            row["bound_curve"] = poa.bounds["explicit_half_price"]
    row["violations"] = violations


@dataclass
class ExperimentRecord:
    fingerprint: str
    rows: list
    wall_time: float = 0.0
    version: str = __version__
    config: str = ""

    def digest(self):
        """Hash of the deterministic content (excludes wall time)."""
        payload = json.dumps({"fingerprint": self.fingerprint, "rows": self.rows}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_json(self):
        return json.dumps({"fingerprint": self.fingerprint, "version": self.version,
                           "wall_time": self.wall_time, "config": self.config,
                           "rows": self.rows}, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(data["fingerprint"], data["rows"], data.get("wall_time", 0.0),
                   data.get("version", ""), data.get("config", ""))

    @property
    def violations(self):
        return sum(int(r["violations"] or 0) for r in self.rows)

    @property
    def unstable(self):
        return sum(1 for r in self.rows if r["stable"] is False)


def _worker(args):
    config, inst = args
    return run_instance(config, inst)


def run_experiment(config: ExperimentConfig, out_dir=None, workers=None) -> ExperimentRecord:
    """Run every instance; with ``out_dir`` rows are appended to ``rows.jsonl`` as they finish
    and an interrupted run resumes without recomputing or duplicating rows."""
    start = time.perf_counter()
    fp = config.fingerprint()
    instances = list(config.instances())
    done = {}
    rows_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows_path = out_dir / "rows.jsonl"
        fp_path = out_dir / "config.fingerprint"
        if fp_path.exists() and fp_path.read_text().strip() != fp:
            raise InvalidConfig(f"{out_dir} holds results of a different configuration")
        fp_path.write_text(fp + "\n")
        (out_dir / "config.txt").write_text(config.canonical())
        if rows_path.exists():
            for line in rows_path.read_text().splitlines():
                if line.strip():
                    row = json.loads(line)
                    done[row_key(row)] = row
    todo = [inst for inst in instances if (inst["price"], inst["n"]) not in done]
    log.info("%d instances, %d already done", len(instances), len(instances) - len(todo))
    workers = workers or os.cpu_count() or 1
    fh = open(rows_path, "a") if rows_path else None
    try:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = pool.map(_worker, [(config, inst) for inst in todo])
                for row in results:
                    _store(row, done, fh)
        else:
            for inst in todo:
                _store(run_instance(config, inst), done, fh)
    finally:
        if fh:
            fh.close()
    rows = [done[(inst["price"], inst["n"])] for inst in instances]
    record = ExperimentRecord(fp, rows, time.perf_counter() - start, __version__, config.canonical())
    if out_dir is not None:
        (out_dir / "record.json").write_text(record.to_json())
        report(record, "csv", out_dir / "rows.csv")
    return record


def _store(row, done, fh):
    done[row_key(row)] = row
    if fh:
        fh.write(json.dumps(row, sort_keys=True) + "\n")
        fh.flush()


# -- reporting ---------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([_cell(r.get(c, "")) for c in COLUMNS])
    return buf.getvalue()


BOUND_CONSTANT = 8.0


def write_svg(rows, path):
    """Ratio against the swept parameter (alpha, else n), one line per n, with C*bound overlaid."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    use_alpha = any(r["alpha"] != "" for r in rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = {}
    for r in rows:
        if r["poa_ratio"] == "":
            continue
        key = r["n"] if use_alpha else r["alpha"]
        groups.setdefault(key, []).append(r)
    for key, rs in sorted(groups.items(), key=lambda kv: str(kv[0])):
        rs.sort(key=lambda r: float(r["alpha"] if use_alpha else r["n"]))
        xs = [float(r["alpha"] if use_alpha else r["n"]) for r in rs]
        ax.plot(xs, [float(r["poa_ratio"]) for r in rs], marker="o",
                label=f"n={key}" if use_alpha else "ratio")
    if groups:
        last = max(groups, key=lambda k: float(k) if k != "" else 0)
        rs = groups[last]
        xs = [float(r["alpha"] if use_alpha else r["n"]) for r in rs]
        ax.plot(xs, [BOUND_CONSTANT * float(r["bound_curve"]) for r in rs], "k--",
                label=f"{BOUND_CONSTANT:g} x bound")
    ax.set_xlabel("alpha" if use_alpha else "n")
    ax.set_ylabel("NE cost / OPT")
    if use_alpha:
        ax.set_xscale("log")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def report(record: ExperimentRecord, fmt, path):
    path = Path(path)
    if fmt == "csv":
        path.write_text(rows_to_csv(record.rows))
    elif fmt == "json":
        path.write_text(record.to_json())
    elif fmt == "svg":
        write_svg(record.rows, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path

