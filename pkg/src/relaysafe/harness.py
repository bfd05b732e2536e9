"""Seeded experiment engine behind the command-line interface.

Every command is a pure function of (config, seed): designs land in an
append-only JSONL log keyed by (method, gamma_db, channel) so that an
interrupted run resumes without recomputing, and each command distills
the log into canonical CSV files whose bytes depend only on the config.
Wall-clock runtimes stay in the JSONL log and out of the CSVs.
"""

import dataclasses
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, bernstein, extract, model, moment, tightness
from .conic import OPTIMAL, SolverConfig, eigengap_rank, solve

METHODS = ("NR", "M4", "M2", "B2")

# satisfaction-histogram lower edges; the final catch-all bin is [0, 0.990]
BIN_EDGES = tuple(round(0.999 - 0.001 * k, 3) for k in range(10))


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: Path
    methods: Tuple[str, ...] = METHODS
    gamma_db: Tuple[float, ...] = (3.0, 6.0, 9.0, 12.0, 15.0)
    rho: float = 0.1
    eps2: float = 0.002
    eta2: float = 0.002
    n_relays: int = 4
    p_t: float = 10.0
    sigma2: float = 0.25
    sigma_v2: float = 0.25
    n_channels: int = 100
    n_perts: int = 1000
    n_randomizations: int = 1000
    n_instances: int = 10000
    seed: int = 2024
    # evaluation-time overrides; design stays at the nominal values
    sigma2_hat: Optional[float] = None
    eps2_hat: Optional[float] = None
    eta2_hat: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "gamma_db", tuple(float(g) for g in self.gamma_db))
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {METHODS}")
        if not self.gamma_db:
            raise ValueError("gamma grid must be nonempty")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if min(self.eps2, self.eta2) < 0.0:
            raise ValueError("error powers must be nonnegative")
        if min(self.n_channels, self.n_perts, self.n_randomizations,
               self.n_instances) < 1:
            raise ValueError("counts must be >= 1")

    def params_at(self, gamma_db: float) -> model.SystemParams:
        return model.SystemParams(
            L=self.n_relays,
            p_t=self.p_t,
            gamma=10.0 ** (gamma_db / 10.0),
            rho=self.rho,
            sigma_v2=self.sigma_v2,
            sigma2=self.sigma2,
        )

    def scenario(self, params: model.SystemParams, channel: int) -> model.ChannelScenario:
        return model.sample_channel(
            params, (self.seed, channel),
            eps=math.sqrt(self.eps2), eta=math.sqrt(self.eta2))


@dataclass
class DesignRecord:
    method: str
    gamma_db: float
    channel: int
    status: str
    objective: Optional[float] = None
    rank: Optional[int] = None
    power: Optional[float] = None
    source: Optional[str] = None
    n_feasible: Optional[int] = None
    scale: Optional[float] = None
    outage_exact: Optional[float] = None
    outage_quad: Optional[float] = None
    runtime: Optional[float] = None
    W: Optional[list] = None
    w: Optional[list] = None
    message: str = ""

    @property
    def key(self) -> Tuple[str, float, int]:
        return (self.method, round(float(self.gamma_db), 6), self.channel)

    def design_matrix(self) -> Optional[np.ndarray]:
        """Final (extracted if available, else relaxed) design matrix."""
        if self.w is not None:
            wv = np.array([re + 1j * im for re, im in self.w])
            return np.outer(wv, wv.conj())
        if self.W is not None:
            return np.array([[re + 1j * im for re, im in row] for row in self.W])
        return None


def build_method(name: str, sc: model.ChannelScenario, params: model.SystemParams):
    """Program, solution-to-matrix reader, and margin checker for a method."""
    if name == "NR":
        prog, var = moment.nonrobust_design_program(sc, params)
        return prog, var.to_matrix, moment.NonrobustConstraint(sc, params)
    if name == "M4":
        prog, var = moment.moment_design_program(sc, params, order=4)
        return prog, var.to_matrix, moment.MomentConstraint(sc, params, order=4)
    if name == "M2":
        prog, var = moment.moment_design_program(sc, params, order=2)
        return prog, var.to_matrix, moment.MomentConstraint(sc, params, order=2)
    if name == "B2":
        bp = bernstein.bernstein_design_program(sc, params)
        n_w = params.L ** 2
        return bp.program, (lambda x: bp.var.to_matrix(x[:n_w])), \
            bernstein.BernsteinConstraint(sc, params)
    raise ValueError(f"unknown method {name!r}")


def _c2j(A: np.ndarray) -> list:
    A = np.atleast_2d(A)
    return [[[float(v.real), float(v.imag)] for v in row] for row in A]


def design_one(config: ExperimentConfig, name: str, gamma_db: float,
               channel: int) -> DesignRecord:
    """Solve, extract, and evaluate one (method, gamma, channel) cell."""
    params = config.params_at(gamma_db)
    sc = config.scenario(params, channel)
    t0 = time.perf_counter()
    prog, read_matrix, checker = build_method(name, sc, params)
    sol = solve(prog, SolverConfig())
    rec = DesignRecord(method=name, gamma_db=gamma_db, channel=channel,
                       status=sol.status, message=sol.message)
    if sol.status != OPTIMAL:
        rec.runtime = time.perf_counter() - t0
        return rec
    W = model.hermitize(read_matrix(sol.x))
    rec.objective = float(sol.obj)
    rec.rank = eigengap_rank(W)
    rec.W = _c2j(W)
    ext_seed = (config.seed, channel, int(round(gamma_db * 1000)),
                METHODS.index(name))
    used = W
    try:
        res = extract.extract(W, checker, n_samples=config.n_randomizations,
                              seed=ext_seed)
        rec.power = res.power
        rec.source = res.source
        rec.n_feasible = res.n_feasible
        rec.scale = res.scale
        rec.w = [[float(v.real), float(v.imag)] for v in res.w]
        used = np.outer(res.w, res.w.conj())
    except extract.NoFeasibleCandidate:
        rec.source = "none"
        rec.n_feasible = 0
    # all methods at a channel share one perturbation batch
    pert_seed = (config.seed, channel)
    rec.outage_exact = model.outage_rate(used, sc, params, config.n_perts,
                                         pert_seed, mode="exact")
    rec.outage_quad = model.outage_rate(used, sc, params, config.n_perts,
                                        pert_seed, mode="quadratic")
    rec.runtime = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------- plumbing

def _log_path(config: ExperimentConfig) -> Path:
    return config.out_dir / "designs.jsonl"


def _load_log(path: Path) -> Dict[tuple, DesignRecord]:
    done: Dict[tuple, DesignRecord] = {}
    if not path.exists():
        return done
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = DesignRecord(**json.loads(line))
            done[rec.key] = rec
    return done


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(config: ExperimentConfig, command: str) -> None:
    path = config.out_dir / "manifest.json"
    data = {}
    if path.exists():
        data = json.loads(path.read_text(encoding="utf-8"))
    cfg = dataclasses.asdict(config)
    cfg["out_dir"] = str(cfg["out_dir"])
    cfg["methods"] = list(cfg["methods"])
    cfg["gamma_db"] = list(cfg["gamma_db"])
    data[command] = {"config": cfg, "seed": config.seed, "version": __version__}
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


DESIGN_HEADER = ("method", "gamma_db", "channel", "status", "objective",
                 "rank", "power", "source", "n_feasible", "scale",
                 "outage_exact", "outage_quad")


def run_design(config: ExperimentConfig) -> List[DesignRecord]:
    """Solve every requested cell, resuming from the JSONL log."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    log = _log_path(config)
    done = _load_log(log)
    records: List[DesignRecord] = []
    with open(log, "a", encoding="utf-8") as fh:
        for gamma_db in config.gamma_db:
            for channel in range(config.n_channels):
                for name in config.methods:
                    key = (name, round(float(gamma_db), 6), channel)
                    rec = done.get(key)
                    if rec is None:
                        rec = design_one(config, name, gamma_db, channel)
                        fh.write(json.dumps(dataclasses.asdict(rec)) + "\n")
                        fh.flush()
                        done[key] = rec
                    records.append(rec)
    rows = [[getattr(r, f) for f in DESIGN_HEADER]
            for r in sorted(records, key=lambda r: r.key)]
    _write_csv(config.out_dir / "design.csv", DESIGN_HEADER, rows)
    _write_manifest(config, "design")
    return records


def _feasible(records: Sequence[DesignRecord]) -> List[DesignRecord]:
    return [r for r in records if r.status == OPTIMAL]


def _require_designs(config: ExperimentConfig) -> List[DesignRecord]:
    done = _load_log(_log_path(config))
    wanted = []
    for gamma_db in config.gamma_db:
        for channel in range(config.n_channels):
            for name in config.methods:
                key = (name, round(float(gamma_db), 6), channel)
                if key not in done:
                    raise FileNotFoundError(
                        f"design results missing for {key}; run design first")
                wanted.append(done[key])
    return wanted


def bin_satisfaction(values: Sequence[float]) -> List[int]:
    """Histogram counts over (0.999, 1], (0.998, 0.999], ..., [0, 0.990]."""
    counts = [0] * (len(BIN_EDGES) + 1)
    for s in values:
        for i, lo in enumerate(BIN_EDGES):
            if s > lo:
                counts[i] += 1
                break
        else:
            counts[-1] += 1
    return counts


def bin_labels() -> List[str]:
    labels = [f"({lo:.3f},{lo + 0.001:.3f}]" for lo in BIN_EDGES]
    labels.append(f"[0,{BIN_EDGES[-1]:.3f}]")
    return labels


def run_validate(config: ExperimentConfig, mode: str = "exact"
                 ) -> Dict[tuple, dict]:
    """Satisfaction histograms and summaries from stored designs."""
    if mode not in ("exact", "quadratic"):
        raise ValueError("mode must be 'exact' or 'quadratic'")
    records = _require_designs(config)
    field = "outage_exact" if mode == "exact" else "outage_quad"
    out: Dict[tuple, dict] = {}
    for gamma_db in config.gamma_db:
        for name in config.methods:
            feas = [r for r in _feasible(records)
                    if r.method == name and r.gamma_db == gamma_db]
            sats = [1.0 - getattr(r, field) for r in feas
                    if getattr(r, field) is not None]
            out[(name, gamma_db)] = {
                "n_feasible": len(sats),
                "counts": bin_satisfaction(sats),
                "mean": float(np.mean(sats)) if sats else float("nan"),
                "min": float(np.min(sats)) if sats else float("nan"),
            }
    hdr = ["method", "gamma_db", "mode", "bin", "count"]
    rows = []
    for (name, gamma_db), res in sorted(out.items()):
        for label, cnt in zip(bin_labels(), res["counts"]):
            rows.append([name, gamma_db, mode, label, cnt])
    _write_csv(config.out_dir / "validation.csv", hdr, rows)
    hdr2 = ["method", "gamma_db", "mode", "n_feasible", "mean_satisfaction",
            "min_satisfaction"]
    rows2 = [[name, gamma_db, mode, res["n_feasible"], res["mean"], res["min"]]
             for (name, gamma_db), res in sorted(out.items())]
    _write_csv(config.out_dir / "validation_summary.csv", hdr2, rows2)
    _write_manifest(config, "validate")
    return out


def run_tables(config: ExperimentConfig) -> List[dict]:
    """Feasibility, rank distribution, and randomization success rates."""
    records = _require_designs(config)
    L = config.n_relays
    out = []
    for gamma_db in config.gamma_db:
        for name in config.methods:
            cell = [r for r in records
                    if r.method == name and r.gamma_db == gamma_db]
            feas = _feasible(cell)
            row = {
                "method": name,
                "gamma_db": gamma_db,
                "n_channels": len(cell),
                "feasibility": len(feas) / len(cell) if cell else float("nan"),
            }
            for k in range(1, L + 1):
                bucket = [r for r in feas if r.rank == k]
                row[f"rank{k}_share"] = (
                    len(bucket) / len(feas) if feas else float("nan"))
                if k >= 2:
                    # randomization success among rank-k solutions
                    row[f"rank{k}_rand"] = (
                        sum(1 for r in bucket if (r.n_feasible or 0) > 0)
                        / len(bucket) if bucket else float("nan"))
            out.append(row)
    hdr = ["method", "gamma_db", "n_channels", "feasibility"]
    hdr += [f"rank{k}_share" for k in range(1, L + 1)]
    hdr += [f"rank{k}_rand" for k in range(2, L + 1)]
    rows = [[("NaN" if isinstance(r.get(hh), float) and math.isnan(r.get(hh))
              else r.get(hh)) for hh in hdr] for r in out]
    _write_csv(config.out_dir / "tables.csv", hdr, rows)
    _write_manifest(config, "tables")
    return out


def run_mismatch(config: ExperimentConfig) -> List[dict]:
    """Re-evaluate stored designs under overridden noise / error scales."""
    records = _require_designs(config)
    s2h = config.sigma2_hat if config.sigma2_hat is not None else config.sigma2
    e2h = config.eps2_hat if config.eps2_hat is not None else config.eps2
    n2h = config.eta2_hat if config.eta2_hat is not None else config.eta2
    out = []
    for rec in records:
        if rec.status != OPTIMAL:
            continue
        W = rec.design_matrix()
        params = config.params_at(rec.gamma_db)
        params_hat = dataclasses.replace(params, sigma_v2=s2h,
                                         sigma2=np.full(config.n_relays, s2h))
        sc = config.scenario(params, rec.channel)
        sc_hat = dataclasses.replace(sc, eps=math.sqrt(e2h), eta=math.sqrt(n2h))
        outage = model.outage_rate(W, sc_hat, params_hat, config.n_perts,
                                   (config.seed, rec.channel), mode="exact")
        sat = 1.0 - outage
        out.append({
            "method": rec.method,
            "gamma_db": rec.gamma_db,
            "channel": rec.channel,
            "sigma2_hat": s2h,
            "eps2_hat": e2h,
            "eta2_hat": n2h,
            "satisfaction": sat,
            "outage_event": int(sat < 1.0 - config.rho),
        })
    hdr = ["method", "gamma_db", "channel", "sigma2_hat", "eps2_hat",
           "eta2_hat", "satisfaction", "outage_event"]
    rows = [[r[hh] for hh in hdr]
            for r in sorted(out, key=lambda r: (r["method"], r["gamma_db"],
                                                r["channel"]))]
    _write_csv(config.out_dir / "mismatch.csv", hdr, rows)
    hdr2 = ["method", "gamma_db", "n_evaluated", "outage_events"]
    rows2 = []
    for gamma_db in config.gamma_db:
        for name in config.methods:
            cell = [r for r in out
                    if r["method"] == name and r["gamma_db"] == gamma_db]
            if cell:
                rows2.append([name, gamma_db, len(cell),
                              sum(r["outage_event"] for r in cell)])
    _write_csv(config.out_dir / "mismatch_summary.csv", hdr2, rows2)
    _write_manifest(config, "mismatch")
    return out


def run_tightness(config: ExperimentConfig,
                  rho_grid: Optional[Sequence[float]] = None) -> List[dict]:
    """Dominance sweep of random Gaussian quadratics over a rho grid."""
    lo, hi = tightness.rho_window()
    if rho_grid is None:
        inside = np.exp(np.linspace(np.log(lo) + 1e-9, np.log(hi) - 1e-9, 20))
        rho_grid = [float(r) for r in inside] + [0.001, 0.1]
    rng = model.stream(config.seed, 0x716)
    quads = []
    for _ in range(config.n_instances):
        m = int(rng.integers(1, 9))
        B = rng.standard_normal((m, m))
        quads.append(tightness.GaussianQuadratic(
            quad=(B + B.T) / 2.0, lin=rng.standard_normal(m)))
    out = []
    for rho in rho_grid:
        margins = []
        viol = 0
        for q in quads:
            rep = tightness.check_dominance(q, rho)
            margins.append(rep.moment_threshold - rep.bernstein_threshold)
            viol += not rep.dominated
        out.append({
            "rho": float(rho),
            "in_window": int(lo < rho < hi),
            "n_instances": len(quads),
            "violations": viol,
            "min_margin": float(np.min(margins)),
            "mean_margin": float(np.mean(margins)),
        })
    hdr = ["rho", "in_window", "n_instances", "violations", "min_margin",
           "mean_margin"]
    config.out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(config.out_dir / "tightness.csv", hdr,
               [[r[hh] for hh in hdr] for r in out])
    _write_manifest(config, "tightness")
    return out
