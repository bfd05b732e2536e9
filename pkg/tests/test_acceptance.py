"""End-to-end acceptance battery.

One test per headline guarantee, each emitting a single pass/fail line.
The expensive design sweeps are shared session fixtures; everything is
seeded, so reruns are bit-for-bit repeatable.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from relaysafe import bernstein, harness, model, moment, tightness
from relaysafe.conic import eigengap_rank, solver

from helpers import make_case, rand_psd, rand_pert
from test_conic import HAND_CASES

RHO = 0.1
SAFETY_GATE = RHO + 3.0 * math.sqrt(RHO / 1e4)


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" [{detail}]" if detail else ""),
          flush=True)
    assert ok, f"{name}: {detail}"


# ------------------------------------------------------------------ batteries

@pytest.fixture(scope="session")
def battery_a(tmp_path_factory):
    """1000-channel moment designs in the high-target low-error regime."""
    cfg = harness.ExperimentConfig(
        out_dir=tmp_path_factory.mktemp("battery_a"),
        methods=("M4", "M2"), gamma_db=(18.0,), rho=RHO,
        eps2=0.002, eta2=0.002, n_channels=1000, n_perts=10000,
        n_randomizations=1000, seed=2024)
    return cfg, harness.run_design(cfg)


@pytest.fixture(scope="session")
def battery_b(tmp_path_factory):
    """100-channel baseline and quadratic-restriction designs, same regime."""
    cfg = harness.ExperimentConfig(
        out_dir=tmp_path_factory.mktemp("battery_b"),
        methods=("NR", "B2"), gamma_db=(18.0,), rho=RHO,
        eps2=0.002, eta2=0.002, n_channels=100, n_perts=1000,
        n_randomizations=1000, seed=2024)
    return cfg, harness.run_design(cfg)


@pytest.fixture(scope="session")
def battery_c(tmp_path_factory):
    """Tiny-outage sweep where only the quadratic restriction stays alive."""
    cfg = harness.ExperimentConfig(
        out_dir=tmp_path_factory.mktemp("battery_c"),
        methods=("M2", "B2"), gamma_db=(3.0, 6.0, 9.0, 12.0, 15.0),
        rho=0.00044, eps2=0.0005, eta2=0.0005, n_channels=100,
        n_perts=50, n_randomizations=300, seed=2024)
    return cfg, harness.run_design(cfg)


@pytest.fixture(scope="session")
def battery_d(tmp_path_factory):
    """Strong-error sweep used for the power-ordering comparison."""
    cfg = harness.ExperimentConfig(
        out_dir=tmp_path_factory.mktemp("battery_d"),
        methods=("NR", "M4", "M2", "B2"), gamma_db=(3.0, 6.0, 9.0, 12.0, 15.0),
        rho=RHO, eps2=0.06, eta2=0.06, n_channels=100,
        n_perts=50, n_randomizations=1000, seed=2024)
    return cfg, harness.run_design(cfg)


def _rates(records, method):
    out = {}
    for r in records:
        if r.method != method:
            continue
        n_ok, n = out.get(r.gamma_db, (0, 0))
        out[r.gamma_db] = (n_ok + (r.status == "optimal"), n + 1)
    return {g: ok / n for g, (ok, n) in out.items()}


# ------------------------------------------------------------------ criteria

def test_criterion_01_dominance_sweep():
    t0 = time.perf_counter()
    rng = model.stream(2024, 0x716)
    lo, hi = tightness.rho_window()
    rhos = np.exp(np.linspace(np.log(lo) + 1e-9, np.log(hi) - 1e-9, 20))
    quads = []
    for _ in range(10000):
        m = int(rng.integers(1, 9))
        B = rng.standard_normal((m, m))
        quads.append(tightness.GaussianQuadratic(
            quad=(B + B.T) / 2.0, lin=rng.standard_normal(m)))
    violations = 0
    for q in quads:
        for rho in rhos:
            rep = tightness.check_dominance(q, float(rho))
            violations += not rep.dominated
    dt = time.perf_counter() - t0
    _report("criterion 01 threshold dominance on the rho window",
            violations == 0 and dt < 10.0,
            f"0 of {len(quads) * len(rhos)} comparisons violated, {dt:.1f}s"
            if violations == 0 else f"{violations} violations, {dt:.1f}s")


def test_criterion_02_decomposition_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_exact = worst_quad = 0.0
    for trial in range(1000):
        sc, params = make_case(L=2 + trial % 4, channel=trial,
                               eps2=0.002 + 0.06 * (trial % 3) / 2.0)
        W = rand_psd(rng, params.L, rng.uniform(0.2, 30.0))
        pert = rand_pert(rng, params.L)
        a0 = model.nominal_margin(W, sc, params)

        lhs = model.hdot(W, moment.centered_deficit_matrix(pert, sc, params))
        rhs = model.snr_deficit(W, pert, sc, params) + a0
        worst_exact = max(worst_exact,
                          abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))

        qf = bernstein.margin_quadratic(W, sc, params)
        val = qf.eval(bernstein.standardized_vector(pert))
        table = a0 - model.hdot(W, moment.centered_deficit_matrix(
            pert, sc, params, order=2))
        ts = np.array([1.0, 2.0, 3.0, 4.0])
        vals = [model.hdot(W, moment.centered_deficit_matrix(
            model.Perturbation(t * pert.x, t * pert.y), sc, params))
            for t in ts]
        coeff = np.linalg.solve(np.vander(ts, 5, increasing=True)[:, 1:], vals)
        fit = a0 - (coeff[0] + coeff[1])
        scale = max(1.0, abs(val), abs(table), abs(fit))
        worst_quad = max(worst_quad, abs(val - table) / scale,
                         abs(val - fit) / scale)
    dt = time.perf_counter() - t0
    _report("criterion 02 decomposition equals direct evaluation",
            worst_exact <= 1e-9 and worst_quad <= 1e-8 and dt < 30.0,
            f"max rel err {worst_exact:.1e} quartic / {worst_quad:.1e} "
            f"quadratic over 1000 draws, {dt:.1f}s")


def test_criterion_03_second_moment_vs_monte_carlo():
    t0 = time.perf_counter()
    sc, params = make_case(L=2, channel=1, eps2=0.004)
    rels = {}
    for order in (4, 2):
        emp = np.zeros((4, 4), dtype=complex)
        total = 0
        for chunk in range(4):
            X, Y = model.sample_perturbations(2, 250000, (6, order, chunk))
            V = moment.centered_deficit_batch(X, Y, sc, params,
                                              order=order).reshape(-1, 4)
            emp += V.T @ V.conj()
            total += len(V)
        emp /= total
        U = moment.second_moment_matrix(
            moment.wick_coefficients(sc, params, order)).matrix
        rels[order] = float(np.linalg.norm(emp - U) / np.linalg.norm(U))
    dt = time.perf_counter() - t0
    _report("criterion 03 closed-form second moment matches Monte-Carlo",
            max(rels.values()) <= 0.02 and dt < 120.0,
            f"rel Frobenius err {rels[4]:.4f} quartic / {rels[2]:.4f} "
            f"quadratic at 1e6 draws, {dt:.0f}s")


def test_criterion_04_tail_constants():
    ok = (moment.tail_order(0.1) == 2.0
          and abs(moment.tail_order(math.exp(-8.0))
                  - (2.0 + 2.0 * math.sqrt(2.0))) <= 1e-12
          and moment.tail_factor(0.25) == 2.0)
    _report("criterion 04 tail order and factor spot values", ok,
            "q(0.1)=2, q(exp(-8))=2+2sqrt(2), c(0.25)=2")


def test_criterion_05_empirical_safety(battery_a, battery_b):
    cfg_a, recs_a = battery_a
    cfg_b, recs_b = battery_b
    worst = {"M4": 0.0, "M2": 0.0, "B2": 0.0}
    n = {"M4": 0, "M2": 0, "B2": 0}
    for rec in recs_a + recs_b:
        if rec.status != "optimal" or rec.channel >= 100:
            continue
        if rec.method == "NR":
            continue
        cfg = cfg_a if rec.method in ("M4", "M2") else cfg_b
        params = cfg.params_at(rec.gamma_db)
        sc = cfg.scenario(params, rec.channel)
        mode = "exact" if rec.method == "M4" else "quadratic"
        out = model.outage_rate(rec.design_matrix(), sc, params, 10000,
                                (7777, rec.channel), mode=mode)
        worst[rec.method] = max(worst[rec.method], out)
        n[rec.method] += 1
    ok = (max(worst.values()) <= SAFETY_GATE
          and min(n["M4"], n["B2"]) >= 50)
    _report("criterion 05 chance constraint holds for every feasible design",
            ok, f"worst outage M4 {worst['M4']:.4f} exact, M2 {worst['M2']:.4f}"
            f" / B2 {worst['B2']:.4f} quadratic vs gate {SAFETY_GATE:.4f} "
            f"({n['M4']}+{n['M2']}+{n['B2']} designs x 1e4 draws)")


def test_criterion_06_conservatism_at_tiny_outage(battery_c):
    cfg, recs = battery_c
    r_b2 = _rates(recs, "B2")
    r_m2 = _rates(recs, "M2")
    mutual_b2, mutual_m2 = [], []
    by_key = {r.key: r for r in recs}
    for g in cfg.gamma_db:
        for ch in range(cfg.n_channels):
            rb = by_key[("B2", g, ch)]
            rm = by_key[("M2", g, ch)]
            if rb.status == "optimal" and rm.status == "optimal":
                mutual_b2.append(rb.power)
                mutual_m2.append(rm.power)
    ok = (min(r_b2.values()) >= 0.9 and max(r_m2.values()) <= 0.2
          and len(mutual_b2) > 0
          and float(np.mean(mutual_b2)) <= float(np.mean(mutual_m2)))
    _report("criterion 06 quadratic restriction dominates at rho=0.00044", ok,
            f"B2 rate >= {min(r_b2.values()):.2f}, M2 rate <= "
            f"{max(r_m2.values()):.2f}, mean power {np.mean(mutual_b2):.2f} "
            f"vs {np.mean(mutual_m2):.2f} on {len(mutual_b2)} mutual cells")


def test_criterion_07_power_ordering(battery_d):
    cfg, recs = battery_d
    by_key = {r.key: r for r in recs}
    powers = {m: [] for m in cfg.methods}
    cells = 0
    for g in cfg.gamma_db:
        for ch in range(cfg.n_channels):
            cell = [by_key[(m, g, ch)] for m in cfg.methods]
            if any(r.status != "optimal" or r.power is None for r in cell):
                continue
            cells += 1
            for r in cell:
                powers[r.method].append(r.power)
    means = {m: float(np.mean(powers[m])) for m in cfg.methods}
    order = ["NR", "B2", "M2", "M4"]
    gaps = [means[b] - means[a] for a, b in zip(order, order[1:])]
    slack = 0.01 * max(means.values())
    ok = cells >= 30 and all(g >= -slack for g in gaps)
    _report("criterion 07 restrictions pay increasing power premiums", ok,
            "mean power " + " <= ".join(f"{m} {means[m]:.2f}" for m in order)
            + f" over {cells} all-feasible cells")


def test_criterion_08_nonrobust_is_a_coin_flip(battery_a, battery_b):
    _, recs_a = battery_a
    _, recs_b = battery_b
    sats = {}
    for m, recs in (("M4", recs_a), ("M2", recs_a),
                    ("NR", recs_b), ("B2", recs_b)):
        vals = [1.0 - r.outage_exact for r in recs
                if r.method == m and r.status == "optimal"
                and r.outage_exact is not None]
        sats[m] = float(np.mean(vals))
    ok = (0.35 <= sats["NR"] <= 0.65
          and min(sats["M4"], sats["M2"], sats["B2"]) >= 0.99)
    _report("criterion 08 plain design misses its target half the time", ok,
            f"mean satisfaction NR {sats['NR']:.3f} vs M4 {sats['M4']:.4f}, "
            f"M2 {sats['M2']:.4f}, B2 {sats['B2']:.4f}")


def test_criterion_09_mismatch_robustness(battery_a):
    cfg, recs = battery_a
    mutual = {ch for ch in range(cfg.n_channels)
              if all(r.status == "optimal" for r in recs
                     if r.channel == ch)}
    details = []
    ok = len(mutual) >= 500
    for override in (dict(sigma2_hat=0.265), dict(eps2_hat=0.0032,
                                                  eta2_hat=0.0032)):
        rows = harness.run_mismatch(dataclasses.replace(cfg, **override))
        events = {"M4": 0, "M2": 0}
        for row in rows:
            if row["channel"] in mutual:
                events[row["method"]] += row["outage_event"]
        ok = ok and events["M4"] <= events["M2"]
        tag = "sigma2" if "sigma2_hat" in override else "eps2"
        details.append(f"{tag} override: M4 {events['M4']} vs M2 "
                       f"{events['M2']} events")
    _report("criterion 09 quartic design survives model mismatch better", ok,
            f"{len(mutual)} mutually feasible channels; " + "; ".join(details))


def test_criterion_10_solver_battery():
    t0 = time.perf_counter()
    bad = []
    for name, build, status, obj in HAND_CASES:
        sol = solver.solve(build())
        good = sol.status == status
        if good and obj is not None:
            good = abs(sol.obj - obj) <= 1e-6 * max(1.0, abs(obj))
        if not good:
            bad.append(name)
    dt = time.perf_counter() - t0
    _report("criterion 10 hand-solvable conic battery", not bad and dt < 5.0,
            f"{len(HAND_CASES)} instances incl. infeasible verdicts, {dt:.2f}s"
            if not bad else f"failed: {bad}")


def test_criterion_11_rank_detection():
    got = (eigengap_rank(np.diag([1.0, 1e-5, 1e-9, 1e-9])),
           eigengap_rank(np.diag([1.0, 1.0, 1.0, 1.0])),
           eigengap_rank(np.diag([1.0, 2e-4, 1e-9, 0.0])))
    _report("criterion 11 eigengap rank rule", got == (1, 4, 2),
            f"examples return {got}")


# ---------------------------------------------------------- published bands

def test_band_feasibility_at_18db(battery_a):
    _, recs = battery_a
    rate = _rates(recs, "M4")[18.0]
    _report("band: quartic feasibility rate over 1000 channels",
            0.80 <= rate <= 0.93, f"rate {rate:.3f} in [0.80, 0.93]")


def test_band_satisfaction_histogram_top_bin(battery_a):
    _, recs = battery_a
    ok = True
    detail = []
    for m in ("M4", "M2"):
        sats = [1.0 - r.outage_exact for r in recs
                if r.method == m and r.status == "optimal"]
        share = float(np.mean([s > 0.998 for s in sats]))
        ok = ok and share >= 0.98
        detail.append(f"{m} {share:.3f}")
    _report("band: satisfaction mass above 0.998", ok,
            ", ".join(detail) + " (need >= 0.98)")


def test_band_rates_at_3db_strong_errors(battery_d):
    _, recs = battery_d
    b2 = _rates(recs, "B2")[3.0]
    m2 = _rates(recs, "M2")[3.0]
    _report("band: 3 dB feasibility split under strong errors",
            b2 >= 0.55 and m2 <= 0.55,
            f"B2 {b2:.2f} >= 0.55, M2 {m2:.2f} <= 0.55")


def test_band_rank_one_share(battery_d):
    _, recs = battery_d
    ok = True
    detail = []
    for m in ("M4", "M2"):
        feas = [r for r in recs if r.method == m and r.status == "optimal"]
        share = float(np.mean([r.rank == 1 for r in feas]))
        ok = ok and share >= 0.95
        detail.append(f"{m} {share:.3f}")
    _report("band: relaxations come back essentially rank-one", ok,
            ", ".join(detail) + " (need >= 0.95)")


def test_band_feasibility_monotone_in_target(battery_c, battery_d):
    ok = True
    detail = []
    for (_, recs), methods in ((battery_c, ("M2", "B2")),
                               (battery_d, ("NR", "M4", "M2", "B2"))):
        for m in methods:
            rates = _rates(recs, m)
            seq = [rates[g] for g in sorted(rates)]
            worst = max((b - a) for a, b in zip(seq, seq[1:]))
            ok = ok and worst <= 0.02
            detail.append(f"{m} {worst:+.2f}")
    _report("band: feasibility never rises with the SNR target (2pp slack)",
            ok, "worst upticks " + ", ".join(detail))


def test_band_mismatch_shifts_mass_down(battery_a):
    cfg, _ = battery_a
    nominal = harness.run_mismatch(cfg)
    shifted = harness.run_mismatch(dataclasses.replace(
        cfg, eps2_hat=0.0028, eta2_hat=0.0028))
    ok = True
    detail = []
    for m in ("M4", "M2"):
        m0 = float(np.mean([r["satisfaction"] for r in nominal
                            if r["method"] == m]))
        m1 = float(np.mean([r["satisfaction"] for r in shifted
                            if r["method"] == m]))
        ok = ok and m1 <= m0 + 1e-12
        detail.append(f"{m} {m0:.5f} -> {m1:.5f}")
    _report("band: underestimated errors drag satisfaction down", ok,
            ", ".join(detail))
