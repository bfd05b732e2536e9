import numpy as np
import pytest

from relaysafe import bernstein, extract, model, moment

from helpers import make_case, solve_ok


def _solved_m4(channel=0, gamma_db=6.0, eps2=0.002):
    sc, params = make_case(channel=channel, gamma_db=gamma_db, eps2=eps2)
    prog, var = moment.moment_design_program(sc, params, 4)
    sol = solve_ok(prog)
    W = model.hermitize(var.to_matrix(sol.x))
    return W, sol.obj, moment.MomentConstraint(sc, params, 4), sc, params


def _rank_two_feasible():
    """Blend the optimum with a rescaled matched-filter design."""
    W, obj, cons, sc, params = _solved_m4(channel=2)
    h = sc.f_bar * np.conj(sc.g_bar)
    Wmf = 50.0 * np.outer(h, h.conj())
    Wmf = cons.min_scale(Wmf) * Wmf * 1.05
    Wmix = 0.6 * W + 0.4 * Wmf
    assert cons.margin(Wmix) >= 0.0          # concave margin keeps the blend safe
    from relaysafe.conic import eigengap_rank
    assert eigengap_rank(Wmix) >= 2
    return Wmix, obj, cons


def test_rank_one_readoff():
    W, obj, cons, sc, params = _solved_m4()
    res = extract.extract(W, cons, n_samples=200, seed=(1, 2))
    assert res.source == extract.EIG_RANK_ONE
    assert res.n_feasible == 0
    Wr = np.outer(res.w, res.w.conj())
    assert np.linalg.norm(Wr - W) / np.linalg.norm(W) <= 1e-6
    assert res.power == pytest.approx(obj, rel=1e-6)
    assert res.power >= obj - 1e-6 * (1.0 + abs(obj))
    pm = model.average_power_matrix(sc, params)
    assert res.power == pytest.approx(model.hdot(pm, Wr), rel=1e-9)
    assert cons.margin(Wr) >= -1e-8 * (1.0 + abs(obj))


def test_randomized_path_minimal_rescale():
    Wmix, obj, cons = _rank_two_feasible()
    res = extract.extract(Wmix, cons, n_samples=400, seed=(3, 4))
    assert res.source == extract.RANDOMIZED
    assert 1 <= res.n_feasible <= 400
    Wf = np.outer(res.w, res.w.conj())
    scale = 1.0 + abs(res.power)
    # the winning candidate sits exactly on the constraint boundary
    assert cons.margin(Wf) == pytest.approx(0.0, abs=1e-8 * scale)
    assert cons.margin(0.99 * Wf) < 0.0
    # a rank-one feasible point can never beat the relaxed optimum
    assert res.power >= obj - 1e-6 * scale


def test_min_scale_matches_bisection():
    W, obj, cons, sc, params = _solved_m4(channel=5)
    rng = model.stream((9, 9), 0x8D1)
    lam, V = np.linalg.eigh(W)
    factor = V * np.sqrt(np.clip(lam, 0.0, None))
    checked = 0
    for _ in range(20):
        wj = model.complex_normal(rng, params.L) @ factor.T
        Wj = np.outer(wj, wj.conj())
        t_closed = cons.min_scale(Wj)
        if not np.isfinite(t_closed):
            continue
        lo, hi = 0.0, 10.0 * t_closed
        for _ in range(60):
            mid = (lo + hi) / 2.0
            if cons.margin(mid * Wj) < 0.0:
                lo = mid
            else:
                hi = mid
        assert t_closed == pytest.approx(hi, rel=1e-6)
        checked += 1
    assert checked >= 5


def test_extraction_deterministic():
    Wmix, _, cons = _rank_two_feasible()
    r1 = extract.extract(Wmix, cons, n_samples=100, seed=(5, 6))
    r2 = extract.extract(Wmix, cons, n_samples=100, seed=(5, 6))
    assert np.array_equal(r1.w, r2.w)
    assert r1.power == r2.power and r1.n_feasible == r2.n_feasible


def test_no_feasible_candidate_raises():
    Wmix, _, _ = _rank_two_feasible()
    sc, params = make_case(channel=2, gamma_db=60.0)
    hopeless = moment.MomentConstraint(sc, params, 4)
    with pytest.raises(extract.NoFeasibleCandidate):
        extract.extract(Wmix, hopeless, n_samples=50, seed=(7, 8))


def test_bernstein_checker_path():
    sc, params = make_case(channel=1, gamma_db=3.0, eps2=0.06)
    bp = bernstein.bernstein_design_program(sc, params)
    sol = solve_ok(bp.program)
    W = model.hermitize(bp.var.to_matrix(sol.x[:bp.var.n]))
    cons = bernstein.BernsteinConstraint(sc, params)
    res = extract.extract(W, cons, n_samples=200, seed=(2, 2))
    Wf = np.outer(res.w, res.w.conj())
    assert cons.margin(Wf) >= -1e-8 * (1.0 + abs(res.power))
    assert res.power >= sol.obj - 1e-6 * (1.0 + abs(sol.obj))
