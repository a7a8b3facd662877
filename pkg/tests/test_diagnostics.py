import numpy as np
import pytest

from vbscd import (
    BregmanGenerator,
    BregmanSchedule,
    SolverConfig,
    auto_neighborhood,
    compute_constants,
    contraction_audit,
    coordinate_prox,
    fit_linear_rate,
    in_neighborhood,
    make_regularizer,
    run,
)
from vbscd.diagnostics import (
    GridProxOracle,
    check_level_dominance,
    check_value_proximity,
    constants_for_schedule,
    enumerate_expectation,
    expectation_identities,
    make_check,
    write_report_csv,
)
from vbscd.instances import lasso_1d, lasso_random, quad_1d


def uniform_sched(n, q, eps):
    return BregmanSchedule.constant(n, q, eps)


# ---------------------------------------------------------------------------
# expectation identities


def test_identities_tight_on_random_lasso():
    p = lasso_random(n=12, n_blocks=4, seed=5)
    gen = BregmanGenerator.uniform(12, 1.2)
    eps = 0.5 * 0.9 / p.smooth.lipschitz
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.standard_normal(12)
        errs = expectation_identities(p, gen, eps, x)
        assert set(errs) == {"mean-point", "penalty-mixing", "squared-step"}
        for name, err in errs.items():
            assert err <= 1e-12, f"{name} error {err}"


def test_identities_tight_with_nonuniform_weights():
    p = lasso_random(n=10, n_blocks=5, seed=9)
    per_block = [0.8, 1.0, 1.3, 2.0, 0.9]
    weights = np.empty(10)
    for i, q in enumerate(per_block):
        weights[p.partition.block_slice(i)] = q
    gen = BregmanGenerator(weights)
    eps = 0.5 * min(per_block) / p.smooth.lipschitz
    rng = np.random.default_rng(1)
    for _ in range(10):
        errs = expectation_identities(p, gen, eps, rng.standard_normal(10))
        assert max(errs.values()) <= 1e-12


def test_enumeration_with_one_block_is_the_full_update():
    p = lasso_1d()
    gen = BregmanGenerator.uniform(1, 1.0)
    x = np.array([0.7])
    t = coordinate_prox(p, gen, 0.5, x, 0)
    via_mean = enumerate_expectation(p, gen, 0.5, x, lambda y: y.copy())
    assert np.allclose(via_mean, t, atol=1e-15)


# ---------------------------------------------------------------------------
# constants


def test_constants_worked_example():
    c = compute_constants(m=1.0, M=1.0, L=1.0, eps_lo=0.5, eps_hi=0.5,
                          N=2, c0=1.0, eta=1.0, nu=1.0)
    assert c.a == 0.5
    assert c.theta1 == 4.0
    assert c.theta2 == 2.5
    assert c.kappa == 40.0
    assert c.b == 322.0
    assert c.beta == 321.0 / 322.0
    assert c.n_min == 8.0
    assert c.level_window == 1.0 / 8.0


def test_constants_validation():
    good = dict(m=1.0, M=1.0, L=1.0, eps_lo=0.5, eps_hi=0.5, N=2, c0=1.0,
                eta=1.0, nu=1.0)
    with pytest.raises(ValueError, match="m <= M"):
        compute_constants(**{**good, "M": 0.5})
    with pytest.raises(ValueError, match="eps_hi"):
        compute_constants(**{**good, "eps_hi": 1.0})  # hits the m/L cap
    with pytest.raises(ValueError, match="eps_lo"):
        compute_constants(**{**good, "eps_lo": 0.9})  # eps_lo > eps_hi
    with pytest.raises(ValueError, match="N"):
        compute_constants(**{**good, "N": 0})
    with pytest.raises(ValueError, match="eta"):
        compute_constants(**{**good, "nu": 0.0})


def test_constants_for_schedule_pulls_schedule_data():
    p = lasso_random(n=8, n_blocks=4, seed=2)
    sched = uniform_sched(8, 1.0, 0.4 / p.smooth.lipschitz)
    c = constants_for_schedule(sched, p, c0=1.5, eta=2.0, nu=3.0)
    assert c.N == 4
    assert c.L == p.smooth.lipschitz
    assert c.eps_lo == c.eps_hi == sched.eps_lo
    assert c.c0 == 1.5


# ---------------------------------------------------------------------------
# neighborhood membership and the local checks


def test_in_neighborhood_uses_strict_value_window():
    p = quad_1d(0.0)
    x_bar = np.zeros(1)
    # the reference point itself fails the strict lower bound F(x) > f_bar
    assert not in_neighborhood(p, x_bar, x_bar, 0.0, radius=1.0, window=0.5)
    assert in_neighborhood(p, np.array([0.3]), x_bar, 0.0, radius=1.0, window=0.5)
    # outside the ball
    assert not in_neighborhood(p, np.array([1.5]), x_bar, 0.0, radius=1.0, window=9.0)
    # above the window
    assert not in_neighborhood(p, np.array([0.9]), x_bar, 0.0, radius=1.0, window=0.1)


def scalar_constants():
    return compute_constants(m=1.0, M=1.0, L=1.0, eps_lo=0.5, eps_hi=0.5,
                             N=1, c0=1.0, eta=1.0, nu=1.0)


def test_value_proximity_gates_on_hypothesis():
    p = quad_1d(0.0)
    gen = BregmanGenerator.uniform(1, 1.0)
    c = scalar_constants()
    far = check_value_proximity(p, gen, 0.5, np.array([5.0]), np.zeros(1), c)
    assert not far.hypothesis_met and far.rows == []


def test_value_proximity_rows_hold_on_scalar_quadratic():
    p = quad_1d(0.0)
    gen = BregmanGenerator.uniform(1, 1.0)
    c = scalar_constants()
    rep = check_value_proximity(p, gen, 0.5, np.array([0.3]), np.zeros(1), c)
    assert rep.hypothesis_met
    assert len(rep.rows) == 6
    assert all(r.passed for r in rep.rows)
    by_name = {r.name: r for r in rep.rows}
    # dist to the solution set is |x| = 0.3; theta1 * |T(x) - x| = 4 * 0.15
    r = by_name["i-sublevel-vs-step"]
    assert r.lhs == pytest.approx(0.3) and r.rhs == pytest.approx(0.6)
    # envelope gap vs distance: E(x) - f_bar <= theta2 * dist^2 = 2.5 * 0.09
    r = by_name["ii-envelope-vs-distance"]
    assert r.rhs == pytest.approx(2.5 * 0.3**2)


def test_level_dominance_flips_with_reference_level():
    p = quad_1d(0.0)
    gen = BregmanGenerator.uniform(1, 1.0)
    c = scalar_constants()
    x = np.array([0.3])
    ok = check_level_dominance(p, gen, 0.5, x, f_bar=0.0, constants=c,
                               x_bar=np.zeros(1))
    assert ok.holds and all(r.passed for r in ok.rows)
    # raise the "reference level" above F(T(x)) = 0.01125 and it must fail
    bad = check_level_dominance(p, gen, 0.5, x, f_bar=0.05, constants=c,
                                x_bar=np.zeros(1))
    assert not bad.holds


# ---------------------------------------------------------------------------
# contraction audit


def test_contraction_audit_on_small_lasso():
    p = lasso_random(n=6, n_blocks=3, seed=11)
    eps = 0.5 * 1.0 / p.smooth.lipschitz
    sched = uniform_sched(6, 1.0, eps)
    trajs = [
        run(p, SolverConfig(schedule=sched, max_iters=400, tolerance=0.0, seed=s),
            x0=0.05 * np.ones(6))
        for s in (0, 1)
    ]
    x_bar = trajs[0].records[-1].point
    f_bar = min(float(t.objectives().min()) for t in trajs)
    eta, nu = auto_neighborhood(p, sched, x_bar,
                                points=[t.x0 for t in trajs])
    c = constants_for_schedule(sched, p, c0=2.0, eta=eta, nu=nu)
    audit = contraction_audit(p, sched, trajs, x_bar, f_bar, c)
    assert audit.checked > 0
    assert audit.violations == 0
    assert audit.worst_margin >= -1e-9


def test_auto_neighborhood_covers_supplied_points():
    p = lasso_random(n=6, n_blocks=3, seed=11)
    sched = uniform_sched(6, 1.0, 0.4 / p.smooth.lipschitz)
    x_bar = np.zeros(6)
    pts = [np.full(6, 0.3), np.full(6, -0.2)]
    eta, nu = auto_neighborhood(p, sched, x_bar, points=pts)
    f_bar = p.objective(x_bar)
    for x in pts:
        assert np.linalg.norm(x - x_bar) <= eta / 2
        assert p.objective(x) - f_bar <= nu


# ---------------------------------------------------------------------------
# rate fitting


def test_fit_recovers_exact_geometric_decay():
    gaps = np.array([1.0, 0.5, 0.25, 0.125, 0.0625])
    rep = fit_linear_rate(gaps)
    assert rep.factor == pytest.approx(0.5, rel=1e-12)
    assert rep.r_squared == pytest.approx(1.0)
    assert (rep.window_start, rep.window_stop) == (0, 5)
    assert rep.contracting


def test_fit_flat_sequence_is_not_contracting():
    rep = fit_linear_rate(np.ones(10))
    assert rep.factor == pytest.approx(1.0)
    assert not rep.contracting


def test_fit_skips_burn_in_before_the_clean_decay():
    head = np.array([100.0, 90.0, 80.0])
    tail = 5.0 * 0.7 ** np.arange(12)
    rep = fit_linear_rate(np.concatenate([head, tail]))
    assert rep.window_start == 3
    assert rep.factor == pytest.approx(0.7, rel=1e-10)
    assert rep.r_squared > 0.999


def test_fit_window_stops_at_the_noise_floor():
    gaps = 0.5 ** np.arange(80)  # underflows past ~1e-14 around k = 47
    rep = fit_linear_rate(gaps)
    assert rep.window_stop < 60
    assert rep.factor == pytest.approx(0.5, rel=1e-9)


def test_fit_rejects_short_and_degenerate_input():
    with pytest.raises(ValueError, match="fewer than"):
        fit_linear_rate([1.0, 0.5, 0.25])
    with pytest.raises(ValueError, match="fewer than"):
        fit_linear_rate(np.full(10, 1e-20))  # everything under the floor
    with pytest.raises(ValueError, match="1-D"):
        fit_linear_rate(np.ones((3, 3)))


# ---------------------------------------------------------------------------
# grid prox oracle, check rows, report files


def test_grid_oracle_matches_soft_threshold():
    oracle = GridProxOracle(make_regularizer("l1", lam=1.0), lo=-5.0, hi=5.0, step=1e-4)
    t, val = oracle.query(2.0, 3.0)
    assert t == pytest.approx(2.5, abs=1e-4)
    assert val == pytest.approx(2.75, abs=1e-8)


def test_make_check_slack_and_verdict():
    ok = make_check("kernel", "sandwich", 1.0, 2.0, 1e-9)
    assert ok.slack == 1.0 and ok.passed
    bad = make_check("kernel", "fails", 2.5, 2.0, 0.1)
    assert bad.slack == -0.5 and not bad.passed


def test_report_csv_golden(tmp_path):
    rows = [
        make_check("kernel", "sandwich", 1.0, 2.0, 1e-9),
        make_check("kernel", "fails", 2.5, 2.0, 0.1),
    ]
    path = tmp_path / "report.csv"
    write_report_csv(rows, path)
    assert path.read_text() == (
        "check,name,lhs,rhs,slack,pass\n"
        "kernel,sandwich,1,2,1,true\n"
        "kernel,fails,2.5,2,-0.5,false\n"
    )
