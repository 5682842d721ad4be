"""Fixed-point solvers: DR, the homotopy state machine, ADMM, diagnostics."""

import math

import numpy as np
import pytest

from splitkit import (
    AdmmProblem,
    DrConfig,
    DualOperatorSpec,
    GeneralizedResolventSelection,
    HostConfig,
    LinearMap,
    PrimalTuple,
    ResolventSelection,
    admm_run,
    constant_schedule,
    detect_cycle,
    dr_run,
    dr_step,
    extract_primal,
    gmi_dual_resolvent,
    host_run,
    host_step,
    lipschitz_probe,
    log_ramp,
    over_relax,
    piecewise_ramp,
    rate_bound_check,
    write_trace_csv,
)
from splitkit.regularizers import soft_threshold
from splitkit.splitting import IterationTrace, TraceRow, initial_host_state


def _sel(fn, gamma=1.0, label="test"):
    return ResolventSelection(gamma, fn, label=label)


IDENTITY = _sel(lambda x: x)
ZERO = _sel(lambda x: np.zeros_like(x))
HALF = _sel(lambda x: 0.5 * x)


def _shift(c, gamma=1.0):
    """Translation selection y -> y + c e_1; lets a test dial the step norm."""
    def fn(y):
        out = np.array(y, dtype=float)
        out[0] += c
        return out
    return _sel(fn, gamma)


# ---------------------------------------------------------------------------
# configs


def test_dr_config_validation():
    with pytest.raises(ValueError):
        DrConfig(gamma=0.0)
    with pytest.raises(ValueError):
        DrConfig(gamma=1.0, max_iter=0)
    with pytest.raises(ValueError):
        DrConfig(gamma=1.0, fixed_point_tol=-1.0)


def test_host_config_validation():
    ramp = log_ramp()
    HostConfig(gamma=1.0, phi_schedule=ramp, theta_schedule=ramp, beta_rate=0.0)
    with pytest.raises(ValueError):
        HostConfig(gamma=1.0, phi_schedule=ramp, theta_schedule=ramp,
                   beta_rate=-1.0)
    with pytest.raises(ValueError):
        HostConfig(gamma=1.0, phi_schedule=ramp, theta_schedule=ramp, p_bar=0.0)
    with pytest.raises(ValueError):
        HostConfig(gamma=1.0, phi_schedule=ramp, theta_schedule=ramp,
                   tol_phi=1.5)
    decreasing = lambda j: 1.0 / (j + 1.0)
    with pytest.raises(ValueError):
        HostConfig(gamma=1.0, phi_schedule=decreasing, theta_schedule=ramp)


def test_schedule_factories():
    ramp = log_ramp()
    assert ramp(0) == 0.0
    assert 0.0 < ramp(10) < ramp(100) < 1.0
    pw = piecewise_ramp(top=0.8, hold=2, length=4)
    assert pw(0) == 0.0 and pw(2) == 0.0
    assert abs(pw(4) - 0.4) <= 1e-15
    assert pw(6) == 0.8 and pw(100) == 0.8
    assert constant_schedule(0.3)(17) == 0.3
    with pytest.raises(ValueError):
        piecewise_ramp(top=1.2)
    with pytest.raises(ValueError):
        constant_schedule(-0.1)


# ---------------------------------------------------------------------------
# dr_step / dr_run


def test_dr_step_identity_fixed_everywhere():
    y = np.array([3.0, -7.0])
    assert np.array_equal(dr_step(IDENTITY, IDENTITY, y), y)


def test_dr_step_double_point_reflection_is_identity():
    assert np.array_equal(dr_step(ZERO, ZERO, np.array([2.0])), np.array([2.0]))


def test_dr_step_half_maps():
    assert np.allclose(dr_step(HALF, HALF, np.array([4.0])), np.array([2.0]),
                       atol=1e-15)


def test_dr_step_rejects_mismatched_gamma():
    with pytest.raises(ValueError):
        dr_step(_sel(lambda x: x, gamma=1.0), _sel(lambda x: x, gamma=2.0),
                np.array([1.0]))


def test_dr_run_identity_converges_immediately():
    trace = dr_run(IDENTITY, IDENTITY, np.array([5.0, 5.0]), DrConfig(1.0))
    assert trace.converged
    assert len(trace) == 1
    assert trace.rows[0].residual == 0.0


def test_dr_run_half_maps_halve_residuals():
    trace = dr_run(HALF, HALF, np.array([8.0]), DrConfig(1.0, 60, 1e-12))
    res = trace.residuals()
    ratios = res[1:] / res[:-1]
    assert np.allclose(ratios, 0.5, atol=1e-12)
    assert trace.converged
    assert abs(trace.last_y[0]) <= 1e-11


def test_dr_run_never_claims_unmet_tolerance():
    trace = dr_run(HALF, HALF, np.array([8.0]), DrConfig(1.0, 5, 0.0))
    assert trace.reason == "max_iter"
    assert not trace.converged
    assert len(trace) == 5


# ---------------------------------------------------------------------------
# host_step branches


def _cfg(phi=None, theta=None, **kw):
    return HostConfig(gamma=1.0,
                      phi_schedule=phi or piecewise_ramp(top=1.0, hold=0, length=10),
                      theta_schedule=theta or piecewise_ramp(top=1.0, hold=0, length=10),
                      **kw)


def test_host_step_increments_schedule_on_small_step():
    cfg = _cfg(beta_rate=1.0, p_bar=1.0)
    state = initial_host_state(np.zeros(2), cfg)
    state = host_step(state, _shift(0.1), _shift(0.1), cfg)  # k=0 check vacuous
    assert (state.k, state.j, state.tau) == (1, 1, 1)
    assert state.phi == cfg.phi_schedule(1)
    state = host_step(state, _shift(0.1), _shift(0.1), cfg)
    assert (state.k, state.j, state.tau) == (2, 2, 1)
    assert state.phi == cfg.phi_schedule(2)


def test_host_step_backtracks_and_pins_j_at_zero():
    cfg = _cfg(beta_rate=1.0, p_bar=1.0)
    state = initial_host_state(np.zeros(2), cfg)
    state = host_step(state, _shift(9.0), _shift(9.0), cfg)  # vacuous at k=0
    assert (state.j, state.tau) == (1, 1)
    state = host_step(state, _shift(9.0), _shift(9.0), cfg)  # step 9 > p_1
    assert (state.j, state.tau) == (0, 0)
    assert state.phi == cfg.phi_schedule(0)
    state = host_step(state, _shift(9.0), _shift(9.0), cfg)  # again, j stays 0
    assert (state.j, state.tau) == (0, 0)


def test_host_step_tau_zero_is_absorbing_and_freezes_params():
    cfg = _cfg(beta_rate=1.0, p_bar=1.0)
    state = initial_host_state(np.zeros(2), cfg)
    state = host_step(state, _shift(0.5), _shift(0.5), cfg)
    state = host_step(state, _shift(9.0), _shift(9.0), cfg)  # violate
    assert state.tau == 0
    frozen = (state.j, state.phi, state.theta)
    state = host_step(state, _shift(1e-9), _shift(1e-9), cfg)  # tiny step
    assert state.tau == 0
    assert (state.j, state.phi, state.theta) == frozen


def test_host_step_zero_relaxations_match_plain_resolvent_composition():
    rng = np.random.default_rng(11)
    s_a = _sel(lambda x: soft_threshold(1.0, x))
    s_b = _sel(lambda x: 0.5 * (x + 1.0))
    cfg = _cfg(phi=constant_schedule(0.0), theta=constant_schedule(0.0))
    for _ in range(20):
        y = rng.normal(size=3) * 2.0
        state = initial_host_state(y, cfg)
        stepped = host_step(state, s_a, s_b, cfg)
        direct = 0.5 * (y + s_a(s_b(y)))
        assert np.max(np.abs(stepped.y - direct)) <= 1e-14


def test_host_step_beta_rate_zero_advances_only_on_exact_fixed_points():
    cfg = _cfg(beta_rate=0.0, p_bar=1.0)
    state = initial_host_state(np.zeros(2), cfg)
    state = host_step(state, IDENTITY, IDENTITY, cfg)  # k=0 vacuous
    state = host_step(state, IDENTITY, IDENTITY, cfg)  # step 0 <= 0
    assert (state.j, state.tau) == (2, 1)
    state = host_step(state, _shift(1e-12), _shift(1e-12), cfg)
    assert state.tau == 0  # any nonzero step violates the degenerate envelope


# ---------------------------------------------------------------------------
# host_run


def test_host_run_identity_terminates_when_schedules_arrive():
    cfg = HostConfig(gamma=1.0, phi_schedule=log_ramp(),
                     theta_schedule=log_ramp(), tol_phi=0.1, tol_theta=0.1,
                     tol_y=1e-9, k_max=20000)
    out = host_run(IDENTITY, IDENTITY, np.array([1.0, 2.0]), cfg)
    assert out.converged
    # log(j+1)/(1+log(j+1)) >= 0.9 first at j = ceil(e^9 - 1) = 8103; the
    # parameters in effect lag the state by one step
    assert out.state.k == 8104
    assert np.allclose(out.y_final, [1.0, 2.0], atol=1e-12)


def test_host_run_constant_one_schedules_reduce_to_dr():
    cfg = HostConfig(gamma=1.0, phi_schedule=constant_schedule(1.0),
                     theta_schedule=constant_schedule(1.0), beta_rate=1e9,
                     tol_phi=0.0, tol_theta=0.0, tol_y=1e-12, k_max=100)
    out = host_run(HALF, HALF, np.array([8.0]), cfg)
    ref = dr_run(HALF, HALF, np.array([8.0]), DrConfig(1.0, 100, 1e-12))
    assert out.converged
    got = np.array([r.y[0] for r in out.trace.rows])
    want = np.array([r.y[0] for r in ref.rows])
    assert np.array_equal(got[:len(want)], want)


def test_host_warm_start_is_bitwise_half_averaged_composition():
    rng = np.random.default_rng(13)
    s_a = _sel(lambda x: soft_threshold(0.7, x))
    s_b = _sel(lambda x: np.tanh(x))
    cfg = HostConfig(gamma=1.0, phi_schedule=constant_schedule(0.0),
                     theta_schedule=constant_schedule(0.0), beta_rate=1e9,
                     tol_phi=0.0, tol_theta=0.0, tol_y=0.0, k_max=50)
    y0 = rng.normal(size=4)
    out = host_run(s_a, s_b, y0, cfg)
    y = y0.copy()
    for i in range(50):
        y = 0.5 * (y + s_a(s_b(y)))
        assert np.array_equal(out.trace.rows[i].y, y)


def test_host_backtrack_recovers_along_the_same_schedule():
    cfg = _cfg(beta_rate=1.0, p_bar=1.0)
    sched = cfg.phi_schedule
    state = initial_host_state(np.zeros(2), cfg)
    state = host_step(state, _shift(0.3), _shift(0.3), cfg)
    state = host_step(state, _shift(0.3), _shift(0.3), cfg)
    peak = state.phi
    assert peak == sched(2)
    state = host_step(state, _shift(9.0), _shift(9.0), cfg)
    assert state.phi == sched(1) < peak
    # tau stays down, parameters never exceed the backtracked level
    for _ in range(5):
        state = host_step(state, _shift(1e-6), _shift(1e-6), cfg)
        assert state.phi <= peak
        assert state.tau == 0


def test_host_map_obeys_lipschitz_product_bound():
    rng = np.random.default_rng(14)
    s_a = _sel(lambda x: soft_threshold(1.0, x))
    s_b = _sel(lambda x: np.clip(x, -2.0, 2.0))
    pairs = [(rng.normal(size=3) * 4, rng.normal(size=3) * 4) for _ in range(300)]
    for phi in (0.0, 0.5, 1.0):
        for theta in (0.0, 0.5, 1.0):
            def t_map(y, phi=phi, theta=theta):
                return 0.5 * (y + over_relax(s_a, phi, over_relax(s_b, theta, y)))
            bound = 1.0 + theta + phi + 2.0 * phi * theta + 1e-9
            assert lipschitz_probe(t_map, pairs) <= bound


# ---------------------------------------------------------------------------
# extraction and ADMM


def _scalar_specs(gamma=1.0):
    """F = (1/2) x^2 and G = |.| with A = B = -I on scalars."""
    m = LinearMap(-np.eye(1))
    f_inner = GeneralizedResolventSelection(
        lambda r: r / (1.0 + 1.0 / gamma), 1, label="quadratic inner")
    g_inner = GeneralizedResolventSelection(
        lambda r: soft_threshold(1.0 / gamma, r), 1, label="l1 inner")
    f_spec = DualOperatorSpec(m=m, d=np.zeros(1), inner=f_inner, gamma=gamma)
    g_spec = DualOperatorSpec(m=m, d=np.zeros(1), inner=g_inner, gamma=gamma)
    return f_spec, g_spec


def test_extract_primal_satisfies_the_z_identity():
    f_spec, g_spec = _scalar_specs()
    rng = np.random.default_rng(15)
    for _ in range(40):
        y = rng.normal(size=1) * 3
        t = extract_primal(y, f_spec, g_spec)
        lam = gmi_dual_resolvent(g_spec, y)
        # rho B z = lam - y - rho d_g, with B = -I and d_g = 0
        assert abs(-t.z[0] - (lam[0] - y[0])) <= 1e-12


def test_extract_primal_rejects_mismatched_step_sizes():
    f_spec, _ = _scalar_specs(1.0)
    _, g_spec = _scalar_specs(2.0)
    with pytest.raises(ValueError):
        extract_primal(np.zeros(1), f_spec, g_spec)


def test_scalar_toy_dr_converges_to_the_known_minimizer():
    # min (1/2) x^2 + |z| subject to -x - z = 0 has solution x = z = 0
    f_spec, g_spec = _scalar_specs()
    s_f = ResolventSelection(1.0, lambda y: gmi_dual_resolvent(f_spec, y),
                             label="f dual")
    s_g = ResolventSelection(1.0, lambda y: gmi_dual_resolvent(g_spec, y),
                             label="g dual")
    trace = dr_run(s_f, s_g, np.array([2.0]), DrConfig(1.0, 400, 1e-12))
    assert trace.converged
    t = extract_primal(trace.last_y, f_spec, g_spec)
    assert abs(t.x[0]) <= 1e-9
    assert abs(t.x[0] + t.z[0]) <= 1e-9


def _constraint_problem():
    """min |z| subject to x = 1, split as A x + B z = 0 with A=I, B=-I."""
    eye = LinearMap(np.eye(1))
    neg = LinearMap(-np.eye(1))
    return AdmmProblem(
        a=eye, b=neg, d_f=np.zeros(1), d_g=np.zeros(1),
        solve_x=lambda v, rho: np.array([1.0]),
        solve_z=lambda v, rho: soft_threshold(1.0 / rho, v),
    )


def test_admm_fixed_at_kkt_start():
    prob = _constraint_problem()
    trace = admm_run(prob, rho=1.0, init=(np.array([1.0]), np.array([1.0])),
                     max_iter=20)
    assert np.allclose(trace.residuals(), 0.0, atol=1e-15)
    for t in trace.primal:
        assert t.x[0] == 1.0 and abs(t.z[0] - 1.0) <= 1e-15


def test_admm_scalar_constraint_converges_to_one():
    prob = _constraint_problem()
    trace = admm_run(prob, rho=1.0, init=(np.zeros(1), np.zeros(1)),
                     max_iter=50, tol=1e-12)
    assert trace.converged
    last = trace.primal[-1]
    assert abs(last.x[0] - 1.0) <= 1e-12
    assert abs(last.z[0] - 1.0) <= 1e-12


def test_admm_validates_inputs():
    prob = _constraint_problem()
    with pytest.raises(ValueError):
        admm_run(prob, rho=0.0, init=(np.zeros(1), np.zeros(1)), max_iter=10)
    with pytest.raises(ValueError):
        admm_run(prob, rho=1.0, init=(np.zeros(1), np.zeros(1)), max_iter=0)


# ---------------------------------------------------------------------------
# diagnostics


def _trace_from(points):
    rows = [TraceRow(k + 1, np.asarray(p, dtype=float), 0.0, 1.0, 1.0, 1)
            for k, p in enumerate(points)]
    return IterationTrace(y0=np.asarray(points[0], dtype=float), rows=rows)


def test_detect_cycle_constant_tail_is_period_one():
    trace = _trace_from([[1.0, 2.0]] * 8)
    cyc = detect_cycle(trace, max_period=4, tol=1e-12)
    assert cyc is not None and cyc.period == 1


def test_detect_cycle_alternating_is_period_two():
    a, b = [1.0, 0.0], [0.0, 1.0]
    trace = _trace_from([a, b] * 6)
    cyc = detect_cycle(trace, max_period=6, tol=1e-12)
    assert cyc is not None and cyc.period == 2
    got = {tuple(p) for p in cyc.points}
    assert got == {tuple(a), tuple(b)}


def test_detect_cycle_misses_progressing_sequences():
    trace = _trace_from([[float(k), 0.0] for k in range(30)])
    assert detect_cycle(trace, max_period=8, tol=1e-9) is None


def test_detect_cycle_accepts_raw_arrays_and_validates():
    pts = np.array([[0.0], [1.0]] * 5)
    cyc = detect_cycle(pts, max_period=3, tol=0.0)
    assert cyc is not None and cyc.period == 2
    with pytest.raises(ValueError):
        detect_cycle(pts, max_period=0, tol=0.0)
    with pytest.raises(ValueError):
        detect_cycle(pts, max_period=2, tol=-1.0)


def test_rate_bound_zero_step_trace_passes():
    trace = _trace_from([[1.0, 1.0]] * 10)
    assert rate_bound_check(trace, beta_rate=1.0, p_bar=1.0)


def test_rate_bound_detects_violation():
    # final point far from an early iterate at large k: bound 1/k fails
    pts = [[0.0]] * 9 + [[5.0]]
    trace = _trace_from(pts)
    assert not rate_bound_check(trace, beta_rate=1.0, p_bar=1.0)


def test_rate_bound_rejects_uncertified_traces():
    rows = [TraceRow(1, np.zeros(1), 0.0, 1.0, 1.0, 0)]
    trace = IterationTrace(y0=np.zeros(1), rows=rows)
    with pytest.raises(ValueError):
        rate_bound_check(trace, beta_rate=1.0, p_bar=1.0)
    with pytest.raises(ValueError):
        rate_bound_check(_trace_from([[0.0]]), beta_rate=0.0, p_bar=1.0)


def test_rate_bound_holds_on_contractive_host_run():
    cfg = HostConfig(gamma=1.0, phi_schedule=log_ramp(),
                     theta_schedule=log_ramp(), beta_rate=1.0, p_bar=1.0,
                     tol_phi=0.5, tol_theta=0.5, tol_y=1e-13, k_max=5000)
    out = host_run(HALF, HALF, np.array([0.05, -0.02]), cfg)
    assert out.state.tau == 1
    assert rate_bound_check(out.trace, beta_rate=1.0, p_bar=1.0)


# ---------------------------------------------------------------------------
# trace CSV


def test_write_trace_csv_layout_and_determinism(tmp_path):
    trace = dr_run(HALF, HALF, np.array([8.0, 4.0]), DrConfig(1.0, 6, 0.0))
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    write_trace_csv(trace, p1)
    write_trace_csv(trace, p2)
    text = p1.read_text()
    lines = text.strip().split("\n")
    assert lines[0] == "k,residual,phi,theta,tau,y_1,y_2"
    assert len(lines) == 7
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[5]) == trace.rows[0].y[0]
    assert p1.read_bytes() == p2.read_bytes()


def test_write_trace_csv_primal_columns(tmp_path):
    trace = _trace_from([[1.0], [2.0]])
    trace.primal = [PrimalTuple(np.array([3.0]), np.array([0.0]), np.array([0.0])),
                    PrimalTuple(np.array([4.0]), np.array([0.0]), np.array([0.0]))]
    p = tmp_path / "t.csv"
    write_trace_csv(trace, p, include_primal_x=True)
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "k,residual,phi,theta,tau,y_1,x_1"
    assert lines[1].endswith(",3")
    trace.primal = trace.primal[:1]
    with pytest.raises(ValueError):
        write_trace_csv(trace, p, include_primal_x=True)


def test_write_trace_csv_rejects_empty():
    with pytest.raises(ValueError):
        write_trace_csv(IterationTrace(y0=np.zeros(1)), "/tmp/never.csv")
