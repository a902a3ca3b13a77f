import math

import numpy as np
import pytest

import qenv


def two_state(a, b):
    return np.array([[-a, a], [b, -b]], dtype=float)


def closed_form(a, b, t):
    s = a + b
    e = math.exp(-s * t)
    return np.array([[b + a * e, a - a * e], [b - b * e, a + b * e]]) / s


def test_mat_exp_matches_closed_form():
    for a, b in [(1.0, 1.0), (2.0, 0.5)]:
        for t in (0.1, 0.5, 1.0):
            assert np.abs(qenv.mat_exp(two_state(a, b), t) - closed_form(a, b, t)).max() < 1e-12


def test_validate_reports_violations():
    bad = np.array([[1.0, -1.0], [0.0, 0.0]])
    check = qenv.validate_q_matrix(bad)
    assert not check.ok
    kinds = {v.kind for v in check.violations}
    assert {"positive_diagonal", "negative_off_diagonal"} <= kinds
    assert qenv.validate_q_matrix(qenv.build_laplacian_a(5, 1.0)).ok


def test_interval_generator_rejects_bad_endpoint():
    a = qenv.build_laplacian_a(5, 1.0)
    b = qenv.build_drift_b(5, 1.0)
    with pytest.raises(ValueError):
        qenv.interval_generator(a, b, -10.0, 1.0)


def test_envelope_single_member_is_linear():
    q = two_state(2.0, 0.5)
    fam = qenv.GeneratorFamily([(q, None)])
    u = np.array([1.0, 0.0])
    assert np.allclose(qenv.envelope(fam, 0.5, 8, u), closed_form(2.0, 0.5, 0.5) @ u, atol=1e-12)
    assert np.abs(qenv.envelope(fam, 0.5, 3, u, mode="euler", k=50) - closed_form(2.0, 0.5, 0.5) @ u).max() < 1e-2


def test_envelope_dominates_members_and_replays():
    rng = np.random.default_rng(3)
    a = qenv.build_laplacian_a(6, 1.0)
    b = qenv.build_drift_b(6, 1.0)
    fam = qenv.interval_generator(a, b, -0.5, 0.5)
    u = rng.uniform(-1, 1, 6)
    up = qenv.envelope(fam, 1.0, 7, u)
    lo = qenv.envelope(fam.with_direction(qenv.Direction.lower), 1.0, 7, u)
    for lam in (-0.5, 0.0, 0.5):
        ref = qenv.mat_exp(a + lam * b, 1.0) @ u
        assert (up - ref).min() > -1e-9
        assert (ref - lo).min() > -1e-9
    control = qenv.extract_worst_case_control(fam, 1.0, 7, u)
    assert len(control) == 128
    assert np.abs(qenv.control_evaluate(fam, control, u) - up).max() < 1e-9


def test_refined_diagnostics():
    fam = qenv.GeneratorFamily([(two_state(1.0, 1.0), None), (two_state(2.0, 0.5), None)])
    value, diag = qenv.envelope_refined(fam, 1.0, np.array([0.0, 1.0]), 1e-4, 20)
    assert diag["converged"]
    assert diag["levels"][-1]["n"] == diag["final_level"]
    assert value.shape == (2,)


def test_ode_and_pricing_agree():
    d, delta = 41, 0.25
    a = qenv.build_laplacian_a(d, delta)
    b = qenv.build_drift_b(d, delta)
    fam = qenv.interval_generator(a, b, -1.0, 1.0)
    payoff = qenv.payoff_butterfly(d, delta, 4.0, 5.0)
    times, values = qenv.solve_euler(fam, payoff, 1.0, 400, snapshots=11)
    assert len(times) == 11 and values.shape == (11, d)
    up_e, lo_e = qenv.price_bounds(fam, payoff, delta, 1.0, "ode-euler", steps=400)
    up_n, lo_n = qenv.price_bounds(fam, payoff, delta, 1.0, "nisio", n=8, k=10)
    assert np.allclose(values[-1], up_e)
    assert (up_e - lo_e).min() >= 0.0
    assert max(np.abs(up_e - up_n).max(), np.abs(lo_e - lo_n).max()) < 5e-2
    ref = qenv.linear_reference(a, payoff, 1.0)
    assert (up_e - ref).min() > -1e-6 and (ref - lo_e).min() > -1e-6


def test_pmp_entries():
    fam = qenv.interval_generator(qenv.build_laplacian_a(4, 1.0), qenv.build_drift_b(4, 1.0), 0.0, 1.0)
    entries = qenv.check_pmp(fam, trials=100, seed=1)
    assert len(entries) == 4
    assert all(e["failures"] == 0 for e in entries)


def test_cli_expm(tmp_path):
    code, out, err = qenv.run_cli(["expm", "--d", "3", "--delta", "1", "--t", "0"])
    assert code == 0, err
    rows = [line for line in out.splitlines() if not line.startswith("#")]
    assert len(rows) == 3
    code, _, err = qenv.run_cli(["price", "--delta"])
    assert code == 2
