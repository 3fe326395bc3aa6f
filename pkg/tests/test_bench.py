import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphsplit.bench import (
    DEFAULT_GRID,
    BallQPInstance,
    _streams,
    ball_qp_reference,
    cocoercive_suite,
    game_reference,
    gen_ball_qp,
    gen_matrix_game,
    instance_from_dict,
    lipschitz_suite,
    load_instance,
    run_bench,
    saddle_residual,
    save_instance,
    sweep,
)
from graphsplit.errors import InvalidInputError
from graphsplit.operators import project_ball
from graphsplit.presets import make_preset
from graphsplit.scheme import check_assumptions
from graphsplit.solver import SolverConfig, ranges_for, solve


@pytest.fixture(scope="module")
def desk_ball():
    inst, prob = gen_ball_qp(10, 20, seed=1)
    return inst, prob, ball_qp_reference(inst)


def test_generators_are_deterministic():
    a, _ = gen_ball_qp(6, 5, seed=42)
    b, _ = gen_ball_qp(6, 5, seed=42)
    for name in ("centers", "radii", "Q", "interior_point"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    g1, _ = gen_matrix_game(3, 4, seed=9)
    g2, _ = gen_matrix_game(3, 4, seed=9)
    assert np.array_equal(g1.thetas, g2.thetas)
    c, _ = gen_ball_qp(6, 5, seed=43)
    assert not np.array_equal(a.centers, c.centers)


@given(st.integers(2, 8), st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_ball_instances_are_well_formed(n, d, seed):
    inst, prob = gen_ball_qp(n, d, seed)
    assert prob.n == n and prob.p == n - 1 and prob.cocoercive
    for Q in inst.Q:
        assert np.linalg.eigvalsh(Q).min() >= -1e-12
    q = inst.interior_point
    assert np.all(np.linalg.norm(q - inst.centers, axis=1) < inst.radii)
    assert np.any(np.linalg.norm(inst.centers, axis=1) > inst.radii)
    assert prob.ell == pytest.approx(max(np.linalg.norm(Q, 2) for Q in inst.Q))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_game_instances_are_well_formed(p, d, seed):
    inst, prob = gen_matrix_game(p, d, seed)
    assert prob.n == p + 2 and prob.p == p and not prob.cocoercive
    # Theta_j = s_j I - K_j with K_j = j L_j, L_j ~ U(0, 1), s_j = 1.1 ||K_j||
    (rng,) = _streams(seed, 0, 1)
    L = rng.uniform(size=(p, d, d))
    for j, T in enumerate(inst.thetas):
        K = (j + 1) * L[j]
        s = 1.1 * np.linalg.norm(K, 2)
        np.testing.assert_allclose(T, s * np.eye(d) - K, atol=1e-14)
        assert s > np.linalg.norm(K, 2)
    assert prob.ell == pytest.approx(max(np.linalg.norm(T, 2) for T in inst.thetas))


def test_forward_operators_are_skew():
    _, prob = gen_matrix_game(4, 6, seed=2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=12)
        for b in prob.B:
            assert abs(b.apply(x) @ x) <= 1e-12 * max(1.0, x @ x)


def test_toy_ball_problem():
    inst = BallQPInstance([[5.0, 0.0], [5.0, 0.0]], [1.0, 1.0], [np.eye(2)])
    ref = ball_qp_reference(inst)
    np.testing.assert_allclose(ref.x, [4.0, 0.0], atol=1e-10)
    assert ref.kkt_residual < 1e-10
    sel = ref.selections(inst)
    np.testing.assert_allclose(sel.sum(axis=0) + ref.x, 0.0, atol=1e-10)


def test_feasibility_only_instance():
    inst = BallQPInstance([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0], [np.zeros((2, 2))])
    ref = ball_qp_reference(inst)
    assert np.all(np.linalg.norm(ref.x - inst.centers, axis=1) <= inst.radii + 1e-9)


def test_ball_reference_satisfies_projected_gradient_fixed_point(desk_ball):
    inst, prob, ref = desk_ball
    assert ref.kkt_residual < 1e-10
    x = ref.x
    assert np.all(np.linalg.norm(x - inst.centers, axis=1) <= inst.radii + 1e-10)
    H = inst.Q.sum(axis=0)
    # the projected-gradient map onto the intersection, using the active ball
    active = np.flatnonzero(ref.multipliers > 0)
    assert active.size >= 1
    t = 0.1
    y = x - t * H @ x
    for i in active:
        y = project_ball(y, inst.centers[i], inst.radii[i])
    assert np.linalg.norm(y - x) < 1e-10
    assert np.linalg.norm(x) > 0


def test_ball_reference_cross_check():
    inst, _ = gen_ball_qp(4, 5, seed=7)
    ref = ball_qp_reference(inst, cross_check_iters=3000)
    assert ref.cross_check_gap < 1e-8


def test_singleton_game():
    inst, _ = gen_matrix_game(1, 1, seed=0)
    ref = game_reference(inst)
    np.testing.assert_allclose(ref.x, [1.0, 1.0])


def test_game_reference_is_an_equilibrium():
    inst, prob = gen_matrix_game(2, 3, seed=0)
    ref = game_reference(inst)
    u, v = ref.x[:3], ref.x[3:]
    assert np.all(u > 0) and np.all(v > 0)
    assert u.sum() == pytest.approx(1.0) and v.sum() == pytest.approx(1.0)
    assert ref.saddle_residual < 1e-10 and ref.lp_gap < 1e-9
    assert saddle_residual(inst.thetas, ref.x) < 1e-10
    sel = ref.selections(prob)
    np.testing.assert_allclose(sel.sum(axis=0) + prob.forward_sum(ref.x), 0.0, atol=1e-12)


def test_suites_hold_seven_certified_schemes():
    for suite in (cocoercive_suite(6), lipschitz_suite(6)):
        assert len(suite) == 7
        for pre in suite.values():
            assert check_assumptions(pre.scheme).passed


def test_single_cell_sweep_is_a_solve(desk_ball):
    _, prob, ref = desk_ball
    pre = make_preset("complete", n=10)
    sw = sweep(prob, pre.scheme, [0.4], [0.7], 300, ref.x)
    rng = ranges_for(pre.scheme, prob)
    gamma = 0.4 * rng.gamma_max
    res = solve(pre.scheme, prob, SolverConfig(gamma, 0.7 * rng.lambda_max(gamma), 300), x_star=ref.x)
    assert sw.cells[0].final_error == res.final_error


def test_larger_relaxation_helps(desk_ball):
    _, prob, ref = desk_ball
    pre = make_preset("complete", n=10)
    sw = sweep(prob, pre.scheme, [0.5], [0.10, 0.99], 1000, ref.x)
    low, high = sw.cells
    assert high.final_error <= low.final_error


def test_full_grid_is_finite(desk_ball):
    _, prob, ref = desk_ball
    pre = make_preset("seq_fb", n=10)
    sw = sweep(prob, pre.scheme, DEFAULT_GRID, DEFAULT_GRID, 200, ref.x, error_tol=1e-3)
    assert len(sw.cells) == 81
    assert all(np.isfinite(c.final_error) and np.isfinite(c.final_residual) for c in sw.cells)
    assert sw.best in sw.cells
    assert all(len(r) == 5 for r in sw.rows())


def test_sweep_rejects_hats_outside_unit_interval(desk_ball):
    _, prob, ref = desk_ball
    with pytest.raises(InvalidInputError):
        sweep(prob, make_preset("complete", n=10).scheme, [1.0], [0.5], 10, ref.x)


def test_run_bench_small():
    inst, ref, runs = run_bench("ball_qp", (4, 3), 0, 200, grid=(0.3, 0.6), names={"seq_fb", "complete_1"})
    assert sorted(r.name for r in runs) == ["complete_1", "seq_fb"]
    for r in runs:
        assert r.result.final_error == pytest.approx(r.best.final_error, rel=1e-9, abs=1e-15)
    with pytest.raises(InvalidInputError):
        run_bench("other", (2, 2), 0, 10)


def test_instance_files_round_trip(tmp_path):
    inst, _ = gen_ball_qp(3, 2, seed=1)
    save_instance(inst, tmp_path / "b.json")
    back = load_instance(tmp_path / "b.json")
    assert np.array_equal(back.centers, inst.centers) and np.array_equal(back.Q, inst.Q)
    game, _ = gen_matrix_game(2, 2, seed=1)
    save_instance(game, tmp_path / "g.json")
    assert np.array_equal(load_instance(tmp_path / "g.json").thetas, game.thetas)
    with pytest.raises(InvalidInputError):
        instance_from_dict({"kind": "lp"})
