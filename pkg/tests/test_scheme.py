import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphsplit.errors import InvalidConfigError, InvalidInputError
from graphsplit.graphs import _incidence_unchecked, build_topology, laplacian, subgraph
from graphsplit.scheme import (
    CoefficientScheme,
    ParameterRanges,
    build_from_graphs,
    check_assumptions,
    check_explicit,
    check_variant_psd,
    column_sums,
    compute_tau,
    graph_matrices,
    load_scheme,
    parameter_ranges,
    save_scheme,
    standard_PQR,
)


def graph_scheme(kind_g, kind_sub, n, variant="identity_shift", p=None, w=1.0, mu2=None):
    g = build_topology(kind_g, n, w)
    gw = subgraph(g, kind_sub, mu2)
    p = n - 1 if p is None else p
    M = graph_matrices(g, gw)[0]
    P, Q, R = standard_PQR(variant, n, p, M)
    if p == n - 1:
        Q = np.zeros_like(Q)
    return build_from_graphs(g, gw, P, Q, R)


def test_graph_matrices_complete_three():
    g = build_topology("complete", 3)
    M, N, delta = graph_matrices(g, g.full_subgraph())
    np.testing.assert_array_equal(N, [[0, 0, 0], [1, 0, 0], [1, 1, 0]])
    np.testing.assert_array_equal(delta, [1, 1, 1])


def test_graph_matrices_two_nodes():
    g = build_topology("sequential", 2)
    M, N, delta = graph_matrices(g, g.full_subgraph())
    np.testing.assert_array_equal(M, [[1], [-1]])
    np.testing.assert_array_equal(N, [[0, 0], [1, 0]])
    np.testing.assert_array_equal(delta, [0.5, 0.5])


@given(st.integers(3, 9), st.sampled_from(["sequential", "star_first", "star_last", "complete"]),
       st.floats(0.2, 1.0), st.integers(0, 2**31))
def test_key_matrix_is_laplacian_difference(n, kind, shrink, seed):
    rng = np.random.default_rng(seed)
    weights = {}
    g = build_topology("complete", n, lambda i, j: weights.setdefault((i, j), rng.uniform(0.5, 3.0)))
    gw = subgraph(g, kind, lambda i, j: shrink * g.weight(i, j))
    s = build_from_graphs(g, gw, *standard_PQR("identity_shift", n, n - 1))
    np.testing.assert_allclose(s.key_matrix(), laplacian(g) - laplacian(gw), atol=1e-12)


def test_preset_style_scheme_passes_everything():
    report = check_assumptions(graph_scheme("ring", "sequential", 5))
    assert report.passed and report.failed() == []
    assert len(report.lines()) == 7


def test_doubled_N_fails_n_sum():
    s = graph_scheme("complete", "complete", 4)
    bad = s.replace(N=2 * s.N)
    report = check_assumptions(bad)
    assert not report["n_sum"].passed
    assert report["n_sum"].witness == pytest.approx(bad.N.sum() - bad.delta.sum())
    assert report["kernel"].passed and report["p_columns"].passed


def test_disconnected_subgraph_fails_kernel():
    g = build_topology("complete", 4)
    s = graph_scheme("complete", "complete", 4)
    M = _incidence_unchecked(4, [(1, 2, 1.0), (3, 4, 1.0)])
    report = check_assumptions(s.replace(M=M))
    assert not report["kernel"].passed
    assert report["kernel"].witness == 2.0
    assert g.is_connected()


def test_check_explicit_examples():
    n, p = 4, 2
    P, Q, R = standard_PQR("identity_shift", n, p)
    base = graph_scheme("complete", "complete", n, p=p).replace(P=P, Q=Q, R=R)
    assert check_explicit(base).ok
    P2 = P.copy()
    P2[1, 1] = 1.0
    rep = check_explicit(base.replace(P=P2))
    assert not rep.ok and any("P[2,2]" in v for v in rep.violations)
    P3, Q3 = np.zeros((n, p)), np.zeros((n, p))
    P3[2, 1] = Q3[2, 1] = 1.0
    P3[1, 0] = Q3[3, 0] = 1.0
    rep = check_explicit(base.replace(P=P3, Q=Q3))
    assert not rep.ok and any("Q[3,2]" in v for v in rep.violations)


def test_identity_shift_example():
    P, Q, R = standard_PQR("identity_shift", 4, 3)
    np.testing.assert_array_equal(P, [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    np.testing.assert_array_equal(Q, P)
    np.testing.assert_array_equal(R, np.eye(3, 4))


def test_column_sum_example():
    M = graph_matrices(build_topology("sequential", 3), build_topology("sequential", 3).full_subgraph())[0]
    assert column_sums(M, 2)[0] == -1.0
    P, Q, R = standard_PQR("column_sum", 3, 2, M)
    assert P[1, 0] == 1.0
    s = build_from_graphs(build_topology("sequential", 3), build_topology("sequential", 3).full_subgraph(), P, Q, R)
    assert compute_tau(s, "cocoercive") == pytest.approx(1.0)


@given(st.integers(2, 9), st.data())
def test_standard_selections_sum_to_one(n, data):
    p = data.draw(st.integers(1, n - 1))
    variant = data.draw(st.sampled_from(["identity_shift", "aggregated", "column_sum"]))
    g = build_topology("sequential", n, lambda i, j: 1.0 + (i * 7 + j) % 3)
    M = graph_matrices(g, g.full_subgraph())[0]
    P, Q, R = standard_PQR(variant, n, p, M)
    np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(R.sum(axis=1), 1.0, atol=1e-12)
    if variant != "column_sum":
        np.testing.assert_array_equal(Q.sum(axis=0), 1.0)


def test_p_zero_gives_empty_matrices():
    P, Q, R = standard_PQR("aggregated", 3, 0)
    assert P.shape == (3, 0) and R.shape == (0, 3)


@pytest.mark.parametrize("n", [3, 5, 10])
def test_tau_star_first_equal_spokes(n):
    mu2 = 0.7
    g = build_topology("star_first", n, 1.0)
    gw = subgraph(g, "star_first", mu2)
    P = standard_PQR("identity_shift", n, n - 2)[0]
    Q, R = standard_PQR("aggregated", n, n - 2)[1:]
    s = build_from_graphs(g, gw, P, Q, R)
    assert compute_tau(s, "lipschitz") == pytest.approx(n / mu2, rel=1e-9)


def test_tau_zero_when_P_transpose_equals_R():
    s = graph_scheme("complete", "complete", 4)
    s = s.replace(R=s.P.T)
    assert compute_tau(s, "cocoercive") == pytest.approx(0.0, abs=1e-20)


def test_ranges_examples():
    r = ParameterRanges("lipschitz", 2.0, 1.0)
    assert r.gamma_max == 0.5 and r.lambda_max(0.25) == 0.5
    assert math.isinf(ParameterRanges("cocoercive", 0.0, 1.0).gamma_max)
    with pytest.raises(InvalidConfigError):
        r.validate(0.5)
    with pytest.raises(InvalidConfigError):
        r.validate(0.25, 0.5)
    r.validate(0.25, 0.49)


def test_davis_yin_hatted_ranges():
    # w = mu^2 = 1: gamma_hat = 2 gamma, lambda_hat = 2 lambda
    g = build_topology("sequential", 2)
    s = build_from_graphs(g, g.full_subgraph(), [[0.0], [1.0]], [[0.0], [0.0]], [[1.0, 0.0]])
    ell = 2.5
    r = parameter_ranges(s, ell)
    assert 2 * r.gamma_max == pytest.approx(4 / ell)
    gamma_hat = 1.2
    assert 2 * r.lambda_max(gamma_hat / 2) == pytest.approx(2 - gamma_hat * ell / 2)


def test_variant_psd_fails_when_key_vanishes():
    s = graph_scheme("complete", "complete", 4)
    assert np.allclose(s.key_matrix(), 0)
    for gamma in (1e-6, 0.1, 1.0):
        assert not check_variant_psd(s, gamma, 1.0)[0]


def test_variant_psd_small_gamma_when_key_positive():
    g = build_topology("complete", 5)
    gw = subgraph(g, "sequential", 0.5)
    M = graph_matrices(g, gw)[0]
    s = build_from_graphs(g, gw, *standard_PQR("column_sum", 5, 4, M))
    assert check_variant_psd(s, 1e-6, 1.0)[0]


def test_variant_psd_threshold_doubled_weights():
    rng = np.random.default_rng(3)
    mu2 = {(i, i + 1): rng.uniform(0.3, 2.0) for i in range(1, 6)}
    g = build_topology("sequential", 6, lambda i, j: 2 * mu2[(i, j)])
    gw = subgraph(g, "sequential", lambda i, j: mu2[(i, j)])
    M = graph_matrices(g, gw)[0]
    s = build_from_graphs(g, gw, *standard_PQR("column_sum", 6, 5, M))
    ell = 1.7
    bound = 2 * min(column_sums(M, 5) ** 2) / ell
    assert check_variant_psd(s, bound * (1 - 1e-6), ell)[0]
    assert not check_variant_psd(s, bound * (1 + 1e-3), ell)[0]


def test_regularity_mismatch_rejected():
    s = graph_scheme("complete", "complete", 4, p=2)
    with pytest.raises(InvalidInputError):
        compute_tau(s, "cocoercive")
    with pytest.raises(InvalidInputError):
        compute_tau(s.replace(Q=2 * s.Q), "lipschitz")


def test_scheme_validation():
    with pytest.raises(InvalidInputError):
        CoefficientScheme(np.ones((3, 2)), np.zeros((2, 2)), np.zeros((3, 0)), np.zeros((3, 0)),
                          np.zeros((0, 3)), np.ones(3))
    with pytest.raises(InvalidInputError):
        CoefficientScheme(np.ones((2, 1)), np.zeros((2, 2)), np.zeros((2, 0)), np.zeros((2, 0)),
                          np.zeros((0, 2)), [1.0, 0.0])


def test_scheme_is_immutable():
    s = graph_scheme("ring", "sequential", 4)
    with pytest.raises(ValueError):
        s.N[1, 0] = 5.0


def test_scheme_json_roundtrip(tmp_path):
    s = graph_scheme("ring", "sequential", 5)
    save_scheme(s, tmp_path / "s.json")
    again = load_scheme(tmp_path / "s.json")
    for name in "MNPQR":
        np.testing.assert_array_equal(getattr(again, name), getattr(s, name))
    np.testing.assert_array_equal(again.delta, s.delta)
