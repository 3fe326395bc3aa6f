"""Named algorithms as coefficient schemes, and hand-coded reference recursions.

Every constructor returns a :class:`Preset`. Weights default to 1 on every
edge of ``G`` and ``mu^2 = w`` on every edge of ``G'``; pass a constant or a
callable ``(i, j) -> value`` to change them.

The ``oracle_*`` functions never touch :mod:`graphsplit.scheme`. They
transcribe the closed-form recursions that the presets are supposed to
reduce to and serve as independent checks of the engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .errors import InvalidInputError
from .graphs import WeightedGraph, build_topology, subgraph
from .scheme import COCOERCIVE, LIPSCHITZ, build_from_graphs, standard_PQR

PRESET_NAMES = (
    "graph_fb", "graph_frb", "seq_fb", "seq_frb", "par_up_fdr", "par_up_fadr",
    "par_down_fdr", "par_down_fadr", "complete", "complete_star", "davis_yin",
    "frb_classic", "ryu", "product_space_up", "product_space_down",
)


@dataclass(frozen=True, eq=False)
class Preset:
    name: str
    scheme: object
    graph: WeightedGraph
    subgraph: object
    regularity: str
    params: dict = field(default_factory=dict)
    notes: str = ""
    renaming: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.scheme.n

    @property
    def p(self):
        return self.scheme.p

    def metadata(self):
        return {"name": self.name, "regularity": self.regularity, "params": self.params,
                "notes": self.notes, "renaming": self.renaming}


def _fn(value):
    if value is None or isinstance(value, Real):
        return value
    if callable(value):
        return value
    raise InvalidInputError(f"weights must be a number or a callable, got {type(value).__name__}")


def _params(**kw):
    return {k: v for k, v in kw.items() if v is None or isinstance(v, (Real, str, list, tuple))}


def _pqr(kind_P, kind_Q, kind_R, n, p):
    P = standard_PQR(kind_P, n, p)[0]
    Q = np.zeros((n, p)) if kind_Q is None else standard_PQR(kind_Q, n, p)[1]
    R = standard_PQR(kind_R, n, p)[2]
    return P, Q, R


def _finish(name, g, gw, P, Q, R, regularity, params, notes="", renaming=None):
    scheme = build_from_graphs(g, gw, P, Q, R, provenance={"preset": name, "params": params})
    return Preset(name, scheme, g, gw, regularity, params, notes, renaming or {})


def _check_n(name, n, minimum):
    if int(n) < minimum:
        raise InvalidInputError(f"{name} needs n >= {minimum}, got {n}")
    return int(n)


# Graph-driven forward-backward ---------------------------------------------


def h_map(g):
    """``h(i)`` for ``i = 2..n``: the largest neighbour ``j < i``, else ``i - 1``."""
    out = {}
    for i in range(2, g.n + 1):
        earlier = [j for j in g.neighbors(i) if j < i]
        out[i] = max(earlier) if earlier else i - 1
    return out


def _graph_R(h, n, p):
    R = np.zeros((p, n))
    for j in range(1, p + 1):
        R[j - 1, h[j + 1] - 1] = 1.0
    return R


def graph_fb(graph, sub=None, h=None):
    """Cocoercive case on an arbitrary connected graph, ``p = n - 1``."""
    gw = sub or graph.full_subgraph()
    n = _check_n("graph_fb", graph.n, 2)
    p = n - 1
    hm = dict(h) if h else h_map(graph)
    P = standard_PQR("identity_shift", n, p)[0]
    return _finish("graph_fb", graph, gw, P, np.zeros((n, p)), _graph_R(hm, n, p), COCOERCIVE,
                   {"n": n, "p": p, "h": [hm[i] for i in range(2, n + 1)]})


def graph_frb(graph, sub=None, h=None):
    """Lipschitz case on an arbitrary connected graph, ``p = n - 2``."""
    gw = sub or graph.full_subgraph()
    n = _check_n("graph_frb", graph.n, 3)
    p = n - 2
    hm = dict(h) if h else h_map(graph)
    P = standard_PQR("identity_shift", n, p)[0]
    Q = standard_PQR("aggregated", n, p)[1]
    return _finish("graph_frb", graph, gw, P, Q, _graph_R(hm, n, p), LIPSCHITZ,
                   {"n": n, "p": p, "h": [hm[i] for i in range(2, n + 1)]},
                   notes="node n reads B_j at x_{j+1} for every j")


# Sequential ----------------------------------------------------------------


def _sequential_graphs(n, w, mu2, w1n):
    w, mu2 = _fn(w), _fn(mu2)
    base = build_topology("sequential", n, w)
    edges = list(base.edges)
    if w1n:
        if n < 3:
            raise InvalidInputError("closing the ring needs n >= 3")
        edges.append((1, n, float(w1n)))
    g = WeightedGraph(n, edges)
    if mu2 is None:
        gw = subgraph(g, "sequential")
    else:
        gw = subgraph(g, "sequential", mu2)
    return g, gw


def seq_fb(n, w=1.0, mu2=None, w1n=1.0):
    """Sequential forward-backward; ``w1n = 0`` drops the closing edge of the ring."""
    n = _check_n("seq_fb", n, 2)
    g, gw = _sequential_graphs(n, w, mu2, w1n if n >= 3 else 0.0)
    P, Q, R = _pqr("identity_shift", None, "identity_shift", n, n - 1)
    return _finish("seq_fb", g, gw, P, Q, R, COCOERCIVE, _params(n=n, w1n=w1n))


def seq_frb(n, w=1.0, mu2=None, w1n=1.0):
    """Sequential forward-reflected-backward, ``p = n - 2``."""
    n = _check_n("seq_frb", n, 3)
    g, gw = _sequential_graphs(n, w, mu2, w1n)
    P, Q, R = _pqr("identity_shift", "identity_shift", "identity_shift", n, n - 2)
    return _finish("seq_frb", g, gw, P, Q, R, LIPSCHITZ, _params(n=n, w1n=w1n))


# Parallel (star graphs) ------------------------------------------------------


def _star(kind, n, w, mu2):
    g = build_topology(kind, n, _fn(w))
    gw = subgraph(g, kind, _fn(mu2))
    return g, gw


def par_up_fdr(n, w=1.0, mu2=None):
    """Hub first; every ``B_j`` is evaluated at ``x_1``."""
    n = _check_n("par_up_fdr", n, 2)
    g, gw = _star("star_first", n, w, mu2)
    P, Q, R = _pqr("identity_shift", None, "aggregated", n, n - 1)
    return _finish("par_up_fdr", g, gw, P, Q, R, COCOERCIVE, _params(n=n))


def par_up_fadr(n, w=1.0, mu2=None):
    n = _check_n("par_up_fadr", n, 3)
    g, gw = _star("star_first", n, w, mu2)
    P, Q, R = _pqr("identity_shift", "aggregated", "aggregated", n, n - 2)
    return _finish("par_up_fadr", g, gw, P, Q, R, LIPSCHITZ, _params(n=n))


def par_down_fdr(n, w=1.0, mu2=None):
    """Hub last; it collects every ``B_j(x_j)``."""
    n = _check_n("par_down_fdr", n, 2)
    g, gw = _star("star_last", n, w, mu2)
    P, Q, R = _pqr("aggregated", None, "identity_shift", n, n - 1)
    return _finish("par_down_fdr", g, gw, P, Q, R, COCOERCIVE, _params(n=n))


def par_down_fadr(n, w=1.0, mu2=None):
    n = _check_n("par_down_fadr", n, 3)
    g, gw = _star("star_last", n, w, mu2)
    P, Q, R = _pqr("identity_shift", "aggregated", "aggregated", n, n - 2)
    return _finish("par_down_fadr", g, gw, P, Q, R, LIPSCHITZ, _params(n=n),
                   notes="every node reads x_1 through R; not local on the star")


# Complete graphs -------------------------------------------------------------


def _complete_pqr(n, p, variant, regularity):
    if variant not in (1, 2):
        raise InvalidInputError(f"variant must be 1 or 2, got {variant}")
    second = "identity_shift" if variant == 1 else "aggregated"
    if regularity == COCOERCIVE:
        return _pqr("identity_shift", None, second, n, p)
    if regularity == LIPSCHITZ:
        return _pqr("identity_shift", second, second, n, p)
    raise InvalidInputError(f"unknown regularity {regularity!r}")


def _complete_family(name, sub_kind, n, variant, regularity, p, w, mu2):
    n = _check_n(name, n, 2 if regularity == COCOERCIVE else 3)
    if p is None:
        p = n - 1 if regularity == COCOERCIVE else n - 2
    g = build_topology("complete", n, _fn(w))
    gw = subgraph(g, sub_kind, _fn(mu2))
    if p == 0:
        P, Q, R = standard_PQR("identity_shift", n, 0)
    else:
        P, Q, R = _complete_pqr(n, p, variant, regularity)
    if regularity == LIPSCHITZ and p == 0:
        regularity = COCOERCIVE
    return _finish(name, g, gw, P, Q, R, regularity,
                   _params(n=n, p=p, variant=variant, regularity=regularity))


def complete(n, variant=1, regularity=COCOERCIVE, p=None, w=1.0, mu2=None):
    return _complete_family("complete", "complete", n, variant, regularity, p, w, mu2)


def complete_star(n, variant=1, regularity=COCOERCIVE, p=None, w=1.0, mu2=None):
    """Complete ``G`` with the star centred at node ``n`` as ``G'``."""
    return _complete_family("complete_star", "star_last", n, variant, regularity, p, w, mu2)


# Small classical methods -----------------------------------------------------


def davis_yin(w=1.0, mu2=None):
    """Two nodes, one forward operator."""
    w = float(w)
    mu2 = w if mu2 is None else float(mu2)
    g = WeightedGraph(2, [(1, 2, w)])
    gw = subgraph(g, [(1, 2)], mu2)
    P = np.array([[0.0], [1.0]])
    R = np.array([[1.0, 0.0]])
    mu = np.sqrt(mu2)
    renaming = {"z_hat": 2.0 * mu / w, "gamma_hat": 2.0 / w, "lambda_hat": 2.0 * mu2 / w}
    return _finish("davis_yin", g, gw, P, np.zeros((2, 1)), R, COCOERCIVE,
                   {"w": w, "mu2": mu2}, renaming=renaming,
                   notes="scale factors map (z, gamma, lambda) to the hatted variables")


def frb_classic(w13=0.0):
    """Three nodes with ``A_1 = A_3 = 0`` in mind; reduces to forward-reflected-backward."""
    w13 = float(w13)
    edges = [(1, 2, 1.0), (2, 3, 1.0)] + ([(1, 3, w13)] if w13 > 0 else [])
    g = WeightedGraph(3, edges)
    gw = subgraph(g, [(1, 2), (2, 3)], 1.0)
    P = np.array([[0.0], [1.0], [0.0]])
    Q = np.array([[0.0], [0.0], [1.0]])
    R = np.array([[1.0, 0.0, 0.0]])
    return _finish("frb_classic", g, gw, P, Q, R, LIPSCHITZ, {"w13": w13},
                   renaming={"lambda": (1.0 + w13) / 2.0, "index_shift": 1},
                   notes="x_1^k equals x_2^(k-1) once A_1 = 0 and lambda = (1 + w13)/2")


def ryu(n=3):
    """No forward operators; complete ``G`` with weight 2 and star ``G'`` with weight 1."""
    n = _check_n("ryu", n, 3)
    pre = _complete_family("ryu", "star_last", n, 1, COCOERCIVE, 0, 2.0, 1.0)
    delta = float(n - 1)
    return Preset("ryu", pre.scheme, pre.graph, pre.subgraph, COCOERCIVE, {"n": n},
                  renaming={"z_hat": 1.0 / delta, "alpha": 1.0 / delta, "theta": 1.0 / delta},
                  notes="z_hat = z/delta, alpha = gamma/delta, theta = lambda/delta")


def product_space_up(n):
    """``n`` scheme nodes; node 1 carries the zero operator and averages the duals."""
    n = _check_n("product_space_up", n, 2)
    pre = par_up_fdr(n, w=2.0, mu2=1.0)
    return Preset("product_space_up", pre.scheme, pre.graph, pre.subgraph, COCOERCIVE, {"n": n},
                  notes="A_1 = 0; operator i of the original problem sits on node i + 1")


def product_space_down(n):
    """``n`` scheme nodes; the last node carries the zero operator."""
    n = _check_n("product_space_down", n, 2)
    pre = par_down_fdr(n, w=2.0, mu2=1.0)
    return Preset("product_space_down", pre.scheme, pre.graph, pre.subgraph, COCOERCIVE, {"n": n},
                  notes="A_n = 0; operator i of the original problem sits on node i")


_BUILDERS = {
    "graph_fb": graph_fb, "graph_frb": graph_frb, "seq_fb": seq_fb, "seq_frb": seq_frb,
    "par_up_fdr": par_up_fdr, "par_up_fadr": par_up_fadr, "par_down_fdr": par_down_fdr,
    "par_down_fadr": par_down_fadr, "complete": complete, "complete_star": complete_star,
    "davis_yin": davis_yin, "frb_classic": frb_classic, "ryu": ryu,
    "product_space_up": product_space_up, "product_space_down": product_space_down,
}


def make_preset(name, **params):
    """Build a preset by name; ``params`` go to the matching constructor.

    ``graph_fb`` and ``graph_frb`` accept ``graph`` as a :class:`WeightedGraph`
    or as a JSON-style dict ``{"n", "edges", "subgraph"?}``.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise InvalidInputError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}") from None
    if name in ("graph_fb", "graph_frb"):
        graph = params.pop("graph", None)
        if graph is None:
            raise InvalidInputError(f"{name} needs a graph")
        if isinstance(graph, dict):
            from .graphs import graph_from_dict
            graph, sub = graph_from_dict(graph)
            params.setdefault("sub", sub)
        if "h" in params and isinstance(params["h"], (list, tuple)):
            params["h"] = {i + 2: int(v) for i, v in enumerate(params["h"])}
        return builder(graph, **params)
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for {name}: {exc}") from exc


def default_instances(n=5):
    """One instance of every preset at a small size, for certification sweeps."""
    ring = build_topology("ring", n)
    return [
        graph_fb(ring), graph_frb(ring), seq_fb(n), seq_frb(n), par_up_fdr(n), par_up_fadr(n),
        par_down_fdr(n), par_down_fadr(n), complete(n), complete_star(n, variant=2, regularity=LIPSCHITZ),
        davis_yin(), frb_classic(), ryu(), product_space_up(n), product_space_down(n),
    ]


# Oracles -------------------------------------------------------------------


@dataclass
class OracleTrace:
    xs: list
    aux: list

    @property
    def x(self):
        return np.stack(self.xs)


def oracle_davis_yin(A1, A2, B, gamma_hat, lambda_hat, z0, iters):
    """``x1 = J(z)``, ``x2 = J(2 x1 - z - g B x1)``, ``z -= l (x1 - x2)``."""
    z = np.array(z0, dtype=float)
    xs, zs = [], []
    for _ in range(iters):
        x1 = A1.resolve(gamma_hat, z)
        x2 = A2.resolve(gamma_hat, 2 * x1 - z - gamma_hat * B.apply(x1))
        xs.append(np.stack([x1, x2]))
        zs.append(z.copy())
        z = z - lambda_hat * (x1 - x2)
    return OracleTrace(xs, zs)


def oracle_frb(A, B, gamma, x_prev, x_cur, iters, w13=0.0):
    """``x+ = J(gamma A)((1 - w13) x + w13 x- - 2 gamma B x + gamma B x-)``; returns ``iters`` new points."""
    x_prev, x_cur = np.array(x_prev, dtype=float), np.array(x_cur, dtype=float)
    Bprev = B.apply(x_prev)
    xs = []
    for _ in range(iters):
        Bcur = B.apply(x_cur)
        nxt = A.resolve(gamma, (1 - w13) * x_cur + w13 * x_prev - 2 * gamma * Bcur + gamma * Bprev)
        xs.append(nxt)
        x_prev, x_cur, Bprev = x_cur, nxt, Bcur
    return OracleTrace(xs, [])


def oracle_ryu(A1, A2, A3, alpha, theta, z_hat0, iters):
    """Three-operator resolvent splitting on hatted duals ``(z1, z2)``."""
    z1, z2 = (np.array(v, dtype=float) for v in z_hat0)
    xs, zs = [], []
    for _ in range(iters):
        x1 = A1.resolve(alpha, z1)
        x2 = A2.resolve(alpha, x1 + z2)
        x3 = A3.resolve(alpha, x1 - z1 + x2 - z2)
        xs.append(np.stack([x1, x2, x3]))
        zs.append(np.stack([z1, z2]))
        z1 = z1 + theta * (x3 - x1)
        z2 = z2 + theta * (x3 - x2)
    return OracleTrace(xs, zs)


def oracle_product_space_up(As, Bs, gamma, lam, z0, iters):
    """Average the duals, then one backward step per operator in parallel."""
    z = np.array(z0, dtype=float)
    xs, zs = [], []
    for _ in range(iters):
        x1 = z.mean(axis=0)
        rest = [A.resolve(gamma, 2 * x1 - z[i] - gamma * B.apply(x1))
                for i, (A, B) in enumerate(zip(As, Bs))]
        xs.append(np.stack([x1] + rest))
        zs.append(z.copy())
        z = z - lam * (x1 - np.stack(rest))
    return OracleTrace(xs, zs)


def oracle_product_space_down(As, Bs, gamma, lam, z0, iters):
    """One backward step per operator in parallel, then an averaging node."""
    z = np.array(z0, dtype=float)
    k = len(As)
    xs, zs = [], []
    for _ in range(iters):
        first = np.stack([A.resolve(gamma, z[i]) for i, A in enumerate(As)])
        forward = sum(B.apply(first[i]) for i, B in enumerate(Bs))
        last = (2 * first.sum(axis=0) - z.sum(axis=0) - gamma * forward) / k
        xs.append(np.vstack([first, last[None]]))
        zs.append(z.copy())
        z = z - lam * (first - last)
    return OracleTrace(xs, zs)


# Reduction suite -------------------------------------------------------------


@dataclass(frozen=True)
class Reduction:
    """A preset paired with an oracle and the rule comparing their iterates."""

    name: str
    run: object
    description: str = ""

    def __call__(self, iters=200, seed=0):
        return self.run(iters, seed)


def _random_resolvents(rng, count, d):
    from .operators import BallNormalCone, LinearMonotone
    ops = []
    for i in range(count):
        if i % 2 == 0:
            ops.append(BallNormalCone(rng.normal(size=d), float(rng.uniform(0.5, 2.0))))
        else:
            S = rng.normal(size=(d, d))
            G = rng.normal(size=(d, d))
            ops.append(LinearMonotone(0.3 * (G @ G.T / d) + 0.5 * (S - S.T)))
    return ops


def _random_cocoercive(rng, count, d):
    from .operators import QuadraticGradient
    out = []
    for _ in range(count):
        G = rng.uniform(size=(d, d))
        out.append(QuadraticGradient(G.T @ G / np.linalg.norm(G.T @ G, 2) * rng.uniform(0.5, 2.0)))
    return out


def _engine_x(preset, problem, gamma, lam, z0, iters):
    from .solver import iterate
    xs = []
    gen = iterate(preset.scheme, problem, gamma, lam, z0)
    for k, x, _, _ in gen:
        if k >= iters:
            break
        xs.append(x.copy())
    gen.close()
    return np.stack(xs)


def _check_inside(preset, problem, gamma, lam):
    from .scheme import parameter_ranges
    parameter_ranges(preset.scheme, problem.ell).validate(gamma, lam)


def _run_davis_yin(iters, seed):
    from .operators import ProblemInstance
    rng = np.random.default_rng(seed)
    d = 6
    w, mu2 = 3.0, 2.0
    pre = davis_yin(w, mu2)
    A = _random_resolvents(rng, 2, d)
    B = _random_cocoercive(rng, 1, d)
    prob = ProblemInstance(A, B)
    gamma = 0.4 * 2.0 / (prob.ell * pre.scheme.tau())
    lam = 0.5
    _check_inside(pre, prob, gamma, lam)
    z0 = rng.normal(size=(1, d))
    got = _engine_x(pre, prob, gamma, lam, z0, iters)
    r = pre.renaming
    want = oracle_davis_yin(A[0], A[1], B[0], r["gamma_hat"] * gamma, r["lambda_hat"] * lam,
                            r["z_hat"] * z0[0], iters).x
    return float(np.abs(got - want).max())


def _run_frb(iters, seed):
    from .operators import ProblemInstance, Saddle, ZeroResolvent
    rng = np.random.default_rng(seed)
    d1, d2 = 3, 3
    theta = rng.uniform(size=(d2, d1)) + np.eye(d1)
    B = Saddle(theta)
    A2 = _random_resolvents(rng, 1, d1 + d2)[0]
    d = d1 + d2
    prob = ProblemInstance([ZeroResolvent(d), A2, ZeroResolvent(d)], [B])
    pre = frb_classic(0.0)
    gamma, lam = 0.2 / prob.ell, 0.5
    _check_inside(pre, prob, gamma, lam)
    z0 = rng.normal(size=(2, d))
    got = _engine_x(pre, prob, gamma, lam, z0, iters + 2)[:, 1]
    want = oracle_frb(A2, B, gamma, got[0], got[1], iters).x
    return float(np.abs(got[2:] - want).max())


def _run_ryu(iters, seed):
    from .operators import ProblemInstance
    rng = np.random.default_rng(seed)
    d = 5
    A = _random_resolvents(rng, 3, d)
    prob = ProblemInstance(A, [])
    pre = ryu(3)
    gamma, lam = 1.3, 0.8
    _check_inside(pre, prob, gamma, lam)
    z0 = rng.normal(size=(2, d))
    got = _engine_x(pre, prob, gamma, lam, z0, iters)
    r = pre.renaming
    want = oracle_ryu(*A, r["alpha"] * gamma, r["theta"] * lam, r["z_hat"] * z0, iters).x
    return float(np.abs(got - want).max())


def _run_product_up(iters, seed):
    from .operators import ProblemInstance, ZeroResolvent
    rng = np.random.default_rng(seed)
    k, d = 4, 5
    A = _random_resolvents(rng, k, d)
    B = _random_cocoercive(rng, k, d)
    prob = ProblemInstance([ZeroResolvent(d)] + A, B)
    pre = product_space_up(k + 1)
    gamma = 0.3 * 2.0 / (prob.ell * pre.scheme.tau())
    lam = 0.6
    _check_inside(pre, prob, gamma, lam)
    z0 = rng.normal(size=(k, d))
    got = _engine_x(pre, prob, gamma, lam, z0, iters)
    want = oracle_product_space_up(A, B, gamma, lam, z0, iters).x
    return float(np.abs(got - want).max())


def _run_product_down(iters, seed):
    from .operators import ProblemInstance, ZeroResolvent
    rng = np.random.default_rng(seed)
    k, d = 4, 7
    A = _random_resolvents(rng, k, d)
    B = _random_cocoercive(rng, k, d)
    prob = ProblemInstance(A + [ZeroResolvent(d)], B)
    pre = product_space_down(k + 1)
    gamma = 0.3 * 2.0 / (prob.ell * pre.scheme.tau())
    lam = 0.6
    _check_inside(pre, prob, gamma, lam)
    z0 = rng.normal(size=(k, d))
    got = _engine_x(pre, prob, gamma, lam, z0, iters)
    want = oracle_product_space_down(A, B, gamma, lam, z0, iters).x
    return float(np.abs(got - want).max())


def reduction_suite():
    """Preset/oracle pairs; each entry returns the max iterate deviation."""
    return [
        Reduction("davis_yin", _run_davis_yin, "two nodes vs the three-operator recursion, hatted variables"),
        Reduction("frb_classic", _run_frb, "x_2 iterates from k = 2 on, A_1 = A_3 = 0, lambda = 1/2"),
        Reduction("ryu", _run_ryu, "complete G (w = 2), star G' (mu = 1), no forward terms"),
        Reduction("product_space_up", _run_product_up, "hub node with A = 0 averaging the duals"),
        Reduction("product_space_down", _run_product_down, "averaging node with A = 0 placed last"),
    ]
