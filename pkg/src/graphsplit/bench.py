"""Benchmark problems, their reference solutions, and parameter sweeps.

Two families are generated:

* ball-constrained quadratic programs ``min sum_j x^T Q_j x / 2`` over an
  intersection of ``n`` balls (cocoercive forward terms), and
* zero-sum matrix games between two teams of ``p`` players, posed on a
  product of simplices with skew forward terms (Lipschitz only).

Randomness comes from ``numpy.random.SeedSequence``: each array is drawn
from its own spawned child stream, so adding a draw never shifts another.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog, minimize, root

from .errors import InvalidInputError
from .operators import (
    BallNormalCone,
    ProblemInstance,
    ProductResolvent,
    QuadraticGradient,
    Saddle,
    SimplexNormalCone,
    ZeroForward,
    project_simplex,
)
from .presets import (
    complete,
    complete_star,
    oracle_product_space_down,
    par_down_fadr,
    par_down_fdr,
    par_up_fadr,
    par_up_fdr,
    seq_fb,
    seq_frb,
)
from .scheme import COCOERCIVE, LIPSCHITZ
from .solver import SolverConfig, relative_error, ranges_for, solve, solve_batch

BALL_RECIPE = (
    "q ~ U[-1,1]^d + 3; c_i = q + U(0,0.5) * random unit direction; "
    "r_i = ||c_i - q|| + U(0.5,1.5); Q_j = G^T G, G ~ U(0,1)^(d x d), rescaled to ||Q_j|| ~ U(0.5,2); "
    "redraw while the origin is feasible"
)


def _streams(seed, attempt, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence([int(seed), attempt]).spawn(count)]


# Ball-constrained QP --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BallQPInstance:
    centers: np.ndarray
    radii: np.ndarray
    Q: np.ndarray
    seed: object = None
    interior_point: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.asarray(self.radii, dtype=float).ravel()
        Q = np.asarray(self.Q, dtype=float).reshape(-1, c.shape[1], c.shape[1])
        if r.shape != (c.shape[0],) or np.any(r <= 0):
            raise InvalidInputError("need one positive radius per center")
        for name, value in (("centers", c), ("radii", r), ("Q", Q)):
            object.__setattr__(self, name, value)
        if self.interior_point is not None:
            object.__setattr__(self, "interior_point", np.asarray(self.interior_point, dtype=float))

    @property
    def n(self):
        return self.centers.shape[0]

    @property
    def d(self):
        return self.centers.shape[1]

    def problem(self):
        A = [BallNormalCone(c, r) for c, r in zip(self.centers, self.radii)]
        B = [QuadraticGradient(q) for q in self.Q]
        return ProblemInstance(A, B, {"generator": "ball_qp", "seed": self.seed})

    def to_dict(self):
        return {
            "kind": "ball_qp",
            "seed": self.seed,
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
            "Q": self.Q.tolist(),
            "interior_point": None if self.interior_point is None else self.interior_point.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["centers"], doc["radii"], doc["Q"], doc.get("seed"),
                   doc.get("interior_point"), doc.get("provenance", {}))


def gen_ball_qp(n, d, seed, norm_range=(0.5, 2.0)):
    """Random feasible instance whose feasible set avoids the origin.

    Returns ``(instance, problem)``.
    """
    if n < 2 or d < 1:
        raise InvalidInputError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    for attempt in range(1000):
        s_q, s_dir, s_len, s_rad, s_G, s_norm = _streams(seed, attempt, 6)
        q = s_q.uniform(-1.0, 1.0, d) + 3.0
        dirs = s_dir.normal(size=(n, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        centers = q + dirs * (0.5 * s_len.uniform(size=(n, 1)))
        radii = np.linalg.norm(centers - q, axis=1) + s_rad.uniform(0.5, 1.5, n)
        if np.all(np.linalg.norm(centers, axis=1) <= radii):
            continue
        G = s_G.uniform(size=(n - 1, d, d))
        Q = np.einsum("kij,kil->kjl", G, G)
        target = s_norm.uniform(*norm_range, n - 1)
        Q *= (target / np.linalg.norm(Q, 2, axis=(1, 2)))[:, None, None]
        Q = 0.5 * (Q + Q.transpose(0, 2, 1))
        inst = BallQPInstance(centers, radii, Q, seed, q,
                              {"recipe": BALL_RECIPE, "attempt": attempt})
        return inst, inst.problem()
    raise RuntimeError("could not draw an instance excluding the origin")  # pragma: no cover


@dataclass(frozen=True)
class BallQPSolution:
    x: np.ndarray
    multipliers: np.ndarray
    kkt_residual: float
    cross_check_gap: float = None

    def selections(self, inst):
        """Normal-cone elements ``mu_i (x* - c_i)`` certifying the zero."""
        return self.multipliers[:, None] * (self.x - inst.centers)


def _kkt(inst, x, mu):
    H = inst.Q.sum(axis=0)
    diff = x - inst.centers
    stat = H @ x + mu @ diff
    slack = inst.radii ** 2 - np.sum(diff * diff, axis=1)
    feas = np.maximum(-slack, 0.0)
    comp = np.abs(mu * slack)
    scale = max(1.0, np.linalg.norm(H @ x))
    return max(np.linalg.norm(stat) / scale, feas.max(), comp.max(), np.maximum(-mu, 0).max())


def ball_qp_reference(inst, cross_check_iters=0, active_tol=1e-6):
    """Minimizer with KKT multipliers, via SLSQP and a Newton polish on the active set.

    With ``cross_check_iters > 0`` the independent product-space recursion is
    also run and its distance to the answer is stored in ``cross_check_gap``.
    """
    H = inst.Q.sum(axis=0)
    start = inst.interior_point if inst.interior_point is not None else inst.centers.mean(axis=0)
    cons = [
        {"type": "ineq",
         "fun": (lambda x, c=c, r=r: r * r - (x - c) @ (x - c)),
         "jac": (lambda x, c=c: -2.0 * (x - c))}
        for c, r in zip(inst.centers, inst.radii)
    ]
    res = minimize(lambda x: 0.5 * x @ H @ x, start, jac=lambda x: H @ x, constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 2000})
    x = res.x
    mu = np.zeros(inst.n)
    if np.any(H):
        slack = inst.radii - np.linalg.norm(x - inst.centers, axis=1)
        active = np.flatnonzero(slack < active_tol)
        if active.size:
            x, mu = _polish(inst, H, x, active)
    gap = None
    if cross_check_iters:
        gap = float(np.linalg.norm(_product_space_solution(inst, cross_check_iters) - x))
    return BallQPSolution(x, mu, float(_kkt(inst, x, mu)), gap)


def _polish(inst, H, x, active):
    C, r = inst.centers[active], inst.radii[active]
    lsq = np.linalg.lstsq((x - C).T, -(H @ x), rcond=None)[0]
    d, k = x.size, active.size

    def F(v):
        y, m = v[:d], v[d:]
        diff = y - C
        return np.concatenate([H @ y + m @ diff, 0.5 * (np.sum(diff * diff, axis=1) - r * r)])

    def J(v):
        y, m = v[:d], v[d:]
        top = np.hstack([H + m.sum() * np.eye(d), (y - C).T])
        bottom = np.hstack([y - C, np.zeros((k, k))])
        return np.vstack([top, bottom])

    sol = root(F, np.concatenate([x, lsq]), jac=J, method="hybr", options={"xtol": 1e-15})
    mu = np.zeros(inst.n)
    mu[active] = sol.x[d:]
    return sol.x[:d], mu


def _product_space_solution(inst, iters):
    prob = inst.problem()
    A = list(prob.A)
    B = list(prob.B) + [ZeroForward(inst.d)]
    ell = max(b.lipschitz for b in B)
    gamma = 1.0 / ell
    trace = oracle_product_space_down(A, B, gamma, 0.5, np.zeros((inst.n, inst.d)), iters)
    return trace.xs[-1][-1]


# Matrix game -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MatrixGameInstance:
    thetas: np.ndarray
    seed: object = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        T = np.asarray(self.thetas, dtype=float)
        if T.ndim != 3 or T.shape[1] != T.shape[2]:
            raise InvalidInputError("thetas must have shape (p, d, d)")
        object.__setattr__(self, "thetas", T)

    @property
    def p(self):
        return self.thetas.shape[0]

    @property
    def d(self):
        return self.thetas.shape[1]

    @property
    def n(self):
        return self.p + 2

    def problem(self):
        A = [ProductResolvent((SimplexNormalCone(self.d), SimplexNormalCone(self.d)))
             for _ in range(self.n)]
        B = [Saddle(T) for T in self.thetas]
        return ProblemInstance(A, B, {"generator": "matrix_game", "seed": self.seed})

    def to_dict(self):
        return {"kind": "matrix_game", "seed": self.seed, "thetas": self.thetas.tolist(),
                "provenance": self.provenance}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["thetas"], doc.get("seed"), doc.get("provenance", {}))


def gen_matrix_game(p, d, seed):
    """``Theta_j = s_j I - K_j`` with ``K_j = j L_j``, ``L_j ~ U(0,1)``, ``s_j = 1.1 ||K_j||``."""
    if p < 1 or d < 1:
        raise InvalidInputError(f"need p >= 1 and d >= 1, got p={p}, d={d}")
    (rng,) = _streams(seed, 0, 1)
    L = rng.uniform(size=(p, d, d))
    K = L * np.arange(1, p + 1)[:, None, None]
    s = 1.1 * np.linalg.norm(K, 2, axis=(1, 2))
    thetas = s[:, None, None] * np.eye(d) - K
    inst = MatrixGameInstance(thetas, seed, {"recipe": "Theta_j = 1.1||K_j|| I - K_j, K_j = j U(0,1)"})
    return inst, inst.problem()


@dataclass(frozen=True)
class GameSolution:
    x: np.ndarray
    value: float
    saddle_residual: float
    lp_gap: float

    def selections(self, problem):
        """Equal shares of ``-sum_j B_j x*``, each in the normal cone at an interior point."""
        total = problem.forward_sum(self.x)
        return np.tile(-total / problem.n, (problem.n, 1))


def saddle_residual(thetas, x):
    """Distance from ``x = (u, v)`` to one projected step of the game's natural map."""
    d = thetas.shape[1]
    T = thetas.sum(axis=0)
    u, v = x[:d], x[d:]
    du = u - project_simplex(u - T.T @ v)
    dv = v - project_simplex(v + T @ u)
    return float(np.sqrt(du @ du + dv @ dv))


def game_reference(inst):
    """Interior equilibrium of the aggregate game, checked against a linear program."""
    T = inst.thetas.sum(axis=0)
    d = inst.d
    ones = np.ones(d)
    u = np.linalg.solve(T, ones)
    v = np.linalg.solve(T.T, ones)
    value = 1.0 / u.sum()
    u, v = u / u.sum(), v / v.sum()
    if np.any(u <= 0) or np.any(v <= 0):
        raise InvalidInputError("the aggregate game is not completely mixed")
    # min_u max_i (T u)_i over the simplex, as an LP in (u, t).
    c = np.r_[np.zeros(d), 1.0]
    A_ub = np.hstack([T, -np.ones((d, 1))])
    A_eq = np.r_[np.ones(d), 0.0][None]
    lp = linprog(c, A_ub=A_ub, b_ub=np.zeros(d), A_eq=A_eq, b_eq=[1.0],
                 bounds=[(0, None)] * d + [(None, None)], method="highs")
    lp_gap = float(max(np.abs(lp.x[:d] - u).max(), abs(lp.x[d] - value)))
    x = np.r_[u, v]
    return GameSolution(x, float(value), saddle_residual(inst.thetas, x), lp_gap)


# Metrics and sweeps ------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    gamma_hat: float
    lambda_hat: float
    gamma: float
    lam: float
    final_error: float
    final_residual: float
    iters_to_tol: object
    seconds: float


@dataclass
class SweepResult:
    cells: list
    iters: int

    @property
    def best(self):
        """Earliest cell to reach the error tolerance; otherwise the smallest final error."""
        finite = [c for c in self.cells if np.isfinite(c.final_error)]
        return min(finite, key=lambda c: (c.iters_to_tol is None, c.iters_to_tol or 0,
                                          c.final_error, c.gamma_hat, c.lambda_hat))

    def rows(self, timing=True):
        out = []
        for c in self.cells:
            out.append([
                f"{c.gamma_hat:g}", f"{c.lambda_hat:g}", repr(float(c.final_error)),
                "" if c.iters_to_tol is None else str(c.iters_to_tol),
                f"{c.seconds:.6f}" if timing else "",
            ])
        return out


SWEEP_COLUMNS = ("gamma_hat", "lambda_hat", "final_error", "iters_to_tol", "seconds")
DEFAULT_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


def sweep(problem, scheme, gamma_hats, lambda_hats, iters, x_star, z0=None, error_tol=None):
    """Run every ``(gamma_hat, lambda_hat)`` pair and report final errors.

    ``gamma = gamma_hat * gamma_max`` and ``lambda = lambda_hat * lambda_max(gamma)``.
    Cells advance together in one batched iteration; a single cell goes
    through :func:`solve` directly.
    """
    gh = np.asarray(gamma_hats, dtype=float).ravel()
    lh = np.asarray(lambda_hats, dtype=float).ravel()
    if np.any((gh <= 0) | (gh >= 1)) or np.any((lh <= 0) | (lh >= 1)):
        raise InvalidInputError("gamma_hat and lambda_hat must lie in (0, 1)")
    rng = ranges_for(scheme, problem)
    G, L = np.meshgrid(gh, lh, indexing="ij")
    G, L = G.ravel(), L.ravel()
    gammas = G * rng.gamma_max
    lams = L * np.asarray(rng.lambda_max(gammas))
    t0 = time.perf_counter()
    if G.size == 1:
        res = solve(scheme, problem, SolverConfig(float(gammas[0]), float(lams[0]), iters,
                                                  error_tol=error_tol), z0=z0, x_star=x_star)
        errs, resid = np.array([res.final_error]), np.array([res.final_residual])
        hits = np.array([-1 if res.iters_to_tol is None else res.iters_to_tol])
    else:
        out = solve_batch(scheme, problem, gammas, lams, iters, z0=z0, x_star=x_star,
                          error_tol=error_tol)
        errs, resid, hits = out["final_error"], out["final_residual"], out["first_hit"]
    per_cell = (time.perf_counter() - t0) / G.size
    cells = [
        SweepCell(float(G[k]), float(L[k]), float(gammas[k]), float(lams[k]), float(errs[k]),
                  float(resid[k]), None if hits[k] < 0 else int(hits[k]), per_cell)
        for k in range(G.size)
    ]
    return SweepResult(cells, iters)


# Algorithm suites --------------------------------------------------------------


def cocoercive_suite(n):
    """The seven cocoercive-case algorithms on ``n`` nodes with unit weights."""
    return {
        "seq_fb": seq_fb(n),
        "par_up_fdr": par_up_fdr(n),
        "par_down_fdr": par_down_fdr(n),
        "complete_1": complete(n, 1, COCOERCIVE),
        "complete_2": complete(n, 2, COCOERCIVE),
        "complete_star_1": complete_star(n, 1, COCOERCIVE),
        "complete_star_2": complete_star(n, 2, COCOERCIVE),
    }


def lipschitz_suite(n):
    """The seven Lipschitz-case algorithms on ``n`` nodes with unit weights."""
    return {
        "seq_frb": seq_frb(n),
        "par_up_fadr": par_up_fadr(n),
        "par_down_fadr": par_down_fadr(n),
        "complete_1": complete(n, 1, LIPSCHITZ),
        "complete_2": complete(n, 2, LIPSCHITZ),
        "complete_star_1": complete_star(n, 1, LIPSCHITZ),
        "complete_star_2": complete_star(n, 2, LIPSCHITZ),
    }


@dataclass
class BenchRun:
    name: str
    sweep: SweepResult
    best: SweepCell
    result: object


def run_bench(kind, size, seed, iters, grid=DEFAULT_GRID, record_every=10, names=None,
              error_tol=None, map_fn=map):
    """Sweep each suite algorithm, then rerun its best cell with a full trace.

    ``kind`` is ``"ball_qp"`` (``size = (n, d)``) or ``"matrix_game"``
    (``size = (p, d)``). ``map_fn`` lets a caller spread the algorithms over
    a worker pool. Returns ``(instance, reference, runs)``.
    """
    if kind == "ball_qp":
        inst, prob = gen_ball_qp(*size, seed)
        ref = ball_qp_reference(inst)
        suite = cocoercive_suite(inst.n)
    elif kind == "matrix_game":
        inst, prob = gen_matrix_game(*size, seed)
        ref = game_reference(inst)
        suite = lipschitz_suite(inst.n)
    else:
        raise InvalidInputError(f"unknown benchmark kind {kind!r}")
    chosen = [(name, pre) for name, pre in suite.items() if names is None or name in names]

    def one(item):
        name, pre = item
        sw = sweep(prob, pre.scheme, grid, grid, iters, ref.x, error_tol=error_tol)
        best = sw.best
        result = solve(pre.scheme, prob,
                       SolverConfig(best.gamma, best.lam, iters, record_every=record_every),
                       x_star=ref.x)
        return BenchRun(name, sw, best, result)

    return inst, ref, list(map_fn(one, chosen))


# Instance files ------------------------------------------------------------------


def instance_from_dict(doc):
    kind = doc.get("kind")
    if kind == "ball_qp":
        return BallQPInstance.from_dict(doc)
    if kind == "matrix_game":
        return MatrixGameInstance.from_dict(doc)
    raise InvalidInputError(f"unknown instance kind {kind!r}")


def load_instance(path):
    return instance_from_dict(json.loads(Path(path).read_text()))


def save_instance(inst, path):
    Path(path).write_text(json.dumps(inst.to_dict()))


__all__ = [
    "BallQPInstance", "MatrixGameInstance", "gen_ball_qp", "gen_matrix_game", "ball_qp_reference",
    "game_reference", "relative_error", "sweep", "SweepResult", "SweepCell", "SWEEP_COLUMNS",
    "cocoercive_suite", "lipschitz_suite", "run_bench", "saddle_residual", "load_instance",
    "save_instance", "instance_from_dict", "DEFAULT_GRID",
]
