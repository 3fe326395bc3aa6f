"""The iteration engine.

One iteration computes the primal block ``x`` by a single pass over the
nodes in index order, then updates the dual block::

    x_i = J_{(gamma/delta_i) A_i}( (1/delta_i) [ (Mz)_i + sum_{j<i} N_ij x_j
            - gamma sum_j (P_ij - Q_ij) B_j(sum_l R_jl x_l)
            - gamma sum_j Q_ij B_j(sum_l P_lj x_l) ] )
    z  <- z - lambda M^T x

In ``reduced_v`` mode the engine stores ``v = M z`` instead and updates it
with ``M M^T x``.

Arrays carry an optional batch axis between the node axis and the vector
axis: ``z`` has shape ``(m, *batch, d)``. ``gamma`` and ``lambda`` may then
be arrays of shape ``batch`` so that a whole parameter grid advances in
lock step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DivergenceError, InvalidConfigError, InvalidInputError, UnsupportedSchemeError
from .scheme import COCOERCIVE, check_explicit, parameter_ranges

FULL = "full_z"
REDUCED = "reduced_v"
MODES = (FULL, REDUCED)


# Sweep plan --------------------------------------------------------------


def _nonzeros(vec):
    idx = np.flatnonzero(vec)
    return idx, np.asarray(vec)[idx].astype(float)


def _combine(idx, vals, x):
    if idx.size == 1:
        return x[idx[0]] if vals[0] == 1.0 else vals[0] * x[idx[0]]
    return np.tensordot(vals, x[idx], axes=1)


class SweepPlan:
    """Sparsity pattern of a scheme, precomputed for fast sweeps."""

    def __init__(self, scheme):
        report = check_explicit(scheme)
        if not report.ok:
            raise UnsupportedSchemeError(
                "scheme is not explicit: " + "; ".join(report.violations[:5])
            )
        self.scheme = scheme
        self.n, self.m, self.p = scheme.n, scheme.m, scheme.p
        self.delta = scheme.delta
        self.N_rows = [_nonzeros(scheme.N[i, :i]) for i in range(self.n)]
        self.R_args = [_nonzeros(scheme.R[j]) for j in range(self.p)]
        self.P_args = [_nonzeros(scheme.P[:, j]) for j in range(self.p)]
        # When both arguments of B_j coincide a single evaluation serves both terms.
        self.same_arg = [np.array_equal(scheme.R[j], scheme.P[:, j]) for j in range(self.p)]
        PQ = scheme.P - scheme.Q
        self.forward_terms = []
        for i in range(self.n):
            terms = [(j, float(PQ[i, j]), "R") for j in np.flatnonzero(PQ[i])]
            terms += [(j, float(scheme.Q[i, j]), "P") for j in np.flatnonzero(scheme.Q[i])]
            self.forward_terms.append(terms)
        self.M = scheme.M
        self.Mt = np.ascontiguousarray(scheme.M.T)
        self.MMt = scheme.M @ scheme.M.T


def forward_sweep(scheme, problem, gamma, dual_block, mode=FULL, plan=None, counter=None):
    """Compute the primal block from the dual block.

    ``dual_block`` holds ``z`` (``m`` rows) in ``full_z`` mode or ``v = M z``
    (``n`` rows) in ``reduced_v`` mode.
    """
    plan = plan or SweepPlan(scheme)
    dual = np.asarray(dual_block, dtype=float)
    if mode == FULL:
        if dual.shape[0] != plan.m:
            raise InvalidInputError(f"dual block needs {plan.m} rows, got {dual.shape[0]}")
        v = np.tensordot(plan.M, dual, axes=1)
    elif mode == REDUCED:
        if dual.shape[0] != plan.n:
            raise InvalidInputError(f"reduced block needs {plan.n} rows, got {dual.shape[0]}")
        v = dual
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    return _sweep(plan, problem, gamma, v, counter)


def _sweep(plan, problem, gamma, v, counter=None):
    gamma = np.asarray(gamma, dtype=float)
    gamma_v = gamma[..., None] if gamma.ndim else gamma
    A, B = problem.A, problem.B
    x = np.empty_like(v)
    at_R, at_P = {}, {}
    for i in range(plan.n):
        acc = v[i].copy()
        idx, vals = plan.N_rows[i]
        if idx.size:
            acc += _combine(idx, vals, x)
        for j, coef, which in plan.forward_terms[i]:
            if which == "R":
                val = at_R.get(j)
                if val is None:
                    val = B[j].apply(_combine(*plan.R_args[j], x))
                    at_R[j] = val
                    if plan.same_arg[j]:
                        at_P[j] = val
                    if counter is not None:
                        counter[j] += 1
            else:
                val = at_P.get(j)
                if val is None:
                    val = B[j].apply(_combine(*plan.P_args[j], x))
                    at_P[j] = val
                    if plan.same_arg[j]:
                        at_R[j] = val
                    if counter is not None:
                        counter[j] += 1
            acc -= (gamma_v * coef) * val
        d = plan.delta[i]
        x[i] = A[i].resolve(gamma / d, acc / d)
    return x


# Configuration and results ----------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Step size, relaxation schedule and stopping rule.

    ``lambda_schedule`` is a constant, a sequence indexed by iteration or a
    callable ``k -> lambda``. ``residual_tol = 0`` disables the residual stop;
    ``error_tol`` stops on the relative error when a reference is supplied.
    """

    gamma: Union[float, np.ndarray]
    lambda_schedule: Union[float, np.ndarray, Sequence, Callable] = 0.5
    max_iters: int = 1000
    residual_tol: float = 0.0
    mode: str = FULL
    record_every: int = 1
    error_tol: Optional[float] = None
    track_ergodic: bool = False
    validate: bool = True

    def lam(self, k):
        sched = self.lambda_schedule
        if callable(sched):
            return sched(k)
        if isinstance(sched, (list, tuple)) or np.ndim(sched) == 1:
            return sched[min(k, len(sched) - 1)]
        return sched


@dataclass
class SolverState:
    k: int
    dual: np.ndarray
    x: Optional[np.ndarray]
    mode: str = FULL
    residual_history: list = field(default_factory=list)
    consensus_history: list = field(default_factory=list)

    @property
    def z(self):
        if self.mode != FULL:
            raise AttributeError("reduced-mode state stores v = M z, not z")
        return self.dual

    @property
    def v(self):
        if self.mode != REDUCED:
            raise AttributeError("full-mode state stores z; compute M z for v")
        return self.dual


@dataclass(frozen=True)
class TraceRow:
    k: int
    residual: float
    consensus_gap: float
    relative_error: Optional[float] = None
    elapsed_seconds: float = 0.0
    ergodic_residual: Optional[float] = None


@dataclass
class SolveResult:
    consensus_point: np.ndarray
    final_residual: float
    iterations: int
    converged: bool
    trace: list
    x: np.ndarray = None
    dual: np.ndarray = None
    final_error: Optional[float] = None
    iters_to_tol: Optional[int] = None


# Monitors ----------------------------------------------------------------


def residual(scheme_or_Mt, x):
    """``||M^T x||_F / max(1, ||x||_F)``; one value per batch cell."""
    Mt = scheme_or_Mt.M.T if hasattr(scheme_or_Mt, "M") else scheme_or_Mt
    Mtx = np.tensordot(Mt, x, axes=1)
    return _resid_from(Mtx, x)


def _resid_from(Mtx, x):
    axes = (0, -1)
    num = np.sqrt(np.sum(Mtx * Mtx, axis=axes))
    den = np.maximum(1.0, np.sqrt(np.sum(x * x, axis=axes)))
    return num / den


def consensus_gap(x):
    xbar = x.mean(axis=0)
    return np.linalg.norm(x - xbar, axis=-1).max(axis=0)


def relative_error(x_block, x_star):
    """``max_i ||x_i - x*|| / ||x*||``; one value per batch cell."""
    x_star = np.asarray(x_star, dtype=float)
    ref = np.linalg.norm(x_star)
    if ref == 0.0:
        raise InvalidInputError("relative error is undefined for x* = 0")
    return np.linalg.norm(np.asarray(x_block) - x_star, axis=-1).max(axis=0) / ref


# Driving the iteration ---------------------------------------------------


def _check_problem(scheme, problem):
    if problem.n != scheme.n:
        raise InvalidInputError(f"scheme has {scheme.n} nodes but the problem has {problem.n} operators A_i")
    if problem.p != scheme.p:
        raise InvalidInputError(f"scheme expects {scheme.p} forward operators, problem has {problem.p}")
    if scheme.regularity == COCOERCIVE and scheme.p and not problem.cocoercive:
        raise InvalidConfigError("Q = 0 requires cocoercive forward operators")


def ranges_for(scheme, problem):
    return parameter_ranges(scheme, problem.ell, scheme.regularity)


def initial_dual(scheme, problem, z0, mode, batch=()):
    d = problem.dim
    if z0 is None:
        z = np.zeros((scheme.m, *batch, d))
    else:
        z = np.array(z0, dtype=float)
        if z.shape[0] != scheme.m:
            raise InvalidInputError(f"z0 needs {scheme.m} rows, got {z.shape[0]}")
        if batch and z.shape[1:-1] != tuple(batch):
            z = np.broadcast_to(z.reshape(scheme.m, *([1] * len(batch)), d), (scheme.m, *batch, d)).copy()
    return z if mode == FULL else np.tensordot(scheme.M, z, axes=1)


def iterate(scheme, problem, gamma, lambda_schedule, z0=None, mode=FULL, batch=(), plan=None):
    """Yield ``(k, x^k, dual^k, M^T x^k)`` forever; the dual is updated after the yield.

    The arrays are owned by the generator; copy them to keep them.
    """
    if mode not in MODES:
        raise InvalidInputError(f"unknown mode {mode!r}")
    plan = plan or SweepPlan(scheme)
    dual = initial_dual(scheme, problem, z0, mode, batch)
    lam_fn = lambda_schedule if callable(lambda_schedule) else (lambda k: lambda_schedule)
    k = 0
    while True:
        v = np.tensordot(plan.M, dual, axes=1) if mode == FULL else dual
        x = _sweep(plan, problem, gamma, v)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite iterate at iteration {k}", iteration=k)
        Mtx = np.tensordot(plan.Mt, x, axes=1)
        yield k, x, dual, Mtx
        lam = np.asarray(lam_fn(k), dtype=float)
        lam_b = lam.reshape(lam.shape + (1,)) if lam.ndim else lam
        if mode == FULL:
            dual = dual - lam_b * Mtx
        else:
            dual = dual - lam_b * np.tensordot(plan.M, Mtx, axes=1)
        k += 1


def step(scheme, problem, config, state, plan=None):
    """One iteration: sweep for ``x^k`` from the current dual, then relax the dual."""
    plan = plan or SweepPlan(scheme)
    mode = state.mode
    v = np.tensordot(plan.M, state.dual, axes=1) if mode == FULL else state.dual
    x = _sweep(plan, problem, config.gamma, v)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite iterate at iteration {state.k}", iteration=state.k)
    Mtx = np.tensordot(plan.Mt, x, axes=1)
    lam = config.lam(state.k)
    if mode == FULL:
        dual = state.dual - lam * Mtx
    else:
        dual = state.dual - lam * np.tensordot(plan.M, Mtx, axes=1)
    return SolverState(
        k=state.k + 1,
        dual=dual,
        x=x,
        mode=mode,
        residual_history=state.residual_history + [float(np.max(_resid_from(Mtx, x)))],
        consensus_history=state.consensus_history + [float(np.max(consensus_gap(x)))],
    )


def _validate(scheme, problem, config):
    _check_problem(scheme, problem)
    if config.mode not in MODES:
        raise InvalidInputError(f"unknown mode {config.mode!r}")
    if config.max_iters < 0 or config.record_every < 1:
        raise InvalidInputError("max_iters must be >= 0 and record_every >= 1")
    if config.validate:
        rng = ranges_for(scheme, problem)
        sched = config.lambda_schedule
        lam = None if callable(sched) or np.ndim(sched) else sched
        rng.validate(config.gamma, lam)


def solve(scheme, problem, config, z0=None, x_star=None, plan=None):
    """Iterate until the residual (or relative error) tolerance or ``max_iters``.

    Returns a :class:`SolveResult` whose ``consensus_point`` is the row mean
    of the final primal block.
    """
    _validate(scheme, problem, config)
    gamma = config.gamma
    t0 = time.perf_counter()
    trace = []
    ergodic_sum = None
    iters_to_tol = None
    last = None
    gen = iterate(scheme, problem, gamma, config.lam, z0, config.mode, plan=plan)
    for k, x, dual, Mtx in gen:
        res = float(_resid_from(Mtx, x))
        err = None if x_star is None else float(relative_error(x, x_star))
        erg = None
        if config.track_ergodic:
            ergodic_sum = Mtx.copy() if ergodic_sum is None else ergodic_sum + Mtx
            erg = float(np.linalg.norm(ergodic_sum)) / (k + 1)
        hit_res = config.residual_tol > 0 and res <= config.residual_tol
        hit_err = config.error_tol is not None and err is not None and err <= config.error_tol
        if hit_err and iters_to_tol is None:
            iters_to_tol = k
        done = hit_res or hit_err or k >= config.max_iters
        if k % config.record_every == 0 or done:
            trace.append(TraceRow(k, res, float(consensus_gap(x)), err,
                                  time.perf_counter() - t0, erg))
        last = (k, x.copy(), dual.copy(), res, err)
        if done:
            break
    gen.close()
    k, x, dual, res, err = last
    converged = (config.residual_tol > 0 and res <= config.residual_tol) or (
        config.error_tol is not None and err is not None and err <= config.error_tol)
    return SolveResult(
        consensus_point=x.mean(axis=0),
        final_residual=res,
        iterations=k,
        converged=bool(converged),
        trace=trace,
        x=x,
        dual=dual,
        final_error=err,
        iters_to_tol=iters_to_tol,
    )


def solve_batch(scheme, problem, gammas, lambdas, iters, z0=None, x_star=None, error_tol=None,
                mode=FULL, validate=True, record_every=None):
    """Run one independent iteration per ``(gamma, lambda)`` pair, vectorized.

    Returns a dict with per-cell final errors, residuals, the first iteration
    reaching ``error_tol`` (or -1) and, when ``record_every`` is set, the
    per-cell traces of relative error.
    """
    gammas = np.asarray(gammas, dtype=float).ravel()
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if gammas.shape != lambdas.shape:
        raise InvalidInputError("gammas and lambdas must pair up one to one")
    _check_problem(scheme, problem)
    if validate:
        rng = ranges_for(scheme, problem)
        rng.validate(gammas, lambdas)
    batch = (gammas.size,)
    first_hit = np.full(batch, -1)
    history = []
    err = res = None
    gen = iterate(scheme, problem, gammas, lambdas, z0, mode, batch=batch)
    for k, x, dual, Mtx in gen:
        if x_star is not None and (error_tol is not None or k == iters or
                                   (record_every and k % record_every == 0)):
            err = relative_error(x, x_star)
            if error_tol is not None:
                newly = (first_hit < 0) & (err <= error_tol)
                first_hit[newly] = k
            if record_every and k % record_every == 0:
                history.append((k, err.copy()))
        if k >= iters:
            res = _resid_from(Mtx, x)
            x_final = x.copy()
            break
    gen.close()
    return {
        "final_error": err,
        "final_residual": res,
        "first_hit": first_hit,
        "history": history,
        "x": x_final,
    }


# Fixed points ------------------------------------------------------------


def fixed_point_dual(scheme, problem, gamma, x_star, selections):
    """Dual point ``z`` whose sweep returns ``x*`` at every node.

    ``selections[i]`` must be an element of ``A_i x*`` with
    ``sum_i selections[i] + sum_j B_j x* = 0``. The returned ``z`` is the
    minimal-norm solution of the linear system that makes ``(x*, ..., x*)``
    the output of the sweep; it is then a fixed point of the iteration.
    """
    x_star = np.asarray(x_star, dtype=float)
    n = scheme.n
    X = np.tile(x_star, (n, 1))
    sel = np.asarray(selections, dtype=float).reshape(n, -1)
    rhs = scheme.delta[:, None] * X + gamma * sel - scheme.N @ X
    if scheme.p:
        BR = np.stack([b.apply(r) for b, r in zip(problem.B, scheme.R @ X)])
        BP = np.stack([b.apply(r) for b, r in zip(problem.B, scheme.P.T @ X)])
        rhs += gamma * (scheme.P - scheme.Q) @ BR + gamma * scheme.Q @ BP
    z = np.linalg.pinv(scheme.M) @ rhs
    gap = np.linalg.norm(scheme.M @ z - rhs)
    if gap > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise InvalidInputError(
            f"selections do not certify a zero (range gap {gap:.2e}); check sum of selections"
        )
    return z


# Diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class LocalityReport:
    reads: dict
    edge_reads: dict
    violations: tuple

    @property
    def ok(self):
        return not self.violations


def locality_audit(scheme, graph, edges=None):
    """List every read made by node ``i`` that is not a neighbour or an incident edge.

    ``edges`` gives the endpoints of each column of ``M`` as 1-based pairs;
    when omitted they are read off the nonzero pattern of ``M``.
    """
    n = scheme.n
    adjacent = {i: graph.neighbors(i + 1) for i in range(n)}
    violations = []
    reads, edge_reads = {}, {}
    PQ = scheme.P - scheme.Q
    for i in range(n):
        src = set(int(j) for j in np.flatnonzero(scheme.N[i]))
        for j in np.flatnonzero(PQ[i]):
            src |= set(int(l) for l in np.flatnonzero(scheme.R[j]))
        for j in np.flatnonzero(scheme.Q[i]):
            src |= set(int(l) for l in np.flatnonzero(scheme.P[:, j]))
        src.discard(i)
        reads[i + 1] = sorted(s + 1 for s in src)
        for s in sorted(src):
            if (s + 1) not in adjacent[i]:
                violations.append(f"node {i + 1} reads x_{s + 1} but they are not adjacent")
        cols = [int(e) for e in np.flatnonzero(scheme.M[i])]
        edge_reads[i + 1] = [e + 1 for e in cols]
        for e in cols:
            ends = edges[e] if edges is not None else tuple(int(r) + 1 for r in np.flatnonzero(scheme.M[:, e]))
            if (i + 1) not in ends or len(ends) != 2:
                violations.append(f"node {i + 1} reads dual edge {e + 1} which is not incident to it")
            elif not graph.has_edge(*ends):
                violations.append(f"dual edge {e + 1} joins non-adjacent nodes {ends}")
    return LocalityReport(reads, edge_reads, tuple(violations))


@dataclass(frozen=True)
class ErgodicFit:
    slope: Optional[float]
    exact: bool = False
    stalled: bool = False


def ergodic_residual_curve(trace, stall_threshold=-0.1):
    """Least-squares slope of log(ergodic residual) against log(k + 1), over the tail half.

    A run sitting at a fixed point from the start reports ``exact=True``
    instead of a slope; a slope above ``stall_threshold`` sets ``stalled``.
    """
    rows = [r for r in trace if r.ergodic_residual is not None]
    if len(rows) < 100:
        raise InvalidInputError(f"need at least 100 trace rows with ergodic data, got {len(rows)}")
    vals = np.array([r.ergodic_residual for r in rows])
    ks = np.array([r.k for r in rows], dtype=float)
    if np.all(vals == 0.0):
        return ErgodicFit(None, exact=True)
    tail = ks >= ks[-1] / 2.0
    keep = tail & (vals > 0)
    if keep.sum() < 2:
        return ErgodicFit(None, exact=True)
    slope = float(np.polyfit(np.log(ks[keep] + 1.0), np.log(vals[keep]), 1)[0])
    return ErgodicFit(slope, stalled=slope > stall_threshold)


def trace_to_rows(trace):
    """CSV-ready rows: k, residual, consensus_gap, relative_error, elapsed_seconds."""
    out = []
    for r in trace:
        out.append([
            r.k,
            repr(r.residual),
            repr(r.consensus_gap),
            "" if r.relative_error is None else repr(r.relative_error),
            "" if r.elapsed_seconds is None else f"{r.elapsed_seconds:.6f}",
        ])
    return out


TRACE_COLUMNS = ("k", "residual", "consensus_gap", "relative_error", "elapsed_seconds")

__all__ = [
    "FULL", "REDUCED", "SweepPlan", "forward_sweep", "step", "solve", "solve_batch", "iterate",
    "SolverConfig", "SolverState", "SolveResult", "TraceRow", "residual", "consensus_gap",
    "relative_error", "fixed_point_dual", "locality_audit", "ergodic_residual_curve",
    "LocalityReport", "ErgodicFit", "trace_to_rows", "TRACE_COLUMNS", "ranges_for",
]
