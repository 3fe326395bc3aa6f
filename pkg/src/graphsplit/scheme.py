"""Coefficient schemes: the matrix bundle ``(M, N, P, Q, R, D)`` driving the iteration.

A scheme is certified with :func:`check_assumptions`, which reports every
condition together with the number that decided it. :func:`parameter_ranges`
then turns the scheme and a Lipschitz constant into admissible step sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import graphs as _graphs
from .errors import InvalidConfigError, InvalidInputError
from .numlin import (
    as_matrix,
    kernel_dimension,
    kernel_is_span_ones,
    matrix_from_dict,
    matrix_to_dict,
    min_eigenvalue,
    pseudoinverse,
    spectral_norm,
)

LIPSCHITZ = "lipschitz"
COCOERCIVE = "cocoercive"
REGULARITIES = (LIPSCHITZ, COCOERCIVE)
PQR_VARIANTS = ("identity_shift", "aggregated", "column_sum")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CoefficientScheme:
    """Matrices ``M`` (n x m), ``N`` (n x n), ``P``, ``Q`` (n x p), ``R`` (p x n) and the diagonal ``delta`` of ``D``."""

    M: np.ndarray
    N: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    delta: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        M = as_matrix(self.M, "M")
        n = M.shape[0]
        p = np.asarray(self.P).shape[1] if np.ndim(self.P) == 2 else 0
        N = as_matrix(self.N, "N")
        P = as_matrix(np.reshape(self.P, (n, p)), "P")
        Q = as_matrix(np.reshape(self.Q, (n, p)), "Q")
        R = as_matrix(np.reshape(self.R, (p, n)), "R")
        delta = np.asarray(self.delta, dtype=float).ravel()
        if N.shape != (n, n):
            raise InvalidInputError(f"N must be {n}x{n}, got {N.shape}")
        if delta.shape != (n,):
            raise InvalidInputError(f"delta must have {n} entries, got {delta.size}")
        if not np.all(np.isfinite(delta)) or np.any(delta <= 0):
            raise InvalidInputError("every delta_i must be positive and finite")
        for name, value in (("M", M), ("N", N), ("P", P), ("Q", Q), ("R", R), ("delta", delta)):
            object.__setattr__(self, name, _frozen(value))
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def m(self):
        return self.M.shape[1]

    @property
    def p(self):
        return self.P.shape[1]

    @property
    def D(self):
        return np.diag(self.delta)

    @property
    def q_is_zero(self):
        return not np.any(self.Q)

    @property
    def q_columns_sum_to_one(self):
        return bool(np.allclose(self.Q.sum(axis=0), 1.0, rtol=0, atol=1e-12))

    @property
    def regularity(self):
        """Mode the scheme is meant for: cocoercive when ``Q = 0``, else Lipschitz."""
        return COCOERCIVE if self.q_is_zero else LIPSCHITZ

    @cached_property
    def Mt_pinv(self):
        return _frozen(pseudoinverse(self.M.T))

    @cached_property
    def U(self):
        """Minimal-norm solution of ``U M^T = P^T - R``."""
        return _frozen((self.P.T - self.R) @ self.Mt_pinv)

    @cached_property
    def K(self):
        """Minimal-norm solution of ``K M^T = P^T - Q^T``, or ``None`` when Q^T 1 != 1."""
        if self.p and not self.q_columns_sum_to_one:
            return None
        return _frozen((self.P.T - self.Q.T) @ self.Mt_pinv)

    def key_matrix(self):
        """``2D - N - N^T - M M^T``."""
        return 2.0 * self.D - self.N - self.N.T - self.M @ self.M.T

    def tau(self, regularity=None):
        return compute_tau(self, regularity or self.regularity)

    def replace(self, **changes):
        fields = dict(M=self.M, N=self.N, P=self.P, Q=self.Q, R=self.R, delta=self.delta,
                      provenance=self.provenance)
        fields.update(changes)
        return CoefficientScheme(**fields)

    def to_dict(self):
        return {
            "M": matrix_to_dict(self.M),
            "N": matrix_to_dict(self.N),
            "P": matrix_to_dict(self.P),
            "Q": matrix_to_dict(self.Q),
            "R": matrix_to_dict(self.R),
            "delta": self.delta.tolist(),
            "provenance": self.provenance,
        }


def scheme_from_dict(doc):
    try:
        mats = {k: matrix_from_dict(doc[k]) for k in ("M", "N", "P", "Q", "R")}
        return CoefficientScheme(delta=doc["delta"], provenance=doc.get("provenance", {}), **mats)
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"bad scheme document: missing {exc}") from exc


def load_scheme(path):
    return scheme_from_dict(json.loads(Path(path).read_text()))


def save_scheme(s, path):
    Path(path).write_text(json.dumps(s.to_dict()))


# Graph-based construction -------------------------------------------------


def graph_matrices(g, gw):
    """``M = Inc(G')``, ``N`` with ``N_ij = w_ji`` below the diagonal, and ``delta = deg(G) / 2``."""
    if not g.is_connected():
        raise InvalidInputError("graph G must be connected")
    if gw.parent is not g and gw.parent != g:
        raise InvalidInputError("subgraph weights do not belong to G")
    M = _graphs.incidence(gw)
    N = np.tril(g.weight_matrix(), k=-1)
    delta = 0.5 * np.diag(_graphs.degree_matrix(g))
    return M, N, delta


def build_from_graphs(g, gw, P, Q, R, provenance=None):
    """Scheme whose ``M``, ``N`` and ``D`` come from the graph ``G`` and its subgraph ``G'``."""
    M, N, delta = graph_matrices(g, gw)
    n = g.n
    P, Q, R = (np.asarray(a, dtype=float) for a in (P, Q, R))
    p = P.shape[1] if P.ndim == 2 else 0
    if P.shape != (n, p) or Q.shape != (n, p) or R.shape != (p, n):
        raise InvalidInputError(
            f"P, Q, R shapes {P.shape}, {Q.shape}, {R.shape} do not fit n={n}"
        )
    prov = {"graph": g.to_dict(), "subgraph": [list(e) for e in gw.edges]}
    prov.update(provenance or {})
    return CoefficientScheme(M, N, P, Q, R, delta, prov)


def standard_PQR(variant, n, p, M=None):
    """Return ``(P, Q, R)`` for one of the standard selections.

    ``identity_shift``: ``P`` has an identity in rows 2..p+1, ``Q`` an identity
    in its last ``p`` rows, ``R = [I | 0]``.
    ``aggregated``: row ``p+1`` of ``P`` is all ones, the last row of ``Q`` is
    all ones and the first column of ``R`` is all ones.
    ``column_sum``: built from ``M`` using the column sums of its strictly
    lower part; ``Q = 0`` and ``tau = max 1/s_i^2``.
    """
    n, p = int(n), int(p)
    if variant not in PQR_VARIANTS:
        raise InvalidInputError(f"unknown P/Q/R variant {variant!r}")
    if p == 0:
        return np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((0, n))
    if not 1 <= p <= n - 1:
        raise InvalidInputError(f"need 1 <= p <= n-1, got p={p}, n={n}")
    P, Q, R = np.zeros((n, p)), np.zeros((n, p)), np.zeros((p, n))
    cols = np.arange(p)
    if variant == "identity_shift":
        P[cols + 1, cols] = 1.0
        Q[n - p + cols, cols] = 1.0
        R[cols, cols] = 1.0
    elif variant == "aggregated":
        P[p, :] = 1.0
        Q[n - 1, :] = 1.0
        R[:, 0] = 1.0
    else:
        if M is None:
            raise InvalidInputError("column_sum selection needs M")
        M = as_matrix(M, "M")
        if M.shape[0] != n or M.shape[1] < p:
            raise InvalidInputError(f"M of shape {M.shape} cannot support p={p}")
        s = np.array([M[i + 1 :, i].sum() for i in range(p)])
        if np.any(np.abs(s) < 1e-14):
            bad = [i + 1 for i in np.flatnonzero(np.abs(s) < 1e-14)]
            raise InvalidInputError(f"zero column sum s_i for i in {bad}")
        for i in range(p):
            P[i + 1 :, i] = M[i + 1 :, i] / s[i]
        U = np.zeros((p, M.shape[1]))
        U[cols, cols] = 1.0 / s
        R = P.T - U @ M.T
    return P, Q, R


def column_sums(M, p):
    """The sums ``s_i`` of ``M[j, i]`` over ``j > i`` for the first ``p`` columns."""
    M = as_matrix(M, "M")
    return np.array([M[i + 1 :, i].sum() for i in range(p)])


# Certification -----------------------------------------------------------


@dataclass(frozen=True)
class CheckItem:
    name: str
    passed: bool
    witness: float
    detail: str = ""


ITEM_ORDER = ("kernel", "n_sum", "p_columns", "r_rows", "psd", "q_columns", "explicit", "variant_psd")

ITEM_LABELS = {
    "kernel": "ker M^T = span{1}",
    "n_sum": "sum N_ij = sum delta_i",
    "p_columns": "P^T 1 = 1",
    "r_rows": "R 1 = 1",
    "psd": "2D - N - N^T - MM^T >= 0",
    "q_columns": "Q^T 1 = 1 or Q = 0",
    "explicit": "triangular (explicit) structure",
    "variant_psd": "gamma-dependent PSD condition",
}


@dataclass(frozen=True)
class AssumptionReport:
    items: dict

    @property
    def passed(self):
        """True when every required item passes (the optional gamma-dependent check is excluded)."""
        return all(item.passed for name, item in self.items.items() if name != "variant_psd")

    def failed(self):
        return [name for name in ITEM_ORDER if name in self.items and not self.items[name].passed]

    def __getitem__(self, name):
        return self.items[name]

    def lines(self):
        out = []
        for name in ITEM_ORDER:
            if name not in self.items:
                continue
            item = self.items[name]
            status = "pass" if item.passed else "FAIL"
            extra = f"  {item.detail}" if item.detail else ""
            out.append(f"{status}  {name:<12} {ITEM_LABELS[name]:<34} witness={item.witness:.3e}{extra}")
        return out

    def to_dict(self):
        return {
            "passed": self.passed,
            "items": {
                name: {"passed": it.passed, "witness": it.witness, "detail": it.detail}
                for name, it in self.items.items()
            },
        }


@dataclass(frozen=True)
class ExplicitReport:
    ok: bool
    violations: tuple

    def __bool__(self):
        return self.ok


def check_explicit(s):
    """Test whether one ordered sweep over the nodes computes ``x``."""
    violations = []
    for name, mat, strict in (("N", s.N, True), ("P", s.P, True), ("Q", s.Q, True), ("R", s.R, False)):
        rows, cols = np.nonzero(mat)
        for i, j in zip(rows, cols):
            if (strict and i <= j) or (not strict and i < j):
                where = "on the diagonal" if i == j else "above the diagonal"
                violations.append(f"{name}[{i + 1},{j + 1}] is nonzero {where}")
    for i, j in zip(*np.nonzero(s.P)):
        if i <= j:
            continue
        blocking = [k for k in range(j + 1, i + 1) if s.Q[k, j] != 0]
        for k in blocking:
            violations.append(
                f"Q[{k + 1},{j + 1}] is nonzero although P[{i + 1},{j + 1}] feeds B_{j + 1} after node {k + 1}"
            )
    return ExplicitReport(not violations, tuple(violations))


def check_assumptions(s, tol=1e-9, gamma=None, ell=None, regularity=None):
    """Certify a scheme item by item.

    When ``gamma`` and ``ell`` are given the gamma-dependent PSD variant is
    also evaluated and reported (it is informative, not required).
    """
    items = {}
    kdim = kernel_dimension(s.M.T, rank_tol=max(tol, 1e-12))
    items["kernel"] = CheckItem(
        "kernel", kernel_is_span_ones(s.M.T, tol), float(kdim), f"kernel dimension {kdim}"
    )
    gap = float(s.N.sum() - s.delta.sum())
    items["n_sum"] = CheckItem("n_sum", abs(gap) <= tol * max(1.0, s.delta.sum()), gap,
                               "sum N - sum delta")
    pcol = float(np.abs(s.P.sum(axis=0) - 1.0).max(initial=0.0))
    items["p_columns"] = CheckItem("p_columns", pcol <= tol, pcol, "max |column sum - 1|")
    rrow = float(np.abs(s.R.sum(axis=1) - 1.0).max(initial=0.0))
    items["r_rows"] = CheckItem("r_rows", rrow <= tol, rrow, "max |row sum - 1|")
    lam_min = min_eigenvalue(s.key_matrix())
    items["psd"] = CheckItem("psd", lam_min >= -tol, lam_min, "min eigenvalue")
    qcol = float(np.abs(s.Q.sum(axis=0) - 1.0).max(initial=0.0))
    qzero = float(np.abs(s.Q).max(initial=0.0))
    q_ok = qcol <= tol or qzero == 0.0
    items["q_columns"] = CheckItem("q_columns", q_ok, 0.0 if qzero == 0.0 else qcol,
                                   "Q = 0" if qzero == 0.0 else "max |column sum - 1|")
    ex = check_explicit(s)
    items["explicit"] = CheckItem("explicit", ex.ok, float(len(ex.violations)),
                                  "; ".join(ex.violations[:3]))
    if gamma is not None and ell is not None:
        ok, eig = check_variant_psd(s, gamma, ell, regularity or s.regularity, tol)
        items["variant_psd"] = CheckItem("variant_psd", ok, eig, f"gamma={gamma:g}")
    return AssumptionReport(items)


# Step sizes --------------------------------------------------------------


def _check_regularity(s, regularity):
    if regularity not in REGULARITIES:
        raise InvalidInputError(f"regularity must be one of {REGULARITIES}, got {regularity!r}")
    if regularity == COCOERCIVE and not s.q_is_zero:
        raise InvalidInputError("the cocoercive mode requires Q = 0")
    if regularity == LIPSCHITZ and s.p and not s.q_columns_sum_to_one:
        raise InvalidInputError("the Lipschitz mode requires Q^T 1 = 1")


def compute_tau(s, regularity):
    """``||U||^2``, plus ``||K||^2`` in the Lipschitz mode."""
    _check_regularity(s, regularity)
    tau = spectral_norm(s.U) ** 2
    if regularity == LIPSCHITZ:
        tau += spectral_norm(s.K) ** 2
    return tau


@dataclass(frozen=True)
class ParameterRanges:
    """Admissible ``gamma`` and relaxation ``lambda`` for a scheme."""

    regularity: str
    tau: float
    ell: float

    @property
    def gamma_max(self):
        if self.tau == 0.0 or self.ell == 0.0:
            return math.inf
        c = 1.0 if self.regularity == LIPSCHITZ else 2.0
        return c / (self.ell * self.tau)

    def lambda_max(self, gamma):
        g = np.asarray(gamma, dtype=float) * self.ell * self.tau
        out = 1.0 - g if self.regularity == LIPSCHITZ else (2.0 - g) / 2.0
        return float(out) if np.ndim(out) == 0 else out

    def rho(self, gamma, theta=1.0):
        g = gamma * self.ell * self.tau
        return theta / (1.0 - g) if self.regularity == LIPSCHITZ else 2.0 * theta / (2.0 - g)

    def gamma_from_hat(self, gamma_hat):
        if math.isinf(self.gamma_max):
            raise InvalidConfigError("gamma_max is infinite here; give gamma explicitly")
        return gamma_hat * self.gamma_max

    def validate(self, gamma, lam=None):
        gammas = np.atleast_1d(np.asarray(gamma, dtype=float))
        if np.any(gammas <= 0) or np.any(gammas >= self.gamma_max):
            raise InvalidConfigError(
                f"gamma={gamma} outside the admissible range (0, {self.gamma_max:.6g})"
            )
        if lam is not None:
            lams, lmax = np.broadcast_arrays(np.asarray(lam, dtype=float),
                                             np.asarray(self.lambda_max(gamma)))
            if np.any(lams <= 0) or np.any(lams >= lmax):
                raise InvalidConfigError(
                    f"lambda={lam} outside the admissible range (0, {np.min(lmax):.6g}) for gamma={gamma}"
                )

    def to_dict(self):
        return {"regularity": self.regularity, "tau": self.tau, "ell": self.ell,
                "gamma_max": None if math.isinf(self.gamma_max) else self.gamma_max}


def parameter_ranges(s, ell, regularity=None):
    if ell < 0:
        raise InvalidInputError("ell must be nonnegative")
    regularity = regularity or s.regularity
    return ParameterRanges(regularity, compute_tau(s, regularity), float(ell))


def variant_matrix(s, gamma, ell, regularity):
    base = s.key_matrix()
    PR = s.P - s.R.T
    if regularity == COCOERCIVE:
        return base - 0.5 * gamma * ell * PR @ PR.T
    PQ = s.P - s.Q
    return base - gamma * ell * (PQ @ PQ.T + PR @ PR.T)


def check_variant_psd(s, gamma, ell, regularity=None, tol=1e-9):
    """PSD test of the gamma-dependent matrix; returns ``(ok, min_eigenvalue)``."""
    regularity = regularity or s.regularity
    eig = min_eigenvalue(variant_matrix(s, gamma, ell, regularity))
    return eig >= -tol, eig
