"""Resolvents and forward operators on R^d.

Every evaluation acts on the last axis of its input, so a stack of points
``y`` with shape ``(..., d)`` is processed in one call. Step sizes may be
scalars or arrays broadcasting against ``y.shape[:-1]``.

Normal-cone resolvents are projections and therefore ignore the step size.
That shortcut is only valid for cones; other kinds honour ``sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .numlin import as_matrix, spectral_norm


def project_ball(y, c, r):
    """Euclidean projection of ``y`` onto the closed ball ``B(c, r)``."""
    if not r > 0:
        raise InvalidInputError(f"ball radius must be positive, got {r}")
    y = np.asarray(y, dtype=float)
    c = np.asarray(c, dtype=float)
    diff = y - c
    dist = np.linalg.norm(diff, axis=-1, keepdims=True)
    scale = np.minimum(1.0, r / np.maximum(dist, np.finfo(float).tiny))
    return c + diff * scale


def project_simplex(y):
    """Euclidean projection onto the unit simplex, by sorting and thresholding."""
    y = np.asarray(y, dtype=float)
    d = y.shape[-1]
    if d < 1:
        raise InvalidInputError("simplex projection needs dimension >= 1")
    u = -np.sort(-y, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, d + 1)
    active = u * idx > css
    rho = d - 1 - np.argmax(active[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(y - theta, 0.0)


def _check_dim(y, dim):
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (dim,):
        raise InvalidInputError(f"expected points of dimension {dim}, got shape {y.shape}")
    return y


# Resolvents ---------------------------------------------------------------


class ResolventOperator:
    """A maximally monotone operator accessed through its resolvent."""

    kind = "abstract"
    dim: int

    def resolve(self, sigma, y):  # pragma: no cover - interface
        raise NotImplementedError

    def to_dict(self):  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroResolvent(ResolventOperator):
    dim: int
    kind = "zero"

    def resolve(self, sigma, y):
        return np.array(_check_dim(y, self.dim), copy=True)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class BallNormalCone(ResolventOperator):
    """Normal cone of the ball ``{x : ||x - center|| <= radius}``."""

    center: np.ndarray
    radius: float
    kind = "normal_cone_ball"

    def __post_init__(self):
        c = np.array(self.center, dtype=float).ravel()
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("ball center must be finite")
        if not self.radius > 0:
            raise InvalidInputError(f"ball radius must be positive, got {self.radius}")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def contains(self, x, tol=0.0):
        return np.linalg.norm(np.asarray(x) - self.center, axis=-1) <= self.radius + tol

    def resolve(self, sigma, y):
        return project_ball(_check_dim(y, self.dim), self.center, self.radius)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True)
class SimplexNormalCone(ResolventOperator):
    """Normal cone of the unit simplex in R^dim."""

    dim: int
    kind = "normal_cone_simplex"

    def resolve(self, sigma, y):
        return project_simplex(_check_dim(y, self.dim))

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True)
class ProductResolvent(ResolventOperator):
    """Block-diagonal operator acting on consecutive slices of the vector."""

    parts: tuple
    kind = "product"

    @property
    def dim(self):
        return sum(part.dim for part in self.parts)

    def resolve(self, sigma, y):
        y = _check_dim(y, self.dim)
        out = np.empty_like(y)
        start = 0
        for part in self.parts:
            stop = start + part.dim
            out[..., start:stop] = part.resolve(sigma, y[..., start:stop])
            start = stop
        return out

    def to_dict(self):
        return {"kind": self.kind, "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class LinearMonotone(ResolventOperator):
    """Linear operator ``x -> L x`` with ``L + L^T`` positive semidefinite."""

    matrix: np.ndarray
    kind = "linear_monotone"

    def __post_init__(self):
        L = as_matrix(self.matrix, "linear operator")
        if L.shape[0] != L.shape[1]:
            raise InvalidInputError("linear operator must be square")
        L.setflags(write=False)
        object.__setattr__(self, "matrix", L)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def resolve(self, sigma, y):
        y = _check_dim(y, self.dim)
        eye = np.eye(self.dim)
        sigma = np.asarray(sigma, dtype=float)
        try:
            if sigma.ndim == 0:
                return np.linalg.solve(eye + sigma * self.matrix, y.reshape(-1, self.dim).T).T.reshape(y.shape)
            mats = eye + sigma[..., None, None] * self.matrix
            return np.linalg.solve(mats, y[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:  # monotone L makes this impossible
            raise AssertionError("singular resolvent system for a monotone operator") from exc

    def to_dict(self):
        return {"kind": self.kind, "matrix": self.matrix.tolist()}


# Forward operators --------------------------------------------------------


class ForwardOperator:
    """Single-valued Lipschitz operator, optionally cocoercive."""

    kind = "abstract"
    dim: int
    lipschitz: float
    cocoercive: bool

    def __call__(self, y):
        return self.apply(y)

    def apply(self, y):  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroForward(ForwardOperator):
    dim: int
    kind = "zero"
    lipschitz = 0.0
    cocoercive = True

    def apply(self, y):
        return np.zeros_like(_check_dim(y, self.dim))

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class QuadraticGradient(ForwardOperator):
    """Gradient ``y -> Q y`` of ``x^T Q x / 2`` for symmetric PSD ``Q``."""

    matrix: np.ndarray
    lipschitz: float = field(default=None)
    kind = "quadratic_gradient"
    cocoercive = True

    def __post_init__(self):
        Q = as_matrix(self.matrix, "quadratic matrix")
        if Q.shape[0] != Q.shape[1]:
            raise InvalidInputError("quadratic matrix must be square")
        Q.setflags(write=False)
        object.__setattr__(self, "matrix", Q)
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", spectral_norm(Q))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, y):
        return _check_dim(y, self.dim) @ self.matrix.T

    def to_dict(self):
        return {"kind": self.kind, "matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class Saddle(ForwardOperator):
    """Skew map ``(u, v) -> (Theta^T v, -Theta u)`` with ``Theta`` of shape (d2, d1)."""

    theta: np.ndarray
    lipschitz: float = field(default=None)
    kind = "saddle"
    cocoercive = False

    def __post_init__(self):
        T = as_matrix(self.theta, "saddle matrix")
        T.setflags(write=False)
        object.__setattr__(self, "theta", T)
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", spectral_norm(T))

    @property
    def d1(self):
        return self.theta.shape[1]

    @property
    def dim(self):
        return self.theta.shape[0] + self.theta.shape[1]

    def apply(self, y):
        y = _check_dim(y, self.dim)
        u, v = y[..., : self.d1], y[..., self.d1 :]
        return np.concatenate([v @ self.theta, -(u @ self.theta.T)], axis=-1)

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta.tolist()}


def apply_forward(B, y):
    """Evaluate a forward operator at ``y``."""
    return B.apply(y)


def resolve(A, sigma, y):
    """Evaluate the resolvent of ``sigma * A`` at ``y``."""
    if not np.all(np.asarray(sigma) > 0):
        raise InvalidInputError("resolvent step must be positive")
    return A.resolve(sigma, y)


# Problems ----------------------------------------------------------------


@dataclass(frozen=True)
class ProblemInstance:
    """Find ``x`` with ``0 in sum_i A_i x + sum_j B_j x``."""

    A: tuple
    B: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(self.A))
        object.__setattr__(self, "B", tuple(self.B))
        if not self.A:
            raise InvalidInputError("a problem needs at least one set-valued operator")
        dims = {op.dim for op in self.A} | {op.dim for op in self.B}
        if len(dims) != 1:
            raise InvalidInputError(f"operators disagree on the dimension: {sorted(dims)}")

    @property
    def n(self):
        return len(self.A)

    @property
    def p(self):
        return len(self.B)

    @property
    def dim(self):
        return self.A[0].dim

    @property
    def ell(self):
        return max((float(b.lipschitz) for b in self.B), default=0.0)

    @property
    def cocoercive(self):
        return all(b.cocoercive for b in self.B)

    def forward_sum(self, x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for b in self.B:
            out += b.apply(x)
        return out

    def to_dict(self):
        return {
            "A": [a.to_dict() for a in self.A],
            "B": [b.to_dict() for b in self.B],
            "meta": self.meta,
        }


def resolvent_from_dict(doc):
    kind = doc.get("kind")
    if kind == "zero":
        return ZeroResolvent(int(doc["dim"]))
    if kind == "normal_cone_ball":
        return BallNormalCone(doc["center"], doc["radius"])
    if kind == "normal_cone_simplex":
        return SimplexNormalCone(int(doc["dim"]))
    if kind == "product":
        return ProductResolvent(tuple(resolvent_from_dict(p) for p in doc["parts"]))
    if kind == "linear_monotone":
        return LinearMonotone(doc["matrix"])
    raise InvalidInputError(f"unknown resolvent kind {kind!r}")


def forward_from_dict(doc):
    kind = doc.get("kind")
    if kind == "zero":
        return ZeroForward(int(doc["dim"]))
    if kind == "quadratic_gradient":
        return QuadraticGradient(doc["matrix"])
    if kind == "saddle":
        return Saddle(doc["theta"])
    raise InvalidInputError(f"unknown forward operator kind {kind!r}")


def problem_from_dict(doc):
    try:
        return ProblemInstance(
            [resolvent_from_dict(a) for a in doc["A"]],
            [forward_from_dict(b) for b in doc["B"]],
            dict(doc.get("meta", {})),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"bad problem document: {exc}") from exc
