"""Monomial/posynomial algebra and log-space transforms.

Functions of the form ``c * v1**a1 * ... * vn**an`` with ``c > 0`` (monomials)
and finite sums of them (posynomials) are positive on the open positive
orthant and become convex under the change of variables ``w = log v``
followed by a log of the value.  This module provides the expression types,
their evaluation, the log-transformed view with gradients and Hessians, the
tangent under-estimators used to convexify difference constraints, and the
closure operations (sum, positive scaling, product with a monomial).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np


class NonpositiveInput(ValueError):
    """Evaluation point has a coordinate outside the positive orthant."""


class ScaleNonpositive(ValueError):
    """Posynomials are closed under scaling by positive constants only."""


@dataclass(frozen=True)
class VariableSpace:
    """Ordered registry of the positive variables a posynomial may mention.

    All expressions of one problem share a single space so exponent vectors
    are always aligned; mixing spaces raises instead of silently mis-indexing.
    """

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ValueError("variable names must be unique")

    @property
    def size(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: k for k, name in enumerate(self.names)}

    def index(self, name: str) -> int:
        return self._index[name]


def _check_same_space(a: "Posynomial", b: "Posynomial") -> None:
    if a.space is not b.space and a.space.names != b.space.names:
        raise ValueError("expressions live in different variable spaces")


@dataclass(frozen=True)
class Monomial:
    """Single term ``coefficient * prod(v**exponents)``; coefficient > 0."""

    coefficient: float
    exponents: np.ndarray

    def __post_init__(self) -> None:
        if not self.coefficient > 0:
            raise ValueError(f"monomial coefficient must be positive, got {self.coefficient}")
        e = np.asarray(self.exponents, dtype=float)
        object.__setattr__(self, "exponents", e)


@dataclass(frozen=True)
class Posynomial:
    """Sum of monomials over a shared variable space.

    Stored in matrix form: ``coeffs`` is the (K,) vector of positive term
    coefficients and ``expos`` the (K, V) matrix of exponent rows.
    """

    space: VariableSpace
    coeffs: np.ndarray
    expos: np.ndarray

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        e = np.atleast_2d(np.asarray(self.expos, dtype=float))
        if c.size == 0:
            raise ValueError("posynomial needs at least one term")
        if np.any(c <= 0):
            raise ValueError("all posynomial coefficients must be positive")
        if e.shape != (c.size, self.space.size):
            raise ValueError(
                f"exponent matrix shape {e.shape} does not match "
                f"{c.size} terms over {self.space.size} variables"
            )
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "expos", e)

    @classmethod
    def from_terms(
        cls,
        space: VariableSpace,
        terms: Iterable[tuple[float, Mapping[int, float] | Sequence[float] | np.ndarray]],
    ) -> "Posynomial":
        """Build from (coefficient, exponents) pairs; exponents may be a sparse
        ``{variable index: power}`` mapping or a dense vector."""
        coeffs, rows = [], []
        for c, a in terms:
            row = np.zeros(space.size)
            if isinstance(a, Mapping):
                for idx, p in a.items():
                    row[idx] = p
            else:
                row[:] = np.asarray(a, dtype=float)
            coeffs.append(c)
            rows.append(row)
        if not coeffs:
            raise ValueError("posynomial needs at least one term")
        return cls(space, np.array(coeffs), np.array(rows))

    @classmethod
    def monomial(cls, space: VariableSpace, c: float, a: Mapping[int, float] | None = None) -> "Posynomial":
        return cls.from_terms(space, [(c, a or {})])

    @classmethod
    def constant(cls, space: VariableSpace, value: float) -> "Posynomial":
        return cls.monomial(space, value)

    @property
    def n_terms(self) -> int:
        return int(self.coeffs.size)

    @property
    def is_monomial(self) -> bool:
        return self.n_terms == 1

    def terms(self) -> list[Monomial]:
        return [Monomial(float(c), row.copy()) for c, row in zip(self.coeffs, self.expos)]


def eval_monomial(m: Monomial, v: np.ndarray) -> float:
    """Evaluate ``c * prod(v**a)`` at a strictly positive point."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise NonpositiveInput(f"monomial evaluation requires v > 0, got {v}")
    return float(m.coefficient * np.prod(v**m.exponents))


def eval_posynomial(f: Posynomial, v: np.ndarray) -> float:
    """Evaluate a posynomial at a strictly positive point; result is positive."""
    v = np.asarray(v, dtype=float)
    if v.shape != (f.space.size,):
        raise ValueError(f"expected point of length {f.space.size}, got shape {v.shape}")
    if np.any(v <= 0):
        raise NonpositiveInput(f"posynomial evaluation requires v > 0, got {v}")
    return float(f.coeffs @ np.prod(v**f.expos, axis=1))


@dataclass(frozen=True)
class LogPosynomial:
    """Log-log transform ``F(w) = log f(exp w)`` of a posynomial.

    F is a log-sum-exp of affine functions, hence convex; for a single-term
    source it is affine.  Evaluation shifts by the max exponent so that large
    optimization iterates cannot overflow.
    """

    source: Posynomial
    _logc: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_logc", np.log(self.source.coeffs))

    @property
    def is_affine(self) -> bool:
        return self.source.is_monomial

    def _z(self, w: np.ndarray) -> np.ndarray:
        return self._logc + self.source.expos @ np.asarray(w, dtype=float)

    def value(self, w: np.ndarray) -> float:
        z = self._z(w)
        m = z.max()
        return float(m + np.log(np.exp(z - m).sum()))

    def softweights(self, w: np.ndarray) -> np.ndarray:
        z = self._z(w)
        p = np.exp(z - z.max())
        return p / p.sum()

    def grad(self, w: np.ndarray) -> np.ndarray:
        return self.source.expos.T @ self.softweights(w)

    def value_and_grad(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        z = self._z(w)
        m = z.max()
        e = np.exp(z - m)
        s = e.sum()
        return float(m + np.log(s)), self.source.expos.T @ (e / s)

    def hessian(self, w: np.ndarray) -> np.ndarray:
        p = self.softweights(w)
        A = self.source.expos
        g = A.T @ p
        return A.T @ (p[:, None] * A) - np.outer(g, g)


def log_transform(f: Posynomial) -> LogPosynomial:
    """Return the convex log-log view of ``f`` (Lemma: posynomials are
    log-log convex; single monomials become affine)."""
    return LogPosynomial(f)


@dataclass(frozen=True)
class AffineFunction:
    """``T(w) = intercept + slope @ w``; the tangent of a convex function."""

    intercept: float
    slope: np.ndarray

    def value(self, w: np.ndarray) -> float:
        return float(self.intercept + self.slope @ np.asarray(w, dtype=float))


def linearize_concave(q: Posynomial, w0: np.ndarray) -> AffineFunction:
    """First-order tangent of ``F_q`` at ``w0``.

    Since F_q is convex, the tangent is a global under-estimator:
    ``T(w) <= F_q(w)`` for all w, with equality at w0.  Subtracting T instead
    of F_q therefore over-estimates a difference constraint, which is exactly
    the majorization the convex-concave procedure needs.  For a monomial q
    the tangent reproduces F_q everywhere.
    """
    w0 = np.asarray(w0, dtype=float)
    if not np.all(np.isfinite(w0)):
        raise ValueError("linearization point must be finite")
    val, grad = log_transform(q).value_and_grad(w0)
    return AffineFunction(val - float(grad @ w0), grad)


def _merge_terms(coeffs: np.ndarray, expos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # combine exact-duplicate exponent rows, keeping first-seen order
    seen: dict[bytes, int] = {}
    out_c: list[float] = []
    out_e: list[np.ndarray] = []
    for c, row in zip(coeffs, expos):
        key = row.tobytes()
        if key in seen:
            out_c[seen[key]] += c
        else:
            seen[key] = len(out_c)
            out_c.append(float(c))
            out_e.append(row)
    return np.array(out_c), np.array(out_e)


def posy_add(f: Posynomial, g: Posynomial) -> Posynomial:
    """Sum of two posynomials (like terms merged)."""
    _check_same_space(f, g)
    c, e = _merge_terms(np.concatenate([f.coeffs, g.coeffs]), np.vstack([f.expos, g.expos]))
    return Posynomial(f.space, c, e)


def posy_scale(f: Posynomial, k: float) -> Posynomial:
    """Scale by ``k > 0``; nonpositive scales leave the cone."""
    if not k > 0:
        raise ScaleNonpositive(f"scale factor must be positive, got {k}")
    return Posynomial(f.space, k * f.coeffs, f.expos)


def posy_mul_monomial(f: Posynomial, m: Monomial) -> Posynomial:
    """Multiply every term by a monomial (distributes over the sum)."""
    a = np.asarray(m.exponents, dtype=float)
    if a.shape != (f.space.size,):
        raise ValueError("monomial exponent vector does not match variable space")
    c, e = _merge_terms(f.coeffs * m.coefficient, f.expos + a[None, :])
    return Posynomial(f.space, c, e)


@dataclass(frozen=True)
class DCConstraint:
    """Difference constraint ``log P(exp w) - log Q(exp w) <= 0``.

    Both sides are posynomials over the same space, so each log term is
    convex; the difference is a DC function.
    """

    P: Posynomial
    Q: Posynomial
    label: str = ""

    def __post_init__(self) -> None:
        _check_same_space(self.P, self.Q)

    @cached_property
    def log_p(self) -> LogPosynomial:
        return log_transform(self.P)

    @cached_property
    def log_q(self) -> LogPosynomial:
        return log_transform(self.Q)

    def violation(self, w: np.ndarray) -> float:
        """Signed constraint value at w (feasible iff <= 0)."""
        return self.log_p.value(w) - self.log_q.value(w)
