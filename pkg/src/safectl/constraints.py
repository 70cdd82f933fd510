"""State/input constraints ``c_j(x, u) <= 0`` in linear, bound and quadratic form.

Sign convention everywhere: a value ``<= 0`` is feasible. A spec's
``margin`` tightens it: the reported value is ``c + margin``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, NegativeMargin

VIOLATION_TOL = 1e-8


class Form(str, enum.Enum):
    LINEAR = "linear"
    BOUND = "bound"
    QUADRATIC = "quadratic"


class Target(str, enum.Enum):
    STATE = "state"
    INPUT = "input"
    BOTH = "both"


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """One constraint block.

    ``Linear``: ``A v <= b``. ``Bound``: ``lower <= v <= upper`` (infinite
    sides are dropped). ``Quadratic``: ``v^T P v <= r``. Here ``v`` is the
    target vector (state, input or ``[x; u]``) restricted to ``selector``.
    """

    form: Form
    target: Target
    selector: tuple
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    P: np.ndarray | None = None
    r: float | None = None
    margin: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "form", Form(self.form))
        object.__setattr__(self, "target", Target(self.target))
        sel = tuple(int(i) for i in self.selector)
        object.__setattr__(self, "selector", sel)
        k = len(sel)
        if self.form is Form.LINEAR:
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            b = np.asarray(self.b, dtype=float).reshape(-1)
            if A.shape != (b.size, k):
                raise DimensionMismatch(f"linear constraint A must be {b.size}x{k}")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
        elif self.form is Form.BOUND:
            lo = np.broadcast_to(np.asarray(-np.inf if self.lower is None else self.lower, dtype=float), (k,)).copy()
            hi = np.broadcast_to(np.asarray(np.inf if self.upper is None else self.upper, dtype=float), (k,)).copy()
            if np.any(lo > hi):
                raise ValueError("bound constraint needs lower <= upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        else:
            P = np.atleast_2d(np.asarray(self.P, dtype=float))
            if P.shape != (k, k):
                raise DimensionMismatch(f"quadratic constraint P must be {k}x{k}")
            if np.min(np.linalg.eigvalsh(0.5 * (P + P.T))) < -1e-12:
                raise ValueError("quadratic constraint P must be positive semidefinite")
            object.__setattr__(self, "P", P)
            object.__setattr__(self, "r", float(self.r))

    def __eq__(self, other):
        if not isinstance(other, ConstraintSpec):
            return NotImplemented
        arrays = ("A", "b", "lower", "upper", "P")
        same_arrays = all(
            (getattr(self, a) is None and getattr(other, a) is None)
            or (getattr(self, a) is not None and getattr(other, a) is not None
                and np.array_equal(getattr(self, a), getattr(other, a)))
            for a in arrays
        )
        return (
            same_arrays
            and (self.form, self.target, self.selector, self.r, self.margin, self.name)
            == (other.form, other.target, other.selector, other.r, other.margin, other.name)
        )

    __hash__ = None

    @property
    def n_rows(self) -> int:
        if self.form is Form.LINEAR:
            return self.b.size
        if self.form is Form.BOUND:
            return int(np.isfinite(self.upper).sum() + np.isfinite(self.lower).sum())
        return 1

    def _vector(self, x, u):
        if self.target is Target.STATE:
            v = x
        elif self.target is Target.INPUT:
            v = u
        else:
            v = np.concatenate([x, u])
        return v[list(self.selector)]

    def evaluate(self, x, u) -> np.ndarray:
        v = self._vector(x, u)
        m = self.margin
        if self.form is Form.LINEAR:
            return self.A @ v - self.b + m
        if self.form is Form.BOUND:
            up = np.isfinite(self.upper)
            lo = np.isfinite(self.lower)
            return np.concatenate([v[up] - self.upper[up] + m, self.lower[lo] - v[lo] + m])
        return np.array([v @ self.P @ v - self.r + m])

    def _embed(self, rows, n_x, n_u):
        """Map rows over the selected target vector onto ``[x; u]``."""
        out = np.zeros((rows.shape[0], n_x + n_u))
        offset = n_x if self.target is Target.INPUT else 0
        for col, idx in enumerate(self.selector):
            out[:, offset + idx] = rows[:, col]
        return out

    def linear_rows(self, n_x, n_u, about=None):
        """Rows ``G [x; u] <= h`` (margin included)."""
        k = len(self.selector)
        m = self.margin
        if self.form is Form.LINEAR:
            return self._embed(self.A, n_x, n_u), self.b - m
        if self.form is Form.BOUND:
            up = np.isfinite(self.upper)
            lo = np.isfinite(self.lower)
            eye = np.eye(k)
            G = np.vstack([eye[up], -eye[lo]])
            h = np.concatenate([self.upper[up] - m, -self.lower[lo] - m])
            return self._embed(G, n_x, n_u), h
        x_bar, u_bar = about
        v_bar = self._vector(np.asarray(x_bar, dtype=float), np.asarray(u_bar, dtype=float))
        Ps = self.P + self.P.T
        grad = Ps @ v_bar
        c_bar = v_bar @ self.P @ v_bar - self.r + m
        return self._embed(grad.reshape(1, -1), n_x, n_u), np.array([grad @ v_bar - c_bar])


@dataclass(frozen=True)
class ConstraintSet:
    specs: tuple = field(default_factory=tuple)
    n_x: int = 0
    n_u: int = 0

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        for s in self.specs:
            limit = {Target.STATE: self.n_x, Target.INPUT: self.n_u, Target.BOTH: self.n_x + self.n_u}[s.target]
            if any(i < 0 or i >= limit for i in s.selector):
                raise DimensionMismatch(f"selector {s.selector} out of range for {s.target.value} (size {limit})")

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    @property
    def n_rows(self) -> int:
        return sum(s.n_rows for s in self.specs)

    def evaluate(self, x, u) -> np.ndarray:
        return evaluate_constraints(self, x, u)

    def state_only(self) -> "ConstraintSet":
        return ConstraintSet(tuple(s for s in self.specs if s.target is Target.STATE), self.n_x, self.n_u)


def evaluate_constraints(cset: ConstraintSet, x, u) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != cset.n_x or u.size != cset.n_u:
        raise DimensionMismatch(f"constraint set expects x[{cset.n_x}], u[{cset.n_u}]")
    if not cset.specs:
        return np.zeros(0)
    return np.concatenate([s.evaluate(x, u) for s in cset.specs])


def is_violating(values, tol: float = VIOLATION_TOL) -> bool:
    values = np.asarray(values)
    return bool(values.size and np.max(values) > tol)


def as_linear_rows(cset: ConstraintSet, about=None):
    """Stack all constraints as ``G [x; u] <= h`` for QP embedding.

    Linear and bound forms are exact; quadratic forms are replaced by their
    tangent at ``about = (x_bar, u_bar)``.
    """
    if about is None:
        about = (np.zeros(cset.n_x), np.zeros(cset.n_u))
    if not cset.specs:
        return np.zeros((0, cset.n_x + cset.n_u)), np.zeros(0)
    rows = [s.linear_rows(cset.n_x, cset.n_u, about) for s in cset.specs]
    return np.vstack([G for G, _ in rows]), np.concatenate([h for _, h in rows])


def tighten(cset: ConstraintSet, per_step_margins) -> list:
    """Step-indexed copies of ``cset`` with extra margins added.

    ``per_step_margins`` has shape ``(T,)`` (same margin for every spec) or
    ``(T, len(cset))``.
    """
    margins = np.asarray(per_step_margins, dtype=float)
    if margins.ndim == 1:
        margins = np.repeat(margins[:, None], len(cset), axis=1)
    if margins.ndim != 2 or margins.shape[1] != len(cset):
        raise DimensionMismatch("margins must be (T,) or (T, n_specs)")
    if np.any(margins < 0) or not np.all(np.isfinite(margins)):
        raise NegativeMargin("tightening margins must be finite and non-negative")
    return [
        ConstraintSet(tuple(replace(s, margin=s.margin + float(mi)) for s, mi in zip(cset.specs, row)), cset.n_x, cset.n_u)
        for row in margins
    ]


def bound(target, selector, lower=None, upper=None, name="") -> ConstraintSpec:
    return ConstraintSpec(Form.BOUND, Target(target), tuple(selector), lower=lower, upper=upper, name=name)


def linear(target, selector, A, b, name="") -> ConstraintSpec:
    return ConstraintSpec(Form.LINEAR, Target(target), tuple(selector), A=A, b=b, name=name)


def quadratic(target, selector, P, r, name="") -> ConstraintSpec:
    return ConstraintSpec(Form.QUADRATIC, Target(target), tuple(selector), P=P, r=r, name=name)
