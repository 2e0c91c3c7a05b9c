"""Data types for linear programs over rotated second-order cones."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

CONST = -1  # slot index meaning "constant equal to the slot scale"


@dataclass(frozen=True)
class RotatedCone:
    """Constraint ``2*U*V >= ||x[w]||**2`` with ``U, V >= 0``.

    ``U = u_scale * x[u]`` and ``V = v_scale * x[v]``. A slot index of
    ``CONST`` (-1) turns that slot into the constant ``u_scale``/``v_scale``.
    """

    u: int
    v: int
    w: tuple[int, ...]
    u_scale: float = 1.0
    v_scale: float = 1.0

    @property
    def dim(self) -> int:
        return 2 + len(self.w)


@dataclass
class ConicProgram:
    """minimize ``c @ x`` s.t. ``A x = b``, ``lower <= x <= upper``, cones."""

    num_vars: int
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cones: list[RotatedCone] = field(default_factory=list)

    def __post_init__(self):
        n = self.num_vars
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        if self.A.shape[1] != n and self.A.shape[0] == 0:
            self.A = sp.csr_matrix((0, n))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.validate()

    def validate(self):
        n = self.num_vars
        if self.c.shape != (n,):
            raise ValueError(f"objective has length {self.c.shape}, expected {n}")
        if self.A.shape[1] != n:
            raise ValueError("equality matrix column count != num_vars")
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("equality matrix row count != rhs length")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bounds must have length num_vars")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        for k, cone in enumerate(self.cones):
            idx = [i for i in (cone.u, cone.v) if i != CONST] + list(cone.w)
            if any(i < 0 or i >= n for i in cone.w):
                raise ValueError(f"cone {k}: w index out of range")
            if any(i >= n or i < CONST for i in (cone.u, cone.v)):
                raise ValueError(f"cone {k}: u/v index out of range")
            if len(set(idx)) != len(idx):
                raise ValueError(f"cone {k}: u, v, w indices must be distinct")

    @property
    def num_eq(self) -> int:
        return self.A.shape[0]

    def cone_values(self, x):
        """Return arrays ``(U, V, ||w||^2)`` evaluated at ``x``."""
        x = np.asarray(x, dtype=float)
        U = np.array([c.u_scale * (1.0 if c.u == CONST else x[c.u]) for c in self.cones])
        V = np.array([c.v_scale * (1.0 if c.v == CONST else x[c.v]) for c in self.cones])
        W2 = np.array([float(np.sum(x[list(c.w)] ** 2)) for c in self.cones])
        return U, V, W2


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class ToleranceSet:
    feas: float = 1e-8
    gap: float = 1e-7
    max_iter: int = 100
    equilibrate: bool = True


@dataclass
class Residuals:
    primal_eq: float
    bound: float
    cone: float
    duality_gap: float

    def within(self, tol: ToleranceSet, factor=1.0) -> bool:
        f = tol.feas * factor
        return (
            self.primal_eq <= f
            and self.bound <= f
            and self.cone <= f
            and self.duality_gap <= tol.gap * factor
        )


@dataclass
class SolverSolution:
    status: Status
    primal: np.ndarray
    objective_value: float
    residuals: Residuals
    iterations: int = 0
    dual_eq: np.ndarray | None = None


def primal_residuals(program: ConicProgram, x, gap=0.0) -> Residuals:
    """Unscaled feasibility residuals of ``x`` (infinity norms)."""
    x = np.asarray(x, dtype=float)
    eq = program.A @ x - program.b
    eq_res = float(np.max(np.abs(eq))) if eq.size else 0.0
    lo = program.lower - x
    hi = x - program.upper
    bound_res = float(max(0.0, np.max(lo, initial=0.0), np.max(hi, initial=0.0)))
    cone_res = 0.0
    if program.cones:
        U, V, W2 = program.cone_values(x)
        viol = np.maximum.reduce([W2 - 2.0 * U * V, -U, -V])
        cone_res = float(max(0.0, viol.max()))
    return Residuals(eq_res, bound_res, cone_res, float(gap))


def dump_program(program: ConicProgram, path) -> None:
    """Write ``program`` in a plain-text sparse format.

    Layout::

        # tiltwing conic program v1
        sizes <num_vars> <num_eq> <nnz> <num_cones>
        c <i> <value>                 one line per nonzero objective entry
        A <row> <col> <value>         COO triplets of the equality matrix
        b <row> <value>
        bound <i> <lower> <upper>     only for finite bounds
        cone <u> <u_scale> <v> <v_scale> <w0> <w1> ...

    Indices are 0-based; ``-1`` in a cone slot denotes a constant slot.
    """
    A = program.A.tocoo()
    f = lambda v: repr(float(v))  # noqa: E731 - round-trip exact
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# tiltwing conic program v1\n")
        fh.write(f"sizes {program.num_vars} {program.num_eq} {A.nnz} {len(program.cones)}\n")
        for i in np.flatnonzero(program.c):
            fh.write(f"c {i} {f(program.c[i])}\n")
        for r, col, v in zip(A.row, A.col, A.data):
            fh.write(f"A {r} {col} {f(v)}\n")
        for r, v in enumerate(program.b):
            fh.write(f"b {r} {f(v)}\n")
        for i in range(program.num_vars):
            lo, hi = program.lower[i], program.upper[i]
            if np.isfinite(lo) or np.isfinite(hi):
                fh.write(f"bound {i} {f(lo)} {f(hi)}\n")
        for cone in program.cones:
            w = " ".join(str(i) for i in cone.w)
            fh.write(f"cone {cone.u} {f(cone.u_scale)} {cone.v} {f(cone.v_scale)} {w}\n")


def load_program(path) -> ConicProgram:
    """Read a program written by :func:`dump_program`."""
    n = m = 0
    c_entries, rows, cols, vals, b_entries, bounds, cones = [], [], [], [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "sizes":
                n, m = int(parts[1]), int(parts[2])
            elif tag == "c":
                c_entries.append((int(parts[1]), float(parts[2])))
            elif tag == "A":
                rows.append(int(parts[1]))
                cols.append(int(parts[2]))
                vals.append(float(parts[3]))
            elif tag == "b":
                b_entries.append((int(parts[1]), float(parts[2])))
            elif tag == "bound":
                bounds.append((int(parts[1]), float(parts[2]), float(parts[3])))
            elif tag == "cone":
                w = tuple(int(p) for p in parts[5:])
                cones.append(
                    RotatedCone(int(parts[1]), int(parts[3]), w, float(parts[2]), float(parts[4]))
                )
            else:
                raise ValueError(f"unknown record {tag!r}")
    c = np.zeros(n)
    for i, v in c_entries:
        c[i] = v
    b = np.zeros(m)
    for i, v in b_entries:
        b[i] = v
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for i, lo, hi in bounds:
        lower[i], upper[i] = lo, hi
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    return ConicProgram(n, c, A, b, lower, upper, cones)


class ProgramBuilder:
    """Incremental assembly of a :class:`ConicProgram`.

    Variables are allocated in named blocks; equality rows are collected as
    COO triplets.
    """

    def __init__(self):
        self.n = 0
        self.blocks: dict[str, np.ndarray] = {}
        self._lower: list[np.ndarray] = []
        self._upper: list[np.ndarray] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self.m = 0
        self.cones: list[RotatedCone] = []
        self._c: dict[int, float] = {}

    def add_block(self, name, size, lower=-np.inf, upper=np.inf) -> np.ndarray:
        idx = np.arange(self.n, self.n + size)
        self.blocks[name] = idx
        self._lower.append(np.broadcast_to(np.asarray(lower, dtype=float), (size,)).copy())
        self._upper.append(np.broadcast_to(np.asarray(upper, dtype=float), (size,)).copy())
        self.n += size
        return idx

    def set_bounds(self, idx, lower=None, upper=None):
        lo = np.concatenate(self._lower)
        hi = np.concatenate(self._upper)
        if lower is not None:
            lo[idx] = lower
        if upper is not None:
            hi[idx] = upper
        self._lower, self._upper = [lo], [hi]

    def add_rows(self, terms, rhs):
        """Add ``len(rhs)`` rows ``sum_j coef_j * x[idx_j] = rhs``.

        ``terms`` is a list of ``(idx_array, coef_array)`` pairs, each of
        length equal to the row count (coefficients may be scalars).
        """
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        k = rhs.shape[0]
        rows = np.arange(self.m, self.m + k)
        for idx, coef in terms:
            idx = np.broadcast_to(np.asarray(idx), (k,))
            coef = np.broadcast_to(np.asarray(coef, dtype=float), (k,))
            self._rows.append(rows)
            self._cols.append(idx)
            self._vals.append(coef)
        self._rhs.append(rhs)
        self.m += k

    def add_objective(self, idx, coef):
        for i, v in zip(np.atleast_1d(idx), np.broadcast_to(coef, np.shape(np.atleast_1d(idx)))):
            self._c[int(i)] = self._c.get(int(i), 0.0) + float(v)

    def add_cone(self, u, v, w, u_scale=1.0, v_scale=1.0):
        self.cones.append(RotatedCone(int(u), int(v), tuple(int(i) for i in w), u_scale, v_scale))

    def build(self) -> ConicProgram:
        c = np.zeros(self.n)
        for i, v in self._c.items():
            c[i] = v
        if self._rows:
            A = sp.csr_matrix(
                (np.concatenate(self._vals), (np.concatenate(self._rows), np.concatenate(self._cols))),
                shape=(self.m, self.n),
            )
            b = np.concatenate(self._rhs)
        else:
            A = sp.csr_matrix((0, self.n))
            b = np.zeros(0)
        lower = np.concatenate(self._lower) if self._lower else np.zeros(0)
        upper = np.concatenate(self._upper) if self._upper else np.zeros(0)
        return ConicProgram(self.n, c, A, b, lower, upper, list(self.cones))
