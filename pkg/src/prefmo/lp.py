"""Dense two-phase simplex with Bland's pivoting rule.

Small and fully deterministic: identical inputs give bit-identical outputs.
Meant for desk-scale problems (a few hundred variables at most), i.e. the
occupancy-measure programs, matrix games and elicitation cuts used in this
package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from prefmo.errors import NumericalError, ValidationError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"

FEAS_TOL = 1e-8
_PIVOT_TOL = 1e-11
_COST_TOL = 1e-11


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``min (or max) objective . x`` subject to ``A x (senses) rhs`` and bounds.

    Attributes:
        objective: cost vector, shape ``(n,)``.
        A: constraint matrix, shape ``(m, n)``.
        senses: one of ``"<="``, ``">="``, ``"="`` per row.
        rhs: right-hand sides, shape ``(m,)``.
        bounds: ``(lo, hi)`` per variable, ``None`` meaning unbounded on that
            side. Defaults to ``(0, None)`` for every variable.
        maximize: maximise instead of minimise.
    """

    objective: NDArray
    A: NDArray
    senses: tuple[str, ...]
    rhs: NDArray
    bounds: tuple[tuple[float | None, float | None], ...] = field(default=())
    maximize: bool = False

    def __post_init__(self):
        c = np.array(self.objective, dtype=float).ravel()
        n = len(c)
        A = np.array(self.A, dtype=float).reshape(-1, n) if n else np.zeros((len(self.senses), 0))
        b = np.array(self.rhs, dtype=float).ravel()
        senses = tuple(self.senses)
        if A.shape[0] != len(b) or len(senses) != len(b):
            raise ValidationError("constraint matrix, senses and rhs disagree in row count")
        if any(s not in ("<=", ">=", "=") for s in senses):
            raise ValidationError(f"unknown constraint sense in {senses}")
        for arr in (c, A, b):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("LP coefficients must be finite")
        bounds = tuple(self.bounds) or tuple((0.0, None) for _ in range(n))
        if len(bounds) != n:
            raise ValidationError("need one bound pair per variable")
        for lo, hi in bounds:
            if lo is not None and hi is not None and lo > hi:
                raise ValidationError(f"empty bound interval [{lo}, {hi}]")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "bounds", bounds)

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def violation(self, x: ArrayLike) -> float:
        """Largest constraint or bound violation at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        ax = self.A @ x if self.A.size else np.zeros(len(self.rhs))
        for val, sense, b in zip(ax, self.senses, self.rhs):
            if sense == "<=":
                worst = max(worst, val - b)
            elif sense == ">=":
                worst = max(worst, b - val)
            else:
                worst = max(worst, abs(val - b))
        for xi, (lo, hi) in zip(x, self.bounds):
            if lo is not None:
                worst = max(worst, lo - xi)
            if hi is not None:
                worst = max(worst, xi - hi)
        return float(worst)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    x: NDArray | None = None
    objective: float | None = None
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _standard_form(lp: LinearProgram):
    """Rewrite as ``min c y, A y = b, y >= 0, b >= 0`` with ``x = offset + M y``."""
    n = lp.n_vars
    cols: list[NDArray] = []
    offset = np.zeros(n)
    extra_rows: list[tuple[NDArray, float]] = []
    for j, (lo, hi) in enumerate(lp.bounds):
        e = np.zeros(n)
        e[j] = 1.0
        if lo is not None:
            offset[j] = lo
            cols.append(e)
            if hi is not None:
                extra_rows.append((len(cols) - 1, hi - lo))
        elif hi is not None:
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    M = np.array(cols).T.reshape(n, len(cols))
    A = lp.A @ M
    b = lp.rhs - lp.A @ offset
    senses = list(lp.senses)
    rows = [A[i] for i in range(A.shape[0])]
    for k, ub in extra_rows:
        r = np.zeros(M.shape[1])
        r[k] = 1.0
        rows.append(r)
        b = np.append(b, ub)
        senses.append("<=")
    m, ny = len(rows), M.shape[1]
    n_slack = sum(s != "=" for s in senses)
    A_std = np.zeros((m, ny + n_slack))
    if m:
        A_std[:, :ny] = np.array(rows).reshape(m, ny)
    k = ny
    for i, s in enumerate(senses):
        if s == "<=":
            A_std[i, k] = 1.0
            k += 1
        elif s == ">=":
            A_std[i, k] = -1.0
            k += 1
    neg = b < 0
    A_std[neg] *= -1.0
    b = np.where(neg, -b, b)
    c = lp.objective @ M
    if lp.maximize:
        c = -c
    c_std = np.concatenate([c, np.zeros(n_slack)])
    return A_std, b, c_std, M, offset


def _pivot(T: NDArray, r: int, e: int) -> None:
    T[r] /= T[r, e]
    col = T[:, e].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: NDArray, basis: list[int], allowed: NDArray, max_iter: int) -> tuple[str, int]:
    m = T.shape[0] - 1
    for it in range(max_iter):
        candidates = np.flatnonzero(allowed & (T[m, :-1] < -_COST_TOL))
        if len(candidates) == 0:
            return OPTIMAL, it
        e = int(candidates[0])
        col = T[:m, e]
        rows = np.flatnonzero(col > _PIVOT_TOL)
        if len(rows) == 0:
            return UNBOUNDED, it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, e)
        basis[r] = e
    return FAILED, max_iter


def solve_lp(lp: LinearProgram, max_iter: int = 50_000) -> LpSolution:
    """Solve ``lp``; the returned status is ``optimal``, ``infeasible``, ``unbounded`` or ``failed``.

    An ``optimal`` status is only reported after the primal point has been
    checked against every original constraint within ``FEAS_TOL``.
    """
    A, b, c, M, offset = _standard_form(lp)
    m, n = A.shape
    # phase 1: one artificial per row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    status, it1 = _run(T, basis, allowed, max_iter)
    if status != OPTIMAL:
        return LpSolution(FAILED, iterations=it1, message=f"phase 1 ended with {status}")
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[m, -1] > FEAS_TOL * scale:
        return LpSolution(INFEASIBLE, iterations=it1, message="phase 1 optimum is positive")

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if basis[i] < n:
            keep.append(i)
            continue
        nz = np.flatnonzero(np.abs(T[i, :n]) > 1e-9)
        if len(nz):
            _pivot(T, i, int(nz[0]))
            basis[i] = int(nz[0])
            keep.append(i)
    T = np.vstack([T[keep], T[m : m + 1]])
    basis = [basis[i] for i in keep]
    m = len(keep)
    allowed[n:] = False
    T[:, n:-1] = 0.0

    # phase 2
    T[m, :n] = c
    T[m, n:] = 0.0
    for i, j in enumerate(basis):
        if c[j] != 0.0:
            T[m] -= c[j] * T[i]
    status, it2 = _run(T, basis, allowed, max_iter)
    iterations = it1 + it2
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=iterations, message="objective unbounded")
    if status != OPTIMAL:
        return LpSolution(FAILED, iterations=iterations, message="iteration limit reached")
    y = np.zeros(n)
    y[basis] = T[:m, -1]
    y = np.maximum(y, 0.0)
    x = offset + M @ y[: M.shape[1]]
    viol = lp.violation(x)
    if viol > FEAS_TOL * scale:
        return LpSolution(FAILED, iterations=iterations, message=f"solution violates constraints by {viol:.3e}")
    return LpSolution(OPTIMAL, x, float(lp.objective @ x), iterations)


def solve_or_raise(lp: LinearProgram) -> LpSolution:
    """Like :func:`solve_lp` but raises :class:`NumericalError` unless optimal."""
    sol = solve_lp(lp)
    if not sol.ok:
        raise NumericalError(f"LP {sol.status}: {sol.message}")
    return sol


def build_lp(
    objective: Sequence[float],
    rows: Sequence[tuple[Sequence[float], str, float]],
    bounds=(),
    maximize: bool = False,
) -> LinearProgram:
    """Convenience constructor from ``(coefficients, sense, rhs)`` rows."""
    n = len(objective)
    A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n)
    return LinearProgram(
        np.asarray(objective, float), A, tuple(r[1] for r in rows), np.array([r[2] for r in rows], float), tuple(bounds), maximize
    )
