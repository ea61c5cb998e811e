"""Deterministic dense optimization kernels.

The design layer needs four things: a linear program solver for
feasibility and robustness-radius questions, Euclidean projection onto a
polyhedron, a solver for the robust design objective (a norm term plus a
convex quadratic over a polyhedron), and symmetric matrix helpers for the
ambiguity-set geometry.  All of it is written against plain numpy on dense
arrays.  Instances in this package are small (tolls live in R^|E| with
|E| <= 512), so the priorities are determinism and bit-reproducible runs,
not sparse scalability: the simplex uses Bland's rule with fixed
tie-breaking, and the active-set method breaks ties by lowest constraint
index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, InfeasibleError

# Statuses shared by every solver in this module.
STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_ITERATION_CAP = "iteration_cap"

_PIVOT_TOL = 1e-10
_RCOST_TOL = 1e-9
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LpProblem:
    """A linear program: maximize ``cost @ x`` s.t. ``rows @ x <= rhs``, ``x >= lower``.

    Attributes:
        cost: objective coefficients, shape (n,).
        rows: inequality matrix, shape (m, n); m may be zero.
        rhs: inequality right-hand sides, shape (m,).
        lower: variable lower bounds, shape (n,); defaults to zero.
    """

    cost: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.cost.shape[0]
        if self.rows.ndim != 2 or self.rows.shape[1] != n:
            raise ValueError(f"rows must be (m, {n}), got {self.rows.shape}")
        if self.rhs.shape != (self.rows.shape[0],):
            raise ValueError("rhs length must match number of rows")
        if self.lower is not None and self.lower.shape != (n,):
            raise ValueError("lower bound length must match cost length")


@dataclass(frozen=True)
class SolveReport:
    """How a solve went: status, effort, and residual diagnostics.

    ``gap`` is the primal-dual gap for linear programs and a projected
    gradient norm (first-order stationarity estimate) for the composite
    solver.
    """

    status: str
    iterations: int
    primal_residual: float
    gap: float


@dataclass(frozen=True)
class SolverOptions:
    """Budgets and tolerances for :func:`solve_composite`.

    The defaults are tuned for design instances up to a few hundred edges;
    the polish stage does the high-accuracy work, so the subgradient
    budget mainly controls how good its warm start is.
    """

    subgradient_iters: int = 300
    polish_iters: int = 60
    tol: float = 1e-11
    window: int = 50

    def __post_init__(self) -> None:
        if self.subgradient_iters < 1 or self.polish_iters < 1 or self.window < 1:
            raise ValueError("iteration budgets must be positive")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")


def _simplex(table: np.ndarray, rhs: np.ndarray, cost: np.ndarray, basis: list[int],
             allowed: np.ndarray, max_iter: int) -> tuple[str, int]:
    """Run simplex pivots in place on a row-reduced tableau.

    ``table`` and ``rhs`` must already be reduced with respect to
    ``basis`` (basic columns are unit vectors).  Minimizes ``cost`` over
    the columns flagged in ``allowed``; Bland's rule (lowest eligible
    index in, lowest basic index out on ratio ties) guarantees
    termination.
    """
    n_rows = table.shape[0]
    for it in range(max_iter):
        multipliers = cost[basis] @ table
        reduced = cost - multipliers
        entering = -1
        for j in np.flatnonzero(allowed):
            if reduced[j] < -_RCOST_TOL:
                entering = int(j)
                break
        if entering < 0:
            return STATUS_OPTIMAL, it
        col = table[:, entering]
        ratio = np.inf
        leaving = -1
        for i in range(n_rows):
            if col[i] > _PIVOT_TOL:
                r = rhs[i] / col[i]
                if r < ratio - 1e-12 or (abs(r - ratio) <= 1e-12 and (leaving < 0 or basis[i] < basis[leaving])):
                    ratio = r
                    leaving = i
        if leaving < 0:
            return STATUS_UNBOUNDED, it
        piv = table[leaving, entering]
        table[leaving] /= piv
        rhs[leaving] /= piv
        for i in range(n_rows):
            if i != leaving and table[i, entering] != 0.0:
                f = table[i, entering]
                table[i] -= f * table[leaving]
                rhs[i] -= f * rhs[leaving]
        # Round-off can push a degenerate basic value a hair negative;
        # snap it back so later ratio tests stay meaningful.
        rhs[(rhs < 0.0) & (rhs > -1e-11)] = 0.0
        basis[leaving] = entering
    return STATUS_ITERATION_CAP, max_iter


def solve_lp(problem: LpProblem, max_iter: int = 10_000) -> tuple[np.ndarray, SolveReport]:
    """Solve a small dense LP with a two-phase tableau simplex.

    Returns the primal solution (the best iterate on an iteration cap,
    the last vertex visited when unbounded) together with a
    :class:`SolveReport`.  Infeasibility and unboundedness are reported
    through the status rather than raised, because callers here use both
    outcomes as answers (phase-one feasibility probes, the robustness
    radius of a single-edge network).
    """
    cost = np.asarray(problem.cost, dtype=float)
    rows = np.asarray(problem.rows, dtype=float)
    rhs_in = np.asarray(problem.rhs, dtype=float)
    n = cost.shape[0]
    m = rows.shape[0]
    lower = np.zeros(n) if problem.lower is None else np.asarray(problem.lower, dtype=float)
    b = rhs_in - rows @ lower

    # Standard form: rows@y + s = b with y, s >= 0, plus one artificial per
    # row so phase one always starts from an identity basis.
    sign = np.where(b < 0.0, -1.0, 1.0)
    table = np.hstack([rows * sign[:, None], np.diag(sign), np.eye(m)])
    rhs = b * sign
    n_cols = n + 2 * m
    basis = [n + m + i for i in range(m)]
    artificial = np.zeros(n_cols, dtype=bool)
    artificial[n + m:] = True

    phase1_cost = np.zeros(n_cols)
    phase1_cost[artificial] = 1.0
    allowed = np.ones(n_cols, dtype=bool)
    status1, it1 = _simplex(table, rhs, phase1_cost, basis, allowed, max_iter)
    infeas = float(sum(rhs[i] for i in range(m) if artificial[basis[i]]))
    if status1 == STATUS_ITERATION_CAP:
        report = SolveReport(STATUS_ITERATION_CAP, it1, infeas, np.inf)
        return lower.copy(), report
    if infeas > 1e-8 * max(1.0, float(np.abs(b).max(initial=0.0))):
        report = SolveReport(STATUS_INFEASIBLE, it1, infeas, np.inf)
        return lower.copy(), report

    # Drive any lingering artificial out of the basis; rows where that is
    # impossible are redundant and harmless to leave as degenerate zeros.
    for i in range(m):
        if artificial[basis[i]]:
            pivots = np.flatnonzero(np.abs(table[i, : n + m]) > _PIVOT_TOL)
            if pivots.size:
                j = int(pivots[0])
                piv = table[i, j]
                table[i] /= piv
                rhs[i] /= piv
                for k in range(m):
                    if k != i and table[k, j] != 0.0:
                        f = table[k, j]
                        table[k] -= f * table[i]
                        rhs[k] -= f * rhs[i]
                basis[i] = j

    phase2_cost = np.zeros(n_cols)
    phase2_cost[:n] = -cost
    allowed = ~artificial
    status2, it2 = _simplex(table, rhs, phase2_cost, basis, allowed, max_iter - it1)

    y = np.zeros(n_cols)
    for i in range(m):
        y[basis[i]] = rhs[i]
    x = y[:n] + lower

    primal_residual = float(max(np.max(rows @ x - rhs_in, initial=0.0), np.max(lower - x, initial=0.0), 0.0))
    if status2 == STATUS_OPTIMAL:
        # Simplex multipliers give the dual; the theoretical gap is zero,
        # so what is reported is pure floating-point disagreement.
        multipliers = phase2_cost[basis] @ table
        duals = np.array([phase2_cost[n + i] - multipliers[n + i] for i in range(m)])
        gap = abs(float(cost @ x) - float(duals @ rhs_in + (cost - rows.T @ duals) @ lower))
    else:
        gap = np.inf
    return x, SolveReport(status2, it1 + it2, primal_residual, gap)


def active_set_qp(hess: np.ndarray, grad: np.ndarray, rows: np.ndarray, rhs: np.ndarray,
                  start: np.ndarray, max_iter: int = 0,
                  tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray, int, float, str]:
    """Minimize ``0.5 x'Hx + g'x`` s.t. ``rows @ x <= rhs`` from a feasible start.

    Primal active-set iteration for positive definite ``hess``: solve the
    equality problem on the working set, step to the nearest blocking
    constraint, and drop the constraint with the most negative multiplier
    when stationary.  Subproblems go through ``lstsq`` so redundant active
    constraints cannot derail the solve.

    Returns ``(x, multipliers, iterations, kkt_residual, status)``.
    """
    x = np.asarray(start, dtype=float).copy()
    n = x.shape[0]
    m = rows.shape[0]
    if max_iter <= 0:
        max_iter = 20 * (n + m) + 20
    scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
    if m and float(np.max(rows @ x - rhs)) > 1e-9 * scale:
        raise ValueError("active-set start point violates the constraints")
    working = [int(i) for i in np.flatnonzero(rows @ x >= rhs - tol * scale)]
    lam = np.zeros(m)

    status = STATUS_ITERATION_CAP
    it = 0
    for it in range(1, max_iter + 1):
        act = rows[working]
        k = len(working)
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = hess
        if k:
            kkt[:n, n:] = act.T
            kkt[n:, :n] = act
        target = np.concatenate([-grad, rhs[working]])
        sol = np.linalg.lstsq(kkt, target, rcond=None)[0]
        direction = sol[:n] - x
        if float(np.linalg.norm(direction)) <= tol * (1.0 + float(np.linalg.norm(x))):
            lam = np.zeros(m)
            lam[working] = sol[n:]
            worst = min(working, key=lambda i: lam[i], default=-1)
            if worst < 0 or lam[worst] >= -tol * (1.0 + float(np.abs(lam).max(initial=0.0))):
                status = STATUS_OPTIMAL
                break
            working.remove(worst)
            continue
        gain = rows @ direction
        step = 1.0
        blocker = -1
        for i in range(m):
            if i not in working and gain[i] > tol:
                t = (rhs[i] - float(rows[i] @ x)) / gain[i]
                if t < step - 1e-14:
                    step = t
                    blocker = i
        x = x + max(step, 0.0) * direction
        if blocker >= 0:
            working.append(blocker)
            working.sort()

    clamped = np.clip(lam, 0.0, None)
    stationarity = float(np.abs(hess @ x + grad + rows.T @ clamped).max(initial=0.0))
    violation = float(np.max(rows @ x - rhs, initial=0.0))
    comple = float(np.abs(clamped * (rows @ x - rhs)).max(initial=0.0))
    residual = max(stationarity, violation, comple, 0.0)
    return x, clamped, it, residual, status


def phase_one_point(rows: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """Find ``x >= 0`` minimizing the worst violation of ``rows @ x <= rhs``.

    Returns the point and its maximum violation (zero within tolerance
    means the polyhedron ``{x >= 0, rows @ x <= rhs}`` is nonempty).
    Implemented as the usual phase-one LP with a single slack variable.
    """
    rows = np.asarray(rows, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = rows.shape[1]
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    widened = np.hstack([rows, -np.ones((rows.shape[0], 1))])
    x, report = solve_lp(LpProblem(cost, widened, rhs))
    if report.status not in (STATUS_OPTIMAL, STATUS_UNBOUNDED):
        # The widened problem is always feasible, so anything else is a
        # solver breakdown worth surfacing.
        raise ConvergenceError("phase-one feasibility probe failed", report.iterations, report.primal_residual)
    point = x[:n]
    violation = float(np.max(rows @ point - rhs, initial=0.0))
    return point, max(violation, 0.0)


def project_polyhedron(point: np.ndarray, rows: np.ndarray, rhs: np.ndarray,
                       tol: float = 1e-9) -> np.ndarray:
    """Project ``point`` onto ``{x >= 0, rows @ x <= rhs}`` in the 2-norm.

    Raises :class:`InfeasibleError` when the set is empty and
    :class:`ConvergenceError` when the active-set solve cannot reach the
    requested KKT residual.
    """
    point = np.asarray(point, dtype=float)
    n = point.shape[0]
    rows = np.asarray(rows, dtype=float).reshape(-1, n)
    rhs = np.asarray(rhs, dtype=float)
    full_rows = np.vstack([-np.eye(n), rows])
    full_rhs = np.concatenate([np.zeros(n), rhs])

    if np.all(point >= 0.0) and np.max(rows @ point - rhs, initial=0.0) <= 0.0:
        return point.copy()
    start, violation = phase_one_point(rows, rhs)
    if violation > 1e-9 * max(1.0, float(np.abs(rhs).max(initial=0.0))):
        raise InfeasibleError("cannot project onto an empty polyhedron")
    x, _, iters, residual, status = active_set_qp(np.eye(n), -point, full_rows, full_rhs, start)
    if status != STATUS_OPTIMAL or residual > tol * max(1.0, float(np.abs(point).max(initial=0.0))):
        raise ConvergenceError("projection did not reach tolerance", iters, residual)
    return x


def _composite_value(eps: float, lin_map: np.ndarray, offset: np.ndarray, quad: np.ndarray,
                     lin: np.ndarray, x: np.ndarray) -> float:
    return float(eps * np.linalg.norm(lin_map @ x + offset) + x @ quad @ x + lin @ x)


def solve_composite(lin_map: np.ndarray, offset: np.ndarray, quad: np.ndarray, lin: np.ndarray,
                    polytope: tuple[np.ndarray, np.ndarray], eps: float,
                    options: SolverOptions | None = None) -> tuple[np.ndarray, SolveReport]:
    """Minimize ``eps*||A x + c|| + x'Qx + g'x`` over ``{x >= 0, rows @ x <= rhs}``.

    ``polytope`` is the pair ``(rows, rhs)``.  The objective is convex
    (``Q`` PSD) but nonsmooth where ``A x + c`` vanishes, so the solve
    runs in two stages: a projected subgradient phase with diminishing
    steps ``a/(b+k)`` locates the right region, then sequential quadratic
    polish steps (with the exact Hessian of the norm term away from its
    kink, ridge-regularized against the singular directions ``Q`` shares
    with ``A``) drive the first-order residual to machine level.  When the
    norm weight is zero and ``Q`` vanishes the problem is an LP and is
    delegated to :func:`solve_lp`.

    Returns the best point found and a :class:`SolveReport` whose ``gap``
    is a projected-gradient stationarity estimate.
    """
    opts = options or SolverOptions()
    rows, rhs = polytope
    rows = np.asarray(rows, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    lin_map = np.asarray(lin_map, dtype=float)
    offset = np.asarray(offset, dtype=float)
    quad = np.asarray(quad, dtype=float)
    lin = np.asarray(lin, dtype=float)
    n = lin.shape[0]
    if eps < 0.0:
        raise ValueError("norm weight eps must be nonnegative")

    quad_scale = float(np.abs(quad).max(initial=0.0))
    if eps == 0.0 and quad_scale == 0.0:
        x, report = solve_lp(LpProblem(-lin, rows, rhs))
        if report.status == STATUS_INFEASIBLE:
            raise InfeasibleError("composite solve over an empty polyhedron")
        return x, report

    start, violation = phase_one_point(rows, rhs)
    if violation > 1e-9 * max(1.0, float(np.abs(rhs).max(initial=0.0))):
        raise InfeasibleError("composite solve over an empty polyhedron")

    full_rows = np.vstack([-np.eye(n), rows])
    full_rhs = np.concatenate([np.zeros(n), rhs])

    def value(x: np.ndarray) -> float:
        return _composite_value(eps, lin_map, offset, quad, lin, x)

    def subgradient(x: np.ndarray) -> np.ndarray:
        resid = lin_map @ x + offset
        nr = float(np.linalg.norm(resid))
        g = 2.0 * quad @ x + lin
        if eps > 0.0 and nr > 1e-12:
            g = g + eps * (lin_map.T @ resid) / nr
        return g

    def project(p: np.ndarray) -> np.ndarray:
        if np.all(p >= 0.0) and np.max(rows @ p - rhs, initial=0.0) <= 0.0:
            return p
        proj, _, _, _, status = active_set_qp(np.eye(n), -p, full_rows, full_rhs, start)
        if status != STATUS_OPTIMAL:
            raise ConvergenceError("projection inside composite solve failed", 0, np.inf)
        return proj

    x = project(np.clip(start, 0.0, None))
    best = x.copy()
    best_val = value(x)
    running_sum = x.copy()
    window_best = best_val
    iterations = 0
    step_scale = (1.0 + float(np.linalg.norm(x))) / (1.0 + float(np.linalg.norm(subgradient(x))))
    for k in range(opts.subgradient_iters):
        iterations += 1
        x = project(x - step_scale / (10.0 + k) * subgradient(x))
        running_sum += x
        val = value(x)
        if val < best_val:
            best_val = val
            best = x.copy()
        if (k + 1) % opts.window == 0:
            if window_best - best_val < opts.tol * (1.0 + abs(best_val)):
                break
            window_best = best_val
    averaged = project(running_sum / (iterations + 1))
    if value(averaged) < best_val:
        best_val = value(averaged)
        best = averaged

    # Polish: minimize a second-order model subject to the original
    # (linear) constraints, with Armijo backtracking on the true value.
    x = best
    for _ in range(opts.polish_iters):
        iterations += 1
        resid = lin_map @ x + offset
        nr = float(np.linalg.norm(resid))
        grad = 2.0 * quad @ x + lin
        hess = 2.0 * quad.copy()
        if eps > 0.0 and nr > 1e-12:
            grad = grad + eps * (lin_map.T @ resid) / nr
            unit = resid / nr
            hess = hess + (eps / nr) * (lin_map.T @ lin_map - np.outer(lin_map.T @ unit, lin_map.T @ unit))
        ridge = 1e-10 * max(1.0, float(np.abs(hess).max(initial=0.0)))
        hess = hess + ridge * np.eye(n)
        d, _, _, _, status = active_set_qp(hess, grad, full_rows, full_rhs - full_rows @ x,
                                           np.zeros(n))
        if status != STATUS_OPTIMAL:
            break
        slope = float(grad @ d)
        if float(np.linalg.norm(d)) <= opts.tol * (1.0 + float(np.linalg.norm(x))) or slope > -opts.tol:
            break
        t = 1.0
        base = value(x)
        while t > 1e-13 and value(x + t * d) > base + 1e-4 * t * slope:
            t *= 0.5
        x = x + t * d
        new_val = value(x)
        if base - new_val < opts.tol * (1.0 + abs(base)):
            break
    if value(x) < best_val:
        best_val = value(x)
        best = x

    stationarity = float(np.linalg.norm(best - project(best - subgradient(best))))
    resid_term = eps * float(np.linalg.norm(lin_map @ best + offset))
    if resid_term <= 1e-9 * (1.0 + abs(best_val)):
        # The norm term sits at its global minimum, so the point is
        # certified by the smooth remainder alone: any competitor pays a
        # nonnegative norm term, losing at most ``resid_term`` here.
        smooth = 2.0 * quad @ best + lin
        smooth_stat = float(np.linalg.norm(best - project(best - smooth)))
        stationarity = min(stationarity, smooth_stat + resid_term)
    violation = float(max(np.max(rows @ best - rhs, initial=0.0), float(np.max(-best, initial=0.0)), 0.0))
    status = STATUS_OPTIMAL if stationarity <= 1e-6 * (1.0 + abs(best_val)) else STATUS_ITERATION_CAP
    return best, SolveReport(status, iterations, violation, stationarity)


def psd_sqrt(matrix: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root of a positive semidefinite matrix.

    Eigenvalues are allowed to dip to ``-tol`` times the spectral radius
    (and are clamped to zero) so that covariance matrices touched by
    round-off still pass; anything more negative is a caller error.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("psd_sqrt needs a square matrix")
    scale = float(np.abs(matrix).max(initial=0.0))
    if float(np.abs(matrix - matrix.T).max(initial=0.0)) > tol * max(scale, 1.0):
        raise ValueError("psd_sqrt needs a symmetric matrix")
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals.size and eigvals[0] < -tol * max(float(eigvals[-1]), 1.0):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {eigvals[0]:.3e})")
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return 0.5 * (root + root.T)


def spectral_norm(matrix: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix via its eigenvalues."""
    matrix = np.asarray(matrix, dtype=float)
    scale = float(np.abs(matrix).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    if float(np.abs(matrix - matrix.T).max(initial=0.0)) > 1e-10 * max(scale, 1.0):
        raise ValueError("spectral_norm here is for symmetric matrices")
    return float(np.abs(np.linalg.eigvalsh(matrix)).max())
