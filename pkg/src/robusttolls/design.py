"""Robust toll design over the full-utilization polytope.

A toll vector is admissible when, at the plug-in disturbance moments,
the tolled equilibrium still sends positive flow down every edge with a
safety margin covering the support radius; those tolls form a polyhedron
in the flow-response geometry (:func:`toll_polytope`).  The largest
ambiguity radius for which a margin-``eps`` version of that set stays
nonempty is the robustness ceiling (:func:`epsilon_max`), a plain linear
program.  The design program itself (:func:`solve_dro_tolls`) minimizes
the worst-case expected equilibrium latency over ambiguity radius
``eps``: the radius enters through the objective's mean-shift term while
the constraint set stays the nominal (radius-zero) polytope, so designs
anticipating different radii remain comparable on a common footing and
the ceiling acts as a validity bound on ``eps`` rather than shrinking
the feasible set.  Because the objective only sees tolls through the
flow response, optima come in affine families; results are canonicalized
to the minimum-norm representative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import KktBlocks, latency_decomposition
from .exceptions import ConvergenceError, InfeasibleError
from .optim import (STATUS_INFEASIBLE, STATUS_OPTIMAL, STATUS_UNBOUNDED, LpProblem,
                    SolverOptions, active_set_qp, phase_one_point, solve_composite, solve_lp)
from .uncertainty import DisturbanceModel

_CEILING_SLACK = 1e-9


@dataclass(frozen=True)
class TollPolytope:
    """The admissible toll set ``{tau >= 0 : gamma @ tau <= rhs}``.

    ``strict`` marks the open variant used when downstream algebra needs
    every edge strictly utilized (membership then requires slack beyond
    a fixed 1e-12 margin).
    """

    gamma: np.ndarray
    rhs: np.ndarray
    strict: bool = False

    def contains(self, tau: np.ndarray, tol: float = 1e-9) -> bool:
        tau = np.asarray(tau, dtype=float)
        if tau.shape != (self.gamma.shape[1],):
            raise ValueError(f"tau must have length {self.gamma.shape[1]}, got {tau.shape}")
        if float(tau.min(initial=0.0)) < -tol:
            return False
        slack = self.rhs - self.gamma @ tau
        if self.strict:
            return bool(float(slack.min(initial=np.inf)) > 1e-12)
        return bool(float(slack.min(initial=np.inf)) >= -tol)


@dataclass(frozen=True)
class DesignResult:
    """Outcome of a robust toll design solve.

    ``tau_star`` is the minimum-norm optimal toll; ``objective`` is the
    design objective value (latency terms that depend on the toll);
    ``worst_case_latency`` adds the toll-independent constants, giving
    the worst-case expected equilibrium latency over the radius-``eps``
    ambiguity ball.  ``iterations`` and ``residual`` are solver
    diagnostics (``residual`` is a first-order stationarity estimate).
    """

    tau_star: np.ndarray
    objective: float
    worst_case_latency: float
    eps: float
    iterations: int
    residual: float


def toll_polytope(blocks: KktBlocks, model: DisturbanceModel, eps: float,
                  strict: bool = False) -> TollPolytope:
    """Admissible tolls with utilization margin covering radius ``eps``.

    The right-hand side is ``-||gamma|| (eps + support_radius) - gamma @
    mean + c``: a toll passes when the closed-form flow at the plug-in
    mean keeps a margin of ``||gamma||`` times the total disturbance
    budget on every edge.  Monotone in ``eps``: larger radii shrink the
    set.
    """
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if model.mean.shape[0] != blocks.gamma.shape[0]:
        raise ValueError("model dimension does not match the network")
    margin = blocks.gamma_norm * (eps + model.support_radius)
    rhs = -margin * np.ones(blocks.gamma.shape[0]) - blocks.gamma @ model.mean + blocks.c
    return TollPolytope(gamma=blocks.gamma, rhs=rhs, strict=strict)


def polytope_nonempty(poly: TollPolytope, tol: float = 1e-9) -> bool:
    """Feasibility probe: does any nonnegative toll satisfy the polytope?"""
    _, violation = phase_one_point(poly.gamma, poly.rhs)
    return violation <= tol * max(1.0, float(np.abs(poly.rhs).max(initial=0.0)))


def _gamma_is_zero(blocks: KktBlocks) -> bool:
    # With as many independent balance rows as edges the flow response is
    # structurally zero; everything left in gamma is round-off.
    floor = float((1.0 / blocks.lat.beta).max())
    return blocks.gamma_norm <= 1e-12 * max(1.0, floor)


def epsilon_max(blocks: KktBlocks, model: DisturbanceModel) -> tuple[float, np.ndarray | None]:
    """Largest ambiguity radius with a nonempty admissible toll set.

    Solved as the linear program ``max eps`` over ``(tau, eps) >= 0``
    with ``gamma @ tau + ||gamma|| eps <= rhs(0)``.  Returns the radius
    and a certificate toll attaining it.  When the flow response is zero
    (single-route networks) every radius is admissible and the result is
    ``(inf, None)``.  An infeasible program means no toll keeps the
    network fully utilized even nominally; that is a modelling problem,
    reported as :class:`InfeasibleError`.
    """
    if model.mean.shape[0] != blocks.gamma.shape[0]:
        raise ValueError("model dimension does not match the network")
    if _gamma_is_zero(blocks):
        return float("inf"), None

    m = blocks.gamma.shape[0]
    base = toll_polytope(blocks, model, 0.0)
    cost = np.zeros(m + 1)
    cost[m] = 1.0
    rows = np.hstack([blocks.gamma, blocks.gamma_norm * np.ones((m, 1))])
    solution, report = solve_lp(LpProblem(cost, rows, base.rhs))
    if report.status == STATUS_INFEASIBLE:
        raise InfeasibleError("no nonnegative toll keeps every edge utilized at the nominal "
                              "moments; the support radius is too large for this network")
    if report.status == STATUS_UNBOUNDED:
        # Impossible for a nonzero PSD flow response; reaching this means
        # the arithmetic broke down, not that the radius is infinite.
        raise ConvergenceError("robustness ceiling program came back unbounded",
                               report.iterations, report.primal_residual)
    if report.status != STATUS_OPTIMAL:
        raise ConvergenceError("robustness ceiling program hit its iteration cap",
                               report.iterations, report.primal_residual)
    return float(solution[m]), solution[:m]


def dro_objective(blocks: KktBlocks, model: DisturbanceModel, eps: float, tau: np.ndarray) -> float:
    """Design objective: worst-case expected latency minus its constants.

    ``eps ||gamma tau + c|| + tau gamma tau + mean gamma tau``.  The
    dropped constants (``c @ mean`` and the demand term) do not depend on
    the toll, so minimizers agree with the full worst-case latency.
    """
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (blocks.gamma.shape[0],):
        raise ValueError(f"tau must have length {blocks.gamma.shape[0]}, got {tau.shape}")
    if model.mean.shape[0] != blocks.gamma.shape[0]:
        raise ValueError("model dimension does not match the network")
    q = blocks.gamma @ tau + blocks.c
    return float(eps * np.linalg.norm(q) + tau @ blocks.gamma @ tau + model.mean @ blocks.gamma @ tau)


def _min_norm_equivalent(blocks: KktBlocks, tau: np.ndarray) -> np.ndarray:
    """Smallest-norm toll with the same flow response as ``tau``.

    The flow response is blind to anything in the row space of the
    incidence matrix, so optima form the family ``tau + R' v`` clipped to
    nonnegativity; minimizing the norm over that family is a small
    strictly convex QP in ``v``.
    """
    matrix = blocks.inc.matrix
    hess = matrix @ matrix.T
    grad = matrix @ tau
    v, _, iters, residual, status = active_set_qp(hess, grad, -matrix.T, tau,
                                                  np.zeros(matrix.shape[0]))
    if status != STATUS_OPTIMAL:
        raise ConvergenceError("canonicalization QP did not converge", iters, residual)
    out = tau + matrix.T @ v
    out[out < 0.0] = 0.0
    return out


def solve_dro_tolls(blocks: KktBlocks, model: DisturbanceModel, eps: float,
                    options: SolverOptions | None = None) -> DesignResult:
    """Design the toll minimizing worst-case expected latency at radius ``eps``.

    Validates ``eps`` against the robustness ceiling first (an
    anticipated radius beyond it has no fully-utilized interpretation and
    raises :class:`InfeasibleError` carrying the ceiling).  The search
    runs over the nominal admissible polytope; the radius scales the
    worst-case mean-shift term of the objective.  The returned toll is
    the minimum-norm member of the optimal family.
    """
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    ceiling, _ = epsilon_max(blocks, model)
    if eps > ceiling + _CEILING_SLACK:
        raise InfeasibleError(
            f"anticipated radius {eps:g} exceeds the robustness ceiling {ceiling:g}",
            epsilon_max=ceiling)

    poly = toll_polytope(blocks, model, 0.0)
    lin = blocks.gamma @ model.mean
    raw, report = solve_composite(blocks.gamma, blocks.c, blocks.gamma, lin,
                                  (poly.gamma, poly.rhs), eps, options)
    if report.status != STATUS_OPTIMAL:
        raise ConvergenceError("design solve did not reach stationarity",
                               report.iterations, report.gap)
    raw = np.asarray(raw, dtype=float)
    raw[raw < 0.0] = 0.0
    tau_star = _min_norm_equivalent(blocks, raw)

    objective = dro_objective(blocks, model, eps, tau_star)
    q, q0 = latency_decomposition(blocks, tau_star)
    worst_case = float(eps * np.linalg.norm(q) + q @ model.mean + q0)
    return DesignResult(tau_star=tau_star, objective=objective, worst_case_latency=worst_case,
                        eps=eps, iterations=report.iterations, residual=report.gap)


def nominal_tolls(blocks: KktBlocks, model: DisturbanceModel,
                  options: SolverOptions | None = None) -> DesignResult:
    """Optimal tolls when the plug-in moments are trusted outright."""
    return solve_dro_tolls(blocks, model, 0.0, options)
