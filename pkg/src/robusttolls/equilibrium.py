"""Wardrop equilibria under linear latencies, closed form and by oracle.

With latency ``beta_e * f_e + alpha_e + tau_e`` on every edge, the
equilibrium flow is the minimizer of a strictly convex quadratic
potential over the flow polytope.  Eliminating the flow-balance
constraints once per network yields a small set of dense blocks
(:func:`kkt_blocks`) from which equilibria, node potentials, and the
equilibrium latency are all affine or quadratic evaluations.  The closed
form is only valid while every edge keeps positive flow; the
potential-minimization solver (:func:`nash_flow_potential`) is the
slower, regime-free reference that also handles boundary equilibria.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, NumericalDegeneracyError, OutOfRegimeError
from .network import IncidenceData
from .optim import spectral_norm


@dataclass(frozen=True)
class LatencyModel:
    """Per-edge latency slopes for ``latency = beta * flow + offset``.

    Slopes must be strictly positive; that is what makes the equilibrium
    unique and the elimination blocks well defined.
    """

    beta: np.ndarray

    def __post_init__(self) -> None:
        beta = np.ascontiguousarray(np.asarray(self.beta, dtype=float))
        if beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta must be a nonempty vector")
        if not np.all(beta > 0.0):
            raise ValueError("every latency slope must be strictly positive")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class KktBlocks:
    """Dense elimination blocks of the equilibrium optimality system.

    For slope matrix B and reduced incidence R these are
    ``s = (R B^-1 R')^-1``, ``lam = B^-1 R' s``, and
    ``gamma = B^-1 - lam R B^-1`` (symmetric positive semidefinite with
    null space spanned by the rows of R), plus ``c = lam @ injections``,
    the equilibrium flow when perceived edge costs vanish.  ``gamma``
    maps a perceived-cost vector to the flow it displaces, which is why
    every formula downstream is affine in it.  The source incidence and
    latency data ride along so later stages need only this object.
    """

    gamma: np.ndarray
    lam: np.ndarray
    s: np.ndarray
    gamma_norm: float
    c: np.ndarray
    inc: IncidenceData
    lat: LatencyModel

    @property
    def demand_latency_term(self) -> float:
        """The constant ``injections @ s @ injections`` in the latency."""
        eta = self.inc.injections
        return float(eta @ self.s @ eta)


@dataclass(frozen=True)
class NashSolution:
    """An equilibrium flow with its node potentials and provenance.

    ``node_potentials`` holds one multiplier per non-destination node;
    the perceived cost of any used edge equals the potential drop across
    it.  ``method`` records which solver produced the point
    (``"closed_form"`` or ``"potential"``).
    """

    flow: np.ndarray
    node_potentials: np.ndarray
    method: str


def kkt_blocks(inc: IncidenceData, lat: LatencyModel) -> KktBlocks:
    """Factor the equilibrium system once for a network and latency model.

    Uses a Cholesky factorization of ``R B^-1 R'`` (dense, one row per
    non-destination node) rather than inverting the full saddle-point
    matrix.  Construction verifies the two structural identities the rest
    of the package leans on: ``gamma`` is positive semidefinite and
    annihilates the rows of R.
    """
    matrix, eta = inc.matrix, inc.injections
    if lat.beta.shape != (matrix.shape[1],):
        raise ValueError(f"beta must have length {matrix.shape[1]}, got {lat.beta.shape}")
    binv = 1.0 / lat.beta
    weighted = matrix * binv  # R B^-1, shape (k, m)
    normal = weighted @ matrix.T
    try:
        chol = np.linalg.cholesky(normal)
    except np.linalg.LinAlgError as err:
        raise NumericalDegeneracyError("R B^-1 R' is not positive definite") from err
    chol_inv = np.linalg.solve(chol, np.eye(chol.shape[0]))
    s = chol_inv.T @ chol_inv
    lam = weighted.T @ s
    gamma = np.diag(binv) - lam @ weighted
    gamma = 0.5 * (gamma + gamma.T)

    eigvals = np.linalg.eigvalsh(gamma)
    gamma_norm = float(np.abs(eigvals).max(initial=0.0))
    # When the network has as many independent balance rows as edges the
    # block is structurally zero and gamma_norm is round-off dust, so the
    # definiteness test needs the scale of B^-1 itself as a floor.
    if eigvals.size and eigvals[0] < -1e-10 * max(gamma_norm, float(binv.max())):
        raise NumericalDegeneracyError(f"flow-response block has eigenvalue {eigvals[0]:.3e} < 0")
    annihilation = float(np.abs(gamma @ matrix.T).max(initial=0.0))
    if annihilation > 1e-10 * max(gamma_norm, 1.0) * max(1.0, float(np.abs(matrix).max(initial=0.0))):
        raise NumericalDegeneracyError("flow-response block does not annihilate the incidence rows")

    c = lam @ eta
    for arr in (gamma, lam, s, c):
        arr.setflags(write=False)
    return KktBlocks(gamma=gamma, lam=lam, s=s, gamma_norm=gamma_norm, c=c, inc=inc, lat=lat)


def _check_cost_vectors(blocks: KktBlocks, alpha: np.ndarray, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = blocks.gamma.shape[0]
    alpha = np.asarray(alpha, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if alpha.shape != (m,):
        raise ValueError(f"alpha must have length {m}, got {alpha.shape}")
    if tau.shape != (m,):
        raise ValueError(f"tau must have length {m}, got {tau.shape}")
    return alpha, tau


def nash_flow_closed_form(blocks: KktBlocks, alpha: np.ndarray, tau: np.ndarray,
                          tol: float = 1e-9) -> NashSolution:
    """Equilibrium flow by direct evaluation, valid in the interior regime.

    ``flow = -gamma (alpha + tau) + c``.  If any component falls below
    ``-tol`` (scaled by demand) the closed form does not apply and
    :class:`OutOfRegimeError` is raised; callers should switch to
    :func:`nash_flow_potential`, which handles flows pinned at zero.
    """
    alpha, tau = _check_cost_vectors(blocks, alpha, tau)
    cost = alpha + tau
    flow = -blocks.gamma @ cost + blocks.c
    scale = max(1.0, float(np.abs(blocks.inc.injections).max(initial=0.0)))
    lowest = float(flow.min())
    if lowest < -tol * scale:
        raise OutOfRegimeError(lowest)
    # The raw multiplier of the balance constraint is the negated trip
    # cost; flip it so potentials decrease along used edges and the
    # destination sits at zero.
    potentials = blocks.lam.T @ cost + blocks.s @ blocks.inc.injections
    return NashSolution(flow=flow, node_potentials=potentials, method="closed_form")


def _single_path_flow(inc: IncidenceData) -> np.ndarray:
    """A feasible flow routing all demand along one source-destination path."""
    matrix = inc.matrix
    k, m = matrix.shape
    dest = k  # the dropped row plays the destination
    tails = np.full(m, dest, dtype=int)
    heads = np.full(m, dest, dtype=int)
    for j in range(m):
        plus = np.flatnonzero(matrix[:, j] > 0.5)
        minus = np.flatnonzero(matrix[:, j] < -0.5)
        if plus.size:
            tails[j] = int(plus[0])
        if minus.size:
            heads[j] = int(minus[0])
    out_edges: list[list[int]] = [[] for _ in range(k + 1)]
    for j in range(m - 1, -1, -1):
        out_edges[tails[j]].append(j)

    stack: list[tuple[int, tuple[int, ...]]] = [(0, ())]
    seen = {0}
    while stack:
        node, prefix = stack.pop()
        if node == dest:
            flow = np.zeros(m)
            flow[list(prefix)] = inc.injections[0]
            return flow
        for j in out_edges[node]:
            if heads[j] not in seen or heads[j] == dest:
                if heads[j] != dest:
                    seen.add(heads[j])
                stack.append((heads[j], prefix + (j,)))
    raise NumericalDegeneracyError("no source-destination path in incidence data")


def nash_flow_potential(inc: IncidenceData, lat: LatencyModel, alpha: np.ndarray, tau: np.ndarray,
                        max_iter: int = 0, tol: float = 1e-8) -> NashSolution:
    """Equilibrium flow by minimizing the congestion potential directly.

    Primal active-set iteration on ``min sum(0.5 beta f^2 + (alpha+tau) f)``
    subject to flow balance and ``f >= 0``: edges pinned at zero form the
    working set, each subproblem is an equality-constrained solve via
    ``lstsq`` (robust to redundant balance rows), and a pinned edge is
    released when its multiplier goes negative.  Starts from routing all
    demand on a single path, so the first iteration already lands on the
    closed form whenever that is feasible.  Raises
    :class:`ConvergenceError` if the iteration budget (default ``10 m``)
    is exhausted or the final KKT residual exceeds ``tol``.
    """
    matrix, eta = inc.matrix, inc.injections
    k, m = matrix.shape
    alpha = np.asarray(alpha, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if alpha.shape != (m,) or tau.shape != (m,):
        raise ValueError(f"alpha and tau must have length {m}")
    cost = alpha + tau
    beta = lat.beta
    if max_iter <= 0:
        max_iter = 10 * m

    flow = _single_path_flow(inc)
    pinned: list[int] = []
    potentials = np.zeros(k)
    scale = max(1.0, float(np.abs(eta).max(initial=0.0)))
    multipliers = np.zeros(m)

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        free = [j for j in range(m) if j not in pinned]
        sub = matrix[:, free]
        size = len(free)
        kkt = np.zeros((size + k, size + k))
        kkt[:size, :size] = np.diag(beta[free])
        kkt[:size, size:] = sub.T
        kkt[size:, :size] = sub
        target = np.concatenate([-cost[free], eta])
        sol = np.linalg.lstsq(kkt, target, rcond=None)[0]
        proposal = np.zeros(m)
        proposal[free] = sol[:size]
        potentials = sol[size:]

        direction = proposal - flow
        if float(np.abs(direction).max(initial=0.0)) <= 1e-12 * scale:
            multipliers = np.zeros(m)
            if pinned:
                multipliers[pinned] = (cost + matrix.T @ potentials)[pinned]
                worst = min(pinned, key=lambda j: multipliers[j])
                if multipliers[worst] < -1e-10 * max(1.0, float(np.abs(cost).max(initial=0.0))):
                    pinned.remove(worst)
                    continue
            converged = True
            break

        step = 1.0
        blocker = -1
        for j in free:
            if direction[j] < -1e-14 * scale:
                t = max(flow[j], 0.0) / -direction[j]
                if t < step - 1e-14:
                    step = t
                    blocker = j
        flow = flow + step * direction
        if blocker >= 0:
            flow[blocker] = 0.0
            pinned.append(blocker)
            pinned.sort()
        flow[pinned] = 0.0

    lam_full = np.clip(multipliers, 0.0, None)
    stationarity = float(np.abs(beta * flow + cost + matrix.T @ potentials - lam_full).max(initial=0.0))
    balance = float(np.abs(matrix @ flow - eta).max(initial=0.0))
    negativity = float(max(0.0, -flow.min(initial=0.0)))
    complementarity = float(np.abs(lam_full * flow).max(initial=0.0))
    residual = max(stationarity, balance, negativity, complementarity)
    if not converged or residual > tol * scale:
        raise ConvergenceError("potential minimization did not converge", iterations, residual)
    # Same sign convention as the closed form: flip the raw multiplier so
    # potentials drop by the edge cost along every used edge.
    return NashSolution(flow=flow, node_potentials=-potentials, method="potential")


def system_latency(flow: np.ndarray, lat: LatencyModel, alpha: np.ndarray) -> float:
    """Total travel time ``sum f_e (beta_e f_e + alpha_e)`` of a flow.

    Tolls are deliberately absent: they move money, not time, so the
    system performance measure ignores them.
    """
    flow = np.asarray(flow, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if flow.shape != lat.beta.shape or alpha.shape != lat.beta.shape:
        raise ValueError("flow and alpha must match the latency model length")
    return float(flow @ (lat.beta * flow + alpha))


def latency_decomposition(blocks: KktBlocks, tau: np.ndarray) -> tuple[np.ndarray, float]:
    """Split the equilibrium latency into a slope on alpha and a constant.

    For fixed tolls the in-regime equilibrium latency is affine in the
    disturbance: ``g(alpha) = q @ alpha + q0`` with ``q = gamma tau + c``
    and ``q0 = tau gamma tau + injections s injections``.  Returns
    ``(q, q0)``.
    """
    m = blocks.gamma.shape[0]
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (m,):
        raise ValueError(f"tau must have length {m}, got {tau.shape}")
    q = blocks.gamma @ tau + blocks.c
    q0 = float(tau @ blocks.gamma @ tau) + blocks.demand_latency_term
    return q, q0


def equilibrium_latency_g(blocks: KktBlocks, alpha: np.ndarray, tau: np.ndarray,
                          tol: float = 1e-9) -> float:
    """Equilibrium system latency at a disturbance and toll, in regime.

    Evaluates the affine decomposition after confirming the closed-form
    flow stays nonnegative (same regime test as
    :func:`nash_flow_closed_form`).  Tolls shift which equilibrium
    arises but are not themselves counted as travel time.
    """
    alpha, tau = _check_cost_vectors(blocks, alpha, tau)
    flow = -blocks.gamma @ (alpha + tau) + blocks.c
    scale = max(1.0, float(np.abs(blocks.inc.injections).max(initial=0.0)))
    lowest = float(flow.min())
    if lowest < -tol * scale:
        raise OutOfRegimeError(lowest)
    q, q0 = latency_decomposition(blocks, tau)
    return float(q @ alpha + q0)
