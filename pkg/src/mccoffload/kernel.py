"""Log-barrier interior method for small dense smooth convex programs.

Problems are ``minimize f(x)`` subject to ``g_k(x) <= 0`` and box bounds.
The solver follows the barrier central path with damped primal-dual Newton
steps: multipliers are carried explicitly, the barrier weight is set to a
fraction of the current average complementarity, and each step is
backtracked first for strict feasibility, then for residual decrease.

Constraints are supplied as stacked evaluators (values, Jacobian, Hessians)
so each Newton step costs a handful of small array operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence
import math

import numpy as np

__all__ = [
    "ConvexSubproblem",
    "KernelOptions",
    "KernelResult",
    "FeasibilityResult",
    "InfeasibleStart",
    "stack_constraints",
    "solve",
    "find_strictly_feasible",
]

Vector = np.ndarray
ScalarFn = Callable[[Vector], float]
VectorFn = Callable[[Vector], Vector]
MatrixFn = Callable[[Vector], np.ndarray]


class InfeasibleStart(ValueError):
    pass


def stack_constraints(
    funcs: Sequence[tuple[ScalarFn, VectorFn, MatrixFn]], dim: int
) -> tuple[VectorFn, MatrixFn, Callable[[Vector], np.ndarray]]:
    """Turn a list of scalar ``(g, grad_g, hess_g)`` triples into stacked evaluators."""
    funcs = list(funcs)

    def values(x):
        return np.array([f(x) for f, _, _ in funcs], dtype=float).reshape(len(funcs))

    def jac(x):
        if not funcs:
            return np.zeros((0, dim))
        return np.array([g(x) for _, g, _ in funcs], dtype=float).reshape(len(funcs), dim)

    def hess(x):
        if not funcs:
            return np.zeros((0, dim, dim))
        return np.array([h(x) for _, _, h in funcs], dtype=float).reshape(len(funcs), dim, dim)

    return values, jac, hess


def _no_constraints(dim: int):
    return stack_constraints([], dim)


@dataclass
class ConvexSubproblem:
    """Smooth convex program. ``lower``/``upper`` may hold -inf/inf for free sides."""

    dim: int
    objective: ScalarFn
    objective_grad: VectorFn
    objective_hess: MatrixFn
    constraints: VectorFn | None = None
    constraints_jac: MatrixFn | None = None
    constraints_hess: Callable[[Vector], np.ndarray] | None = None
    lower: Vector | None = None
    upper: Vector | None = None
    names: tuple[str, ...] = ()
    # optional single call returning (values, jacobian, hessians)
    constraints_all: Callable[[Vector], tuple[Vector, np.ndarray, np.ndarray]] | None = None

    def __post_init__(self) -> None:
        if self.constraints is None:
            self.constraints, self.constraints_jac, self.constraints_hess = _no_constraints(self.dim)
        n = self.dim
        self.lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, float)
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bounds must have shape (dim,)")

    @property
    def n_constraints(self) -> int:
        return int(np.asarray(self.constraints(self._probe())).size)

    def _probe(self) -> Vector:
        lo = np.where(np.isfinite(self.lower), self.lower, 0.0)
        hi = np.where(np.isfinite(self.upper), self.upper, lo + 2.0)
        return 0.5 * (lo + hi) + 0.5

    def max_violation(self, x: Vector) -> float:
        """Largest of ``g_k(x)`` and the bound violations (``<= 0`` means feasible)."""
        x = np.asarray(x, float)
        g = np.asarray(self.constraints(x), float)
        parts = [g, self.lower - x, x - self.upper]
        vals = np.concatenate([p[np.isfinite(p) | np.isnan(p)] for p in parts])
        if vals.size == 0:
            return -np.inf
        if np.any(np.isnan(vals)):
            return np.inf
        return float(vals.max())


@dataclass(frozen=True)
class KernelOptions:
    tolerance: float = 1e-8
    max_iterations: int = 400
    barrier_initial: float = 0.01
    barrier_reduction: float = 0.2
    backtracking: float = 0.5
    sufficient_decrease: float = 1e-4
    bound_shift: float = 1e-12

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        for name in ("barrier_reduction", "backtracking", "sufficient_decrease"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.barrier_initial > 0:
            raise ValueError("barrier_initial must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class KernelResult:
    x: Vector
    fun: float
    converged: bool
    iterations: int
    barrier_weight: float
    kkt_residual: float
    multipliers: Vector = field(repr=False)
    complementarity: float = 0.0


@dataclass
class FeasibilityResult:
    feasible: bool
    x: Vector | None
    max_violation: float
    converged: bool = True


class _Inequalities:
    """Problem constraints followed by the finite bounds, all as ``G(x) <= 0``."""

    def __init__(self, problem: ConvexSubproblem, shift: float):
        self.p = problem
        self.shift = shift
        n = problem.dim
        self.lo_idx = np.flatnonzero(np.isfinite(problem.lower))
        self.hi_idx = np.flatnonzero(np.isfinite(problem.upper))
        self.mc = problem.n_constraints
        self.m = self.mc + self.lo_idx.size + self.hi_idx.size
        eye = np.eye(n)
        self.bound_jac = np.vstack([-eye[self.lo_idx], eye[self.hi_idx]]).reshape(-1, n)

    def _bounds(self, x):
        return np.concatenate([
            self.p.lower[self.lo_idx] - self.shift - x[self.lo_idx],
            x[self.hi_idx] - self.p.upper[self.hi_idx] - self.shift,
        ])

    def values(self, x) -> Vector:
        with np.errstate(all="ignore"):
            g = np.asarray(self.p.constraints(x), float).reshape(self.mc)
        return np.concatenate([g, self._bounds(x)])

    def strictly_inside(self, x) -> bool:
        if not np.all(np.isfinite(x)):
            return False
        G = self.values(x)
        return bool(np.all(G < 0))

    def first_order(self, x):
        p = self.p
        with np.errstate(all="ignore"):
            if p.constraints_all is not None:
                g, J, _ = p.constraints_all(x)
            else:
                g, J = p.constraints(x), p.constraints_jac(x)
            g = np.asarray(g, float).reshape(self.mc)
            J = np.asarray(J, float).reshape(self.mc, p.dim)
        return np.concatenate([g, self._bounds(x)]), np.vstack([J, self.bound_jac])

    def second_order(self, x):
        p = self.p
        if p.constraints_all is not None:
            g, J, H = p.constraints_all(x)
        else:
            g = p.constraints(x)
            J = p.constraints_jac(x)
            H = p.constraints_hess(x)
        g = np.asarray(g, float).reshape(self.mc)
        J = np.asarray(J, float).reshape(self.mc, p.dim)
        H = np.asarray(H, float).reshape(self.mc, p.dim, p.dim)
        return np.concatenate([g, self._bounds(x)]), np.vstack([J, self.bound_jac]), H


def _newton_direction(hess, rhs):
    try:
        dx = np.linalg.solve(hess, rhs)
        if np.all(np.isfinite(dx)):
            return dx
        raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        if not np.all(np.isfinite(hess)):
            return np.zeros_like(rhs)
        reg = 1e-12 * max(1.0, float(np.abs(np.diag(hess)).max()))
        return np.linalg.lstsq(hess + reg * np.eye(len(rhs)), rhs, rcond=None)[0]


@dataclass
class _PDState:
    x: Vector
    lam: Vector
    iterations: int = 0
    converged: bool = False
    stationarity: float = np.inf
    gap: float = np.inf
    mu: float = np.inf


def _primal_dual(
    problem: ConvexSubproblem,
    ineq: _Inequalities,
    x: Vector,
    lam: Vector | None,
    opts: KernelOptions,
    stop: Callable[[Vector], bool] | None = None,
) -> _PDState:
    m = ineq.m
    G = ineq.values(x)
    if lam is None or lam.shape != (m,) or not np.all(lam > 0):
        lam = opts.barrier_initial / -G
    state = _PDState(x.copy(), lam.copy())
    if m == 0:
        lam = np.zeros(0)
    cached = None
    while state.iterations < opts.max_iterations:
        x, lam = state.x, state.lam
        G, J, Hc = cached if cached is not None else ineq.second_order(x)
        grad_f = np.asarray(problem.objective_grad(x), float)
        r_dual = grad_f + J.T @ lam
        gap = float(-G @ lam)
        state.stationarity = float(np.linalg.norm(r_dual))
        state.gap = gap
        if state.stationarity <= opts.tolerance and gap <= opts.tolerance:
            state.converged = True
            break
        # aggressive reduction, but hold the barrier weight while the dual
        # residual is still large so the iterate cannot stall on the boundary
        if m == 0:
            mu = 0.0
        else:
            mu = opts.barrier_reduction * gap / m
            if math.isfinite(state.mu):
                mu = max(mu, min(state.mu, 0.001 * state.stationarity))
        state.mu = mu
        r_cent = -lam * G - mu
        w = lam / -G
        H = np.asarray(problem.objective_hess(x), float) + (J.T * w) @ J
        if ineq.mc:
            n = x.size
            H = H + (lam[: ineq.mc] @ Hc.reshape(ineq.mc, n * n)).reshape(n, n)
        dx = _newton_direction(H, -(grad_f + J.T @ (mu / -G)))
        dlam = -lam - mu / G + w * (J @ dx)

        step = 1.0
        neg = dlam < 0
        if np.any(neg):
            step = min(1.0, 0.99 * float(np.min(-lam[neg] / dlam[neg])))
        res0 = math.sqrt(state.stationarity**2 + float(r_cent @ r_cent))
        dx_norm = float(np.linalg.norm(dx))
        x_norm = max(1.0, float(np.linalg.norm(x)))
        cached = None
        while step > 1e-16:
            xt, lt = x + step * dx, lam + step * dlam
            trial = ineq.second_order(xt)
            Gt, Jt = trial[0], trial[1]
            # strict interiority first (NaN fails the comparison)
            if not Gt.max(initial=-np.inf) < 0:
                step *= opts.backtracking
                continue
            rd = np.asarray(problem.objective_grad(xt), float) + Jt.T @ lt
            rc = -lt * Gt - mu
            res = math.sqrt(float(rd @ rd) + float(rc @ rc))
            # the residual cannot drop below rounding level; accept feasible progress there
            if (res <= (1.0 - opts.sufficient_decrease * step) * res0
                    or res <= 1e-13 * max(1.0, res0)
                    or step * dx_norm <= 1e-15 * x_norm):
                cached = trial
                break
            step *= opts.backtracking
        state.iterations += 1
        if cached is None:
            break
        state.x = x + step * dx
        state.lam = np.maximum(lam + step * dlam, 1e-300)
        if stop is not None and stop(state.x):
            break
    return state


def solve(
    problem: ConvexSubproblem,
    start: Sequence[float] | Vector,
    opts: KernelOptions | None = None,
    multipliers: Vector | None = None,
) -> KernelResult:
    """Minimize a convex program from a strictly feasible start.

    ``multipliers`` (constraints then finite bounds) warm-starts the duals.

    Raises
    ------
    InfeasibleStart
        If ``start`` violates a constraint or sits on a bound.
    """
    opts = opts or KernelOptions()
    x0 = np.array(start, dtype=float)
    ineq = _Inequalities(problem, opts.bound_shift)
    if x0.shape != (problem.dim,) or not ineq.strictly_inside(x0):
        raise InfeasibleStart("start point is not strictly feasible")
    f_start = float(problem.objective(x0))
    state = _primal_dual(problem, ineq, x0, multipliers, opts)
    x = state.x
    fun = float(problem.objective(x))
    if fun > f_start:
        x, fun = x0, f_start
    return KernelResult(
        x=x,
        fun=fun,
        converged=state.converged,
        iterations=state.iterations,
        barrier_weight=state.mu,
        kkt_residual=state.stationarity,
        multipliers=state.lam,
        complementarity=state.gap,
    )


def find_strictly_feasible(
    problem: ConvexSubproblem,
    hint: Sequence[float] | Vector | None = None,
    opts: KernelOptions | None = None,
) -> FeasibilityResult:
    """Phase-I search: minimize ``s`` subject to ``g_k(x) <= s`` inside the bounds.

    Stops at the first strictly feasible iterate. The problem is declared
    infeasible when the phase-I optimum is nonnegative.
    """
    opts = opts or KernelOptions()
    n = problem.dim
    lo, hi = problem.lower, problem.upper
    x0 = np.zeros(n) if hint is None else np.array(hint, dtype=float)
    width = np.where(np.isfinite(hi - lo), hi - lo, np.inf)
    pad = np.minimum(1e-6 * np.maximum(1.0, np.abs(x0)), 0.25 * width)
    x0 = np.where(np.isfinite(lo), np.maximum(x0, lo + pad), x0)
    x0 = np.where(np.isfinite(hi), np.minimum(x0, hi - pad), x0)
    ineq = _Inequalities(problem, 0.0)
    if ineq.strictly_inside(x0):
        return FeasibilityResult(True, x0, problem.max_violation(x0))
    with np.errstate(all="ignore"):
        g0 = np.asarray(problem.constraints(x0), float)
    if g0.size == 0 or not np.all(np.isfinite(g0)):
        return FeasibilityResult(False, None, np.inf, converged=False)
    scale = max(1.0, float(np.abs(g0).max()))

    def values(z):
        return np.asarray(problem.constraints(z[:n]), float) - z[n]

    def jac(z):
        J = np.asarray(problem.constraints_jac(z[:n]), float).reshape(-1, n)
        return np.hstack([J, -np.ones((J.shape[0], 1))])

    def hess(z):
        H = np.asarray(problem.constraints_hess(z[:n]), float).reshape(-1, n, n)
        out = np.zeros((H.shape[0], n + 1, n + 1))
        out[:, :n, :n] = H
        return out

    e = np.zeros(n + 1)
    e[n] = 1.0
    phase1 = ConvexSubproblem(
        dim=n + 1,
        objective=lambda z: float(z[n]),
        objective_grad=lambda z: e,
        objective_hess=lambda z: np.zeros((n + 1, n + 1)),
        constraints=values,
        constraints_jac=jac,
        constraints_hess=hess,
        lower=np.append(lo, -scale),
        upper=np.append(hi, np.inf),
    )
    z0 = np.append(x0, float(g0.max()) + 1.0)
    ineq1 = _Inequalities(phase1, 0.0)
    # the objective gradient must be balanced by the constraint multipliers, so
    # start them summing to one instead of at the barrier scale
    lam0 = opts.barrier_initial / -ineq1.values(z0)
    lam0[: g0.size] = np.maximum(lam0[: g0.size], 1.0 / g0.size)
    state = _primal_dual(
        phase1, ineq1, z0, lam0, opts,
        stop=lambda z: ineq.strictly_inside(z[:n]),
    )
    x = state.x[:n]
    if ineq.strictly_inside(x):
        return FeasibilityResult(True, x.copy(), problem.max_violation(x))
    s_opt = float(state.x[n])
    if state.converged and s_opt >= -opts.tolerance:
        return FeasibilityResult(False, None, s_opt)
    return FeasibilityResult(False, None, s_opt, converged=state.converged)
