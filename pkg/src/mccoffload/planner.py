"""Exhaustive search over offloading decisions and energy-versus-latency sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math
from typing import Iterable, Sequence

import numpy as np

from .model import Allocation, Decision, EvalReport, Mode, Scenario, evaluate
from .sca import ScaOptions, ScaResult, initial_feasible_point, sca_solve

__all__ = [
    "OPTIMAL",
    "INFEASIBLE",
    "MAX_TASKS",
    "Solution",
    "SweepResult",
    "all_decisions",
    "solve_decision",
    "plan",
    "sweep",
    "compare_modes",
]

OPTIMAL = "optimal-found"
INFEASIBLE = "infeasible"
MAX_TASKS = 20
# relative energy gap under which two decisions count as tied
TIE_RTOL = 1e-9
# uplink share of the spare latency budget for the deterministic start
UPLINK_HEAVY = 0.99


@dataclass(frozen=True)
class Solution:
    decision: Decision | None
    mode: Mode
    allocation: Allocation | None
    energy: float
    report: EvalReport | None
    status: str
    # exact-energy trace of the SCA run that produced the allocation
    trace: tuple[float, ...] = field(default=(), repr=False)
    converged: bool = True

    def __post_init__(self) -> None:
        if self.status == OPTIMAL and (self.report is None or not self.report.feasible):
            raise ValueError("an optimal-found solution must carry a feasible report")

    @property
    def found(self) -> bool:
        return self.status == OPTIMAL

    @classmethod
    def infeasible(cls, mode: Mode) -> Solution:
        return cls(None, mode, None, math.inf, None, INFEASIBLE)


@dataclass(frozen=True)
class SweepResult:
    axis: tuple[float, ...]
    solutions: dict[Mode, tuple[Solution, ...]]

    def __post_init__(self) -> None:
        a = self.axis
        if not a:
            raise ValueError("sweep grid must be nonempty")
        if any(b <= x for x, b in zip(a, a[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        for mode, sols in self.solutions.items():
            if len(sols) != len(a):
                raise ValueError(f"{mode.value}: expected {len(a)} solutions, got {len(sols)}")

    @property
    def modes(self) -> tuple[Mode, ...]:
        return tuple(self.solutions)

    def energies(self, mode: Mode | str) -> np.ndarray:
        return np.array([s.energy for s in self.solutions[Mode(mode)]])


def all_decisions(n_tasks: int) -> list[Decision]:
    """Every binary offloading vector of length ``n_tasks``, lexicographic order."""
    return [Decision(bits) for bits in itertools.product((0, 1), repeat=n_tasks)]


def _restart_rng(seed: int, decision: Decision, restart: int) -> np.random.Generator:
    code = int(decision.bitstring(), 2) if len(decision) else 0
    return np.random.default_rng(np.random.SeedSequence([seed, len(decision), code, restart]))


def solve_decision(
    scenario: Scenario,
    decision: Decision,
    mode: Mode | str,
    opts: ScaOptions | None = None,
    restarts: int = 3,
    seed: int = 0,
) -> ScaResult:
    """Best of ``restarts`` SCA runs for one decision.

    The first run starts from the uplink-heavy deterministic point; the others
    use randomized feasible initializations seeded from ``seed``.
    """
    mode = Mode(mode)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best: ScaResult | None = None
    for r in range(restarts):
        if r == 0:
            start = initial_feasible_point(scenario, decision, mode, share_ul=UPLINK_HEAVY,
                                           balanced=True)
        else:
            start = initial_feasible_point(scenario, decision, mode,
                                           rng=_restart_rng(seed, decision, r))
        if start is None:
            if r == 0:
                # the deterministic start fails only when the decision is infeasible
                start = initial_feasible_point(scenario, decision, mode)
                if start is None:
                    return ScaResult(None, math.inf, False, 0)
            else:
                continue
        res = sca_solve(scenario, decision, mode, opts, start=start)
        if res.feasible and (best is None or res.energy < best.energy):
            best = res
        if not decision.offloaded_set:
            break
    return best if best is not None else ScaResult(None, math.inf, False, 0)


def _better(cand: tuple[float, Decision], inc: tuple[float, Decision]) -> bool:
    (e1, d1), (e2, d2) = cand, inc
    scale = max(abs(e1), abs(e2), 1e-300)
    if abs(e1 - e2) > TIE_RTOL * scale:
        return e1 < e2
    return (sum(d1.offload), d1.offload) < (sum(d2.offload), d2.offload)


def plan(
    scenario: Scenario,
    mode: Mode | str,
    opts: ScaOptions | None = None,
    restarts: int = 3,
    seed: int = 0,
    decisions: Iterable[Decision] | None = None,
) -> Solution:
    """Minimum-energy decision over the full enumeration of offloading vectors.

    Ties within a relative ``1e-9`` go to fewer offloaded tasks, then to the
    lexicographically smallest vector, so the result does not depend on the
    order in which ``decisions`` are visited.
    """
    mode = Mode(mode)
    n = scenario.n_tasks
    if n > MAX_TASKS:
        raise ValueError(f"exhaustive search is limited to {MAX_TASKS} tasks, got {n}")
    candidates = all_decisions(n) if decisions is None else list(decisions)
    best: tuple[float, Decision, ScaResult] | None = None
    for dec in candidates:
        if len(dec) != n:
            raise ValueError(f"decision {dec.bitstring()} does not match {n} tasks")
        res = solve_decision(scenario, dec, mode, opts, restarts, seed)
        if not res.feasible:
            continue
        if best is None or _better((res.energy, dec), best[:2]):
            best = (res.energy, dec, res)
    if best is None:
        return Solution.infeasible(mode)
    energy, dec, res = best
    report = evaluate(scenario, dec, res.allocation)
    if not report.feasible:
        return Solution.infeasible(mode)
    return Solution(dec, mode, res.allocation, report.energy, report, OPTIMAL,
                    tuple(res.energy_history), res.converged)


def _check_grid(grid: Sequence[float]) -> tuple[float, ...]:
    axis = tuple(float(x) for x in grid)
    if not axis:
        raise ValueError("sweep grid must be nonempty")
    if any(b <= a for a, b in zip(axis, axis[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    return axis


def sweep(
    scenario: Scenario,
    modes: Mode | str | Sequence[Mode | str],
    grid: Sequence[float],
    opts: ScaOptions | None = None,
    restarts: int = 3,
    seed: int = 0,
) -> SweepResult:
    """One :func:`plan` per grid point with ``latency_max`` replaced by the point."""
    axis = _check_grid(grid)
    if isinstance(modes, (Mode, str)):
        modes = [modes]
    modes = [Mode(m) for m in modes]
    out: dict[Mode, list[Solution]] = {m: [] for m in modes}
    for l_max in axis:
        point = scenario.with_params(latency_max=l_max)
        for m in modes:
            out[m].append(plan(point, m, opts, restarts, seed))
    return SweepResult(axis, {m: tuple(v) for m, v in out.items()})


def compare_modes(
    scenario: Scenario,
    grid: Sequence[float],
    opts: ScaOptions | None = None,
    restarts: int = 3,
    seed: int = 0,
) -> SweepResult:
    """TD and SC sweeps on the same grid."""
    return sweep(scenario, (Mode.TD, Mode.SC), grid, opts, restarts, seed)
