"""Successive convex approximation over powers and slot durations for a fixed decision.

The iterate is the flat vector ``[p_ul..., p_dl..., l_ul..., l_dl...]`` over the
offloaded tasks (one shared ``l_ul``/``l_dl`` entry under SC). Each outer step
solves a strictly convex surrogate, then moves a fraction ``lambda^t`` of the
way to its minimizer, with ``lambda^{t+1} = lambda^t (1 - eps lambda^t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from . import kernel
from .channel import min_powers_sc, reliability_threshold, required_snr
from .kernel import ConvexSubproblem, KernelOptions
from .model import Allocation, Decision, Mode, Scenario, evaluate

__all__ = [
    "ScaOptions",
    "ScaState",
    "ScaResult",
    "DegenerateLinearization",
    "step_sizes",
    "initial_feasible_point",
    "build_td_subproblem",
    "build_sc_subproblem",
    "sc_exact_constraint",
    "sc_linearized_constraint",
    "sca_solve",
]

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
# randomized starts: uplink share of the spare budget, Dirichlet concentration per task
RANDOM_SHARE_UL = (0.8, 0.99)
RANDOM_CONCENTRATION = 20.0


class DegenerateLinearization(ValueError):
    """The SC interference linearization has a nonpositive denominator."""


@dataclass(frozen=True)
class ScaOptions:
    lambda0: float = 1.0
    epsilon: float = 0.01
    tau_slot: float = 1e-3
    tau_power: float = 1e-3
    max_outer_iterations: int = 500
    iterate_tolerance: float = 1e-6
    energy_tolerance: float = 1e-8
    min_step: float = 1e-6
    kernel: KernelOptions = field(default_factory=KernelOptions)

    def __post_init__(self) -> None:
        if not 0.0 < self.lambda0 <= 1.0:
            raise ValueError("lambda0 must lie in (0, 1]")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not (self.tau_slot > 0 and self.tau_power > 0):
            raise ValueError("proximal weights must be > 0")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")


def step_sizes(lambda0: float, epsilon: float, count: int) -> np.ndarray:
    """First ``count`` step sizes of ``lambda^{t+1} = lambda^t (1 - epsilon lambda^t)``."""
    out = np.empty(count)
    lam = lambda0
    for t in range(count):
        out[t] = lam
        lam = lam * (1.0 - epsilon * lam)
    return out


@dataclass
class ScaState:
    iterate: np.ndarray
    t: int
    step: float
    energy_history: list[float]


@dataclass
class ScaResult:
    allocation: Allocation | None
    energy: float
    converged: bool
    iterations: int
    energy_history: list[float] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.allocation is not None


# ---------------------------------------------------------------- helpers


@dataclass(frozen=True)
class _Layout:
    """Index bookkeeping for the flat iterate."""

    mode: Mode
    k: int

    @property
    def n_slots(self) -> int:
        return 1 if self.mode is Mode.SC else self.k

    @property
    def dim(self) -> int:
        return 2 * self.k + 2 * self.n_slots

    def p_ul(self, i):
        return i

    def p_dl(self, i):
        return self.k + i

    def l_ul(self, i):
        return 2 * self.k + (0 if self.mode is Mode.SC else i)

    def l_dl(self, i):
        return 2 * self.k + self.n_slots + (0 if self.mode is Mode.SC else i)

    def to_allocation(self, z) -> Allocation:
        k, s = self.k, self.n_slots
        z = np.maximum(np.asarray(z, float), 0.0)
        return Allocation(
            self.mode,
            p_ul=tuple(z[:k]),
            p_dl=tuple(z[k:2 * k]),
            l_ul=tuple(z[2 * k:2 * k + s]),
            l_dl=tuple(z[2 * k + s:]),
        )


def _thresholds(scenario: Scenario, decision: Decision) -> list[float]:
    d = scenario.params.diversity
    return [reliability_threshold(scenario.reliability.conditional[i], d)
            for i in decision.offloaded_set]


def _latency_weight(scenario: Scenario, mode: Mode, k: int) -> int:
    if mode is Mode.SC and scenario.params.sc_latency == "once":
        return 1
    return k if mode is Mode.SC else 1


def _rate_value(a: float, L: float, P: float, snr: float) -> float:
    if a == 0.0:
        return 0.0
    if not (L > 0 and P > 0):
        return math.inf
    u = LN2 * a / L
    if u > 700.0:
        return math.inf
    return math.expm1(u) / (snr * P)


def _rate_term(a: float, L: float, P: float, snr: float):
    """``h(L, P) = (2^(a/L) - 1) / (snr*P)`` with gradient and Hessian in (L, P)."""
    if a == 0.0:
        return 0.0, np.zeros(2), np.zeros((2, 2))
    if not (L > 0 and P > 0):
        return math.inf, np.full(2, np.nan), np.full((2, 2), np.nan)
    u = LN2 * a / L
    if u > 700.0:
        return math.inf, np.full(2, np.nan), np.full((2, 2), np.nan)
    eu = math.exp(u)
    x = math.expm1(u)
    dx = -eu * u / L
    d2x = eu * u * (u + 2.0) / (L * L)
    sp = snr * P
    h = x / sp
    grad = np.array([dx / sp, -x / (sp * P)])
    hess = np.array([
        [d2x / sp, -dx / (sp * P)],
        [-dx / (sp * P), 2.0 * x / (sp * P * P)],
    ])
    return h, grad, hess


# ------------------------------------------------------------ initialization


def _min_dl_slot_td(bits: float, bw: float, snr: float, c: float, cap: float) -> float:
    # TD downlink slot at which headroomed minimum power equals the cap
    if bits == 0:
        return 0.0
    return bits / (bw * math.log2(1.0 + snr * c * cap))


def _min_dl_slot_sc(bits, cs, bw, snr, cap, headroom, limit) -> float | None:
    if not any(bits):
        return 0.0

    def ok(M):
        return max(min_powers_sc(bits, cs, M, bw, snr, headroom)) < cap

    hi = 1e-3
    while not ok(hi):
        hi *= 2.0
        if hi > limit:
            return None
    lo = hi / 2.0
    while lo > 1e-12 and ok(lo):
        hi, lo = lo, lo / 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _log_uplink_slope(a: float, L: float, coef: float) -> float:
    # log of -d/dL [coef * L * (2^(a/L) - 1)], decreasing in L
    u = LN2 * a / L
    if u > 40.0:
        return math.log(coef) + u + math.log(u - 1.0)
    return math.log(coef) + math.log(max(u * math.exp(u) - math.expm1(u), 1e-300))


def _balanced_split(a: list[float], coef: list[float], budget: float) -> list[float]:
    """Slot lengths summing to ``budget`` with equal marginal uplink energy."""
    live = [i for i, ai in enumerate(a) if ai > 0]
    out = [0.0] * len(a)
    if not live:
        return [budget / len(a)] * len(a)

    def slot_at(i, t):
        lo, hi = 1e-15 * budget, budget
        if _log_uplink_slope(a[i], hi, coef[i]) >= t:
            return hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _log_uplink_slope(a[i], mid, coef[i]) > t:
                lo = mid
            else:
                hi = mid
        return hi

    # at t_lo every slot takes the whole budget, at t_hi each takes at most budget / n
    t_lo = min(_log_uplink_slope(a[i], budget, coef[i]) for i in live)
    t_hi = max(_log_uplink_slope(a[i], budget / len(live), coef[i]) for i in live)
    for _ in range(200):
        mid = 0.5 * (t_lo + t_hi)
        if sum(slot_at(i, mid) for i in live) > budget:
            t_lo = mid
        else:
            t_hi = mid
    slots = [slot_at(i, t_hi) for i in live]
    scale = budget / sum(slots)
    for i, L in zip(live, slots):
        out[i] = L * scale
    return out


def initial_feasible_point(
    scenario: Scenario,
    decision: Decision,
    mode: Mode | str,
    rng: np.random.Generator | None = None,
    headroom: float = 1.01,
    share_ul: float = 0.5,
    balanced: bool = False,
) -> Allocation | None:
    """Strictly feasible starting allocation, or ``None`` if the decision is infeasible.

    The residual latency budget (after compute time) is first spent on the
    shortest downlink slots that respect the power cap; the rest is split
    between uplink and downlink with uplink fraction ``share_ul``, unless
    ``rng`` randomizes the split. Under TD the uplink part is shared evenly
    across tasks, or with equal marginal uplink energy when ``balanced``; a
    random start draws the task weights around that balanced split.
    Powers are the minimum ones scaled by ``headroom``.
    """
    mode = Mode(mode)
    p = scenario.params
    offloaded = decision.offloaded_set
    k = len(offloaded)
    residual = p.latency_max - scenario.compute_floor(decision)
    if k == 0:
        return Allocation.empty(mode) if residual >= 0 else None
    if residual <= 0:
        return None
    tasks = [scenario.graph.tasks[i] for i in offloaded]
    cs = _thresholds(scenario, decision)
    if rng is not None:
        share_ul = float(rng.uniform(*RANDOM_SHARE_UL))
    usable = 0.99

    if mode is Mode.TD:
        d_min = [_min_dl_slot_td(t.bits_out, p.bw_dl, p.snr_dl, c, p.p_max_dl / headroom)
                 for t, c in zip(tasks, cs)]
        spare = residual - sum(d_min)
        if spare <= 0:
            return None
        if balanced or rng is not None:
            ul_budget = usable * spare * share_ul
            w = np.asarray(_balanced_split([t.bits_in / p.bw_ul for t in tasks],
                                           [1.0 / (p.snr_ul * c) for c in cs],
                                           ul_budget)) / ul_budget
            if rng is not None:
                # random weights concentrated around the balanced split
                w = rng.dirichlet(RANDOM_CONCENTRATION * k * np.maximum(w, 1e-3))
        else:
            w = np.full(k, 1.0 / k)
        l_ul = [usable * spare * share_ul * wi for wi in w]
        l_dl = [dm + usable * spare * (1.0 - share_ul) * wi for dm, wi in zip(d_min, w)]
        p_ul = [headroom * required_snr(t.bits_in, l, p.bw_ul) / (p.snr_ul * c)
                for t, l, c in zip(tasks, l_ul, cs)]
        p_dl = [headroom * required_snr(t.bits_out, l, p.bw_dl) / (p.snr_dl * c)
                for t, l, c in zip(tasks, l_dl, cs)]
        alloc = Allocation(mode, tuple(p_ul), tuple(p_dl), tuple(l_ul), tuple(l_dl))
    else:
        budget = residual / _latency_weight(scenario, mode, k)
        bits_in = [t.bits_in for t in tasks]
        bits_out = [t.bits_out for t in tasks]
        d_min = _min_dl_slot_sc(bits_out, cs, p.bw_dl, p.snr_dl, p.p_max_dl, headroom, budget)
        if d_min is None or d_min >= budget:
            return None
        spare = budget - d_min
        L = usable * spare * share_ul
        M = d_min + usable * spare * (1.0 - share_ul)
        alloc = Allocation(
            mode,
            tuple(min_powers_sc(bits_in, cs, L, p.bw_ul, p.snr_ul, headroom)),
            tuple(min_powers_sc(bits_out, cs, M, p.bw_dl, p.snr_dl, headroom)),
            (L,),
            (M,),
        )
    report = evaluate(scenario, decision, alloc, atol=0.0)
    return alloc if report.feasible else None


# ------------------------------------------------------------- surrogates


def _objective(layout: _Layout, s: np.ndarray, const: float, opts: ScaOptions):
    """Linearized uplink energy plus proximal terms on every coordinate."""
    k = layout.k
    n = layout.dim
    grad0 = np.zeros(n)
    for i in range(k):
        grad0[layout.l_ul(i)] += s[layout.p_ul(i)]
        grad0[layout.p_ul(i)] += s[layout.l_ul(i)]
    tau = np.empty(n)
    # proximal weights are relative to the coordinate magnitudes
    for i in range(k):
        for idx in (layout.p_ul(i), layout.p_dl(i)):
            tau[idx] = opts.tau_power * max(abs(s[idx]), 1e-6)
    for i in range(layout.n_slots):
        for idx in (layout.l_ul(i), layout.l_dl(i)):
            tau[idx] = opts.tau_slot * max(abs(s[idx]), 1e-6)
    if layout.mode is Mode.SC:
        # the shared slot collects one proximal term per task
        tau[layout.l_ul(0)] *= k
        tau[layout.l_dl(0)] *= k
    H = np.diag(tau)

    def f(z):
        dz = z - s
        return const + float(grad0 @ dz) + 0.5 * float(dz @ (tau * dz))

    def g(z):
        return grad0 + tau * (z - s)

    return f, g, (lambda z: H)


def _latency_row(layout: _Layout, weight: int) -> np.ndarray:
    row = np.zeros(layout.dim)
    row[2 * layout.k:] = weight
    return row


@dataclass(frozen=True)
class _Links:
    """Rate terms ``(2^(a/L) - 1)/(snr P)`` addressed by slot and power indices."""

    slot: np.ndarray
    power: np.ndarray
    a: np.ndarray
    snr: np.ndarray

    def __init__(self, slot, power, a, snr):
        object.__setattr__(self, "slot", np.asarray(slot, dtype=int))
        object.__setattr__(self, "power", np.asarray(power, dtype=int))
        object.__setattr__(self, "a", np.asarray(a, dtype=float))
        object.__setattr__(self, "snr", np.asarray(snr, dtype=float))


def _td_names(offloaded) -> tuple[str, ...]:
    return ("latency",) + tuple(
        name for i in offloaded for name in (f"rel_ul[{i + 1}]", f"rel_dl[{i + 1}]")
    ) + tuple(f"cap_dl[{i + 1}]" for i in offloaded)


def _stacked_subproblem(layout, s, scenario, decision, opts, lat_row, floor,
                        links: _Links, offset, lin, caps, names) -> ConvexSubproblem:
    # rows: latency, one reliability row per link (rate term + lin @ z + offset), caps
    p = scenario.params
    n = layout.dim
    nl = links.a.size
    k = caps.size
    m = 1 + nl + k
    rows = np.arange(1, 1 + nl)
    cap_rows = np.arange(1 + nl, m)
    has_lin = lin.shape[0] > 0
    J_static = np.zeros((m, n))
    J_static[0] = lat_row
    J_static[cap_rows, caps] = 1.0
    if has_lin:
        J_static[rows] += lin

    spec = list(zip(rows.tolist(), links.slot.tolist(), links.power.tolist(),
                    links.a.tolist(), links.snr.tolist()))

    def evaluate_all(z, order=2):
        vals = np.empty(m)
        vals[0] = float(lat_row @ z) + floor - p.latency_max
        vals[rows] = offset + (lin @ z if has_lin else 0.0)
        vals[cap_rows] = z[caps] - p.p_max_dl
        J = J_static.copy() if order >= 1 else None
        Hs = np.zeros((m, n, n)) if order >= 2 else None
        for r, li, pi, a, snr in spec:
            if order == 0:
                vals[r] += _rate_value(a, z[li], z[pi], snr)
                continue
            h, gr, he = _rate_term(a, z[li], z[pi], snr)
            vals[r] += h
            J[r, li] += gr[0]
            J[r, pi] += gr[1]
            if Hs is not None:
                Hs[r, li, li] = he[0, 0]
                Hs[r, li, pi] = he[0, 1]
                Hs[r, pi, li] = he[1, 0]
                Hs[r, pi, pi] = he[1, 1]
        return vals, J, Hs

    f, g, H = _objective(layout, s, scenario.local_energy(decision), opts)
    return ConvexSubproblem(
        dim=n,
        objective=f,
        objective_grad=g,
        objective_hess=H,
        constraints=lambda z: evaluate_all(z, 0)[0],
        constraints_jac=lambda z: evaluate_all(z, 1)[1],
        constraints_hess=lambda z: evaluate_all(z, 2)[2],
        constraints_all=evaluate_all,
        lower=np.zeros(n),
        names=names,
    )


def build_td_subproblem(
    scenario: Scenario, decision: Decision, iterate, opts: ScaOptions | None = None
) -> ConvexSubproblem:
    opts = opts or ScaOptions()
    p = scenario.params
    offloaded = decision.offloaded_set
    k = len(offloaded)
    layout = _Layout(Mode.TD, k)
    s = np.asarray(iterate.as_vector() if isinstance(iterate, Allocation) else iterate, float)
    tasks = [scenario.graph.tasks[i] for i in offloaded]
    cs = _thresholds(scenario, decision)
    floor = scenario.compute_floor(decision)
    lat_row = _latency_row(layout, 1)
    n = layout.dim
    li, pi, a, snr, cc = [], [], [], [], []
    for i, (t, c) in enumerate(zip(tasks, cs)):
        li += [layout.l_ul(i), layout.l_dl(i)]
        pi += [layout.p_ul(i), layout.p_dl(i)]
        a += [t.bits_in / p.bw_ul, t.bits_out / p.bw_dl]
        snr += [p.snr_ul, p.snr_dl]
        cc += [c, c]
    links = _Links(li, pi, a, snr)
    offset = -np.asarray(cc)
    caps = np.array([layout.p_dl(i) for i in range(k)], dtype=int)
    lin = np.zeros((0, n))
    return _stacked_subproblem(layout, s, scenario, decision, opts, lat_row, floor,
                               links, offset, lin, caps, _td_names(offloaded))


def sc_exact_constraint(a: float, L: float, P: float, above: float, snr: float, c: float) -> float:
    """Exact SC reliability constraint for one layer (``<= 0`` iff the target is met).

    ``above`` is the total power of the layers decoded after this one.
    """
    h, _, _ = _rate_term(a, L, P, snr)
    return h - 1.0 / (snr * above + 1.0 / c)


def sc_linearized_constraint(
    a: float, L: float, P: float, above: float, above_ref: float, snr: float, c: float
) -> float:
    """Convex upper bound of :func:`sc_exact_constraint`, tangent at ``above_ref``."""
    h, _, _ = _rate_term(a, L, P, snr)
    den = snr * above_ref + 1.0 / c
    return h - 1.0 / den + snr * (above - above_ref) / den**2


def build_sc_subproblem(
    scenario: Scenario, decision: Decision, iterate, opts: ScaOptions | None = None
) -> ConvexSubproblem:
    opts = opts or ScaOptions()
    p = scenario.params
    offloaded = decision.offloaded_set
    k = len(offloaded)
    layout = _Layout(Mode.SC, k)
    s = np.asarray(iterate.as_vector() if isinstance(iterate, Allocation) else iterate, float)
    tasks = [scenario.graph.tasks[i] for i in offloaded]
    cs = _thresholds(scenario, decision)
    floor = scenario.compute_floor(decision)
    lat_row = _latency_row(layout, _latency_weight(scenario, Mode.SC, k))
    n = layout.dim

    li, pi, a, snr, offset = [], [], [], [], []
    lin = np.zeros((2 * k, n))
    for direction, bits_of, bw, gamma, p_index, l_index in (
        ("ul", lambda t: t.bits_in, p.bw_ul, p.snr_ul, layout.p_ul, layout.l_ul),
        ("dl", lambda t: t.bits_out, p.bw_dl, p.snr_dl, layout.p_dl, layout.l_dl),
    ):
        for i, (t, c) in enumerate(zip(tasks, cs)):
            above_idx = [p_index(j) for j in range(i + 1, k)]
            above_ref = float(sum(s[j] for j in above_idx))
            den = gamma * above_ref + 1.0 / c
            if not den > 0:
                raise DegenerateLinearization(
                    f"nonpositive linearization denominator for layer {i + 1} ({direction}); "
                    "re-initialize the iterate"
                )
            slope = gamma / den**2
            lin[len(li), above_idx] = slope
            offset.append(-1.0 / den - slope * above_ref)
            li.append(l_index(0))
            pi.append(p_index(i))
            a.append(bits_of(t) / bw)
            snr.append(gamma)
    links = _Links(li, pi, a, snr)
    caps = np.array([layout.p_dl(i) for i in range(k)], dtype=int)
    names = ("latency",) + tuple(f"rel_ul[{i + 1}]" for i in offloaded) + tuple(
        f"rel_dl[{i + 1}]" for i in offloaded
    ) + tuple(f"cap_dl[{i + 1}]" for i in offloaded)
    return _stacked_subproblem(layout, s, scenario, decision, opts, lat_row, floor,
                               links, np.asarray(offset), lin, caps, names)


# ------------------------------------------------------------------ driver


def _exact_energy(scenario: Scenario, layout: _Layout, z) -> float:
    k = layout.k
    ul = z[2 * k:2 * k + layout.n_slots]
    if layout.mode is Mode.SC:
        transmit = float(np.sum(z[:k])) * float(ul[0])
    else:
        transmit = float(z[:k] @ ul)
    return transmit


def _polish_downlink(scenario: Scenario, decision: Decision, alloc: Allocation) -> Allocation:
    # downlink powers do not enter the energy; pin them to their minimum
    p = scenario.params
    tasks = [scenario.graph.tasks[i] for i in decision.offloaded_set]
    cs = _thresholds(scenario, decision)
    if alloc.mode is Mode.TD:
        p_dl = tuple(
            required_snr(t.bits_out, l, p.bw_dl) / (p.snr_dl * c)
            for t, l, c in zip(tasks, alloc.l_dl, cs)
        )
    else:
        p_dl = tuple(min_powers_sc([t.bits_out for t in tasks], cs, alloc.l_dl[0],
                                   p.bw_dl, p.snr_dl))
    if any(a > b for a, b in zip(p_dl, alloc.p_dl)):
        return alloc
    polished = Allocation(alloc.mode, alloc.p_ul, p_dl, alloc.l_ul, alloc.l_dl)
    return polished if evaluate(scenario, decision, polished).feasible else alloc


def sca_solve(
    scenario: Scenario,
    decision: Decision,
    mode: Mode | str,
    opts: ScaOptions | None = None,
    start: Allocation | None = None,
) -> ScaResult:
    """Run the SCA loop for one offloading decision.

    Returns an infeasible result (``allocation is None``) when no feasible
    starting point exists for this decision and mode.
    """
    opts = opts or ScaOptions()
    mode = Mode(mode)
    local = scenario.local_energy(decision)
    alloc0 = start if start is not None else initial_feasible_point(scenario, decision, mode)
    if alloc0 is None:
        return ScaResult(None, math.inf, False, 0)
    k = len(decision.offloaded_set)
    if k == 0:
        return ScaResult(alloc0, local, True, 0, [local])

    layout = _Layout(mode, k)
    build = build_td_subproblem if mode is Mode.TD else build_sc_subproblem
    state = ScaState(np.asarray(alloc0.as_vector(), float), 0, opts.lambda0,
                     [local + _exact_energy(scenario, layout, np.asarray(alloc0.as_vector()))])
    converged = False
    while state.t < opts.max_outer_iterations:
        s = state.iterate
        problem = build(scenario, decision, s, opts)
        start_point = s
        if problem.max_violation(s) >= 0 or np.any(s <= 0):
            found = kernel.find_strictly_feasible(problem, s, opts.kernel)
            if not found.feasible:
                log.debug("surrogate has no strictly feasible point at t=%d", state.t)
                break
            start_point = found.x
        res = kernel.solve(problem, start_point, opts.kernel)
        target = res.x
        direction = target - s
        # per-coordinate, so huge powers do not mask slot movement
        change = float(np.max(np.abs(direction) / np.maximum(np.abs(s), 1e-12)))

        energy_now = state.energy_history[-1]
        lam = state.step
        accepted = None
        while lam >= opts.min_step:
            trial = s + lam * direction
            if np.all(trial >= 0):
                e_trial = local + _exact_energy(scenario, layout, trial)
                if e_trial <= energy_now + 1e-12 * max(1.0, abs(energy_now)):
                    rep = evaluate(scenario, decision, layout.to_allocation(trial), atol=0.0)
                    if rep.feasible:
                        accepted = (trial, e_trial)
                        break
            lam *= 0.5
        state.t += 1
        state.step = state.step * (1.0 - opts.epsilon * state.step)
        if accepted is None:
            converged = res.converged and change < opts.iterate_tolerance
            break
        trial, e_trial = accepted
        rel_energy = abs(energy_now - e_trial) / max(abs(energy_now), 1e-12)
        state.iterate = trial
        state.energy_history.append(e_trial)
        if change < opts.iterate_tolerance and rel_energy < opts.energy_tolerance:
            converged = True
            break

    alloc = _polish_downlink(scenario, decision, layout.to_allocation(state.iterate))
    report = evaluate(scenario, decision, alloc)
    if not report.feasible:
        return ScaResult(None, math.inf, False, state.t, state.energy_history)
    return ScaResult(alloc, report.energy, converged, state.t, state.energy_history)
