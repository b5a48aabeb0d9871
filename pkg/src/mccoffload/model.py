"""Application and system data model, and exact evaluation of candidate solutions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
import math
from typing import Sequence

from .channel import LinkParams, ScLayerStack, success_prob_sc, success_prob_td

__all__ = [
    "ValidationError",
    "Mode",
    "TaskSpec",
    "CallGraph",
    "ServiceReliability",
    "SystemParams",
    "Scenario",
    "Decision",
    "Allocation",
    "EvalReport",
    "CompoundHypergraph",
    "build_scenario",
    "build_compound_hypergraph",
    "evaluate",
]


class ValidationError(ValueError):
    """Invalid model input. ``field`` names the offending entry when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class Mode(str, Enum):
    TD = "td"
    SC = "sc"


@dataclass(frozen=True)
class TaskSpec:
    cycles: float
    bits_in: float
    bits_out: float

    def __post_init__(self) -> None:
        if not self.cycles > 0:
            raise ValidationError(f"cycles must be > 0, got {self.cycles!r}", "cycles")
        if self.bits_in < 0:
            raise ValidationError(f"bits_in must be >= 0, got {self.bits_in!r}", "bits_in")
        if self.bits_out < 0:
            raise ValidationError(f"bits_out must be >= 0, got {self.bits_out!r}", "bits_out")


@dataclass(frozen=True)
class CallGraph:
    """Map-reduce call graph: the parallel tasks, in service-level order."""

    tasks: tuple[TaskSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ValidationError("a call graph needs at least one task", "tasks")

    def __len__(self) -> int:
        return len(self.tasks)


@dataclass(frozen=True)
class ServiceReliability:
    """Per-level targets r_i and the conditional targets r~_i = r_i / r_{i-1}."""

    targets: tuple[float, ...]
    conditional: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        targets = tuple(float(r) for r in self.targets)
        object.__setattr__(self, "targets", targets)
        for i, r in enumerate(targets, start=1):
            if not 0.0 < r <= 1.0:
                raise ValidationError(
                    f"reliability[{i}] = {r!r} must lie in (0, 1]", f"reliability[{i}]"
                )
            if i > 1 and r > targets[i - 2]:
                raise ValidationError(
                    f"reliability targets must be non-increasing: reliability[{i}] = {r!r} "
                    f"exceeds reliability[{i - 1}] = {targets[i - 2]!r}",
                    f"reliability[{i}]",
                )
        conditional = targets[:1] + tuple(
            targets[i] / targets[i - 1] for i in range(1, len(targets))
        )
        object.__setattr__(self, "conditional", conditional)

    def __len__(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class SystemParams:
    """Device, cloud and radio parameters.

    ``snr_ul``/``snr_dl`` are linear average SNRs at 1 W transmit power.
    ``sc_latency`` selects how the shared superposition slots enter the latency
    budget: ``"once"`` (wall-clock time of the two slots) or ``"literal"``
    (``L^I + L^O`` summed once per offloaded task).
    """

    f_mobile: float = 1e9
    f_cloud: float = 1e10
    p_mobile_compute: float = 0.4
    bw_ul: float = 1e6
    bw_dl: float = 1e6
    snr_ul: float = 1.0
    snr_dl: float = 1.0
    diversity: int = 1
    p_max_dl: float = 10.0
    latency_max: float = 1.0
    sc_latency: str = "once"

    def __post_init__(self) -> None:
        for name in (
            "f_mobile", "f_cloud", "p_mobile_compute", "bw_ul", "bw_dl",
            "snr_ul", "snr_dl", "p_max_dl", "latency_max",
        ):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be a finite number > 0, got {value!r}", name)
        if int(self.diversity) != self.diversity or self.diversity < 1:
            raise ValidationError(
                f"diversity must be an integer >= 1, got {self.diversity!r}", "diversity"
            )
        object.__setattr__(self, "diversity", int(self.diversity))
        if self.sc_latency not in ("once", "literal"):
            raise ValidationError(
                f"sc_latency must be 'once' or 'literal', got {self.sc_latency!r}", "sc_latency"
            )


@dataclass(frozen=True)
class Scenario:
    graph: CallGraph
    reliability: ServiceReliability
    params: SystemParams

    def __post_init__(self) -> None:
        if len(self.reliability) != len(self.graph):
            raise ValidationError(
                f"{len(self.reliability)} reliability targets for {len(self.graph)} tasks",
                "reliability",
            )

    @property
    def n_tasks(self) -> int:
        return len(self.graph)

    def with_params(self, **changes) -> Scenario:
        return replace(self, params=replace(self.params, **changes))

    def compute_floor(self, decision: Decision) -> float:
        """Latency spent computing: cloud time for offloaded tasks, local time otherwise."""
        p = self.params
        return sum(
            t.cycles / p.f_cloud if bit else t.cycles / p.f_mobile
            for t, bit in zip(self.graph.tasks, decision.offload)
        )

    def local_energy(self, decision: Decision) -> float:
        p = self.params
        return sum(
            t.cycles / p.f_mobile * p.p_mobile_compute
            for t, bit in zip(self.graph.tasks, decision.offload)
            if not bit
        )


def build_scenario(
    graph: CallGraph, targets: Sequence[float], params: SystemParams
) -> Scenario:
    return Scenario(graph, ServiceReliability(tuple(targets)), params)


@dataclass(frozen=True)
class Decision:
    offload: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.offload)
        if any(b not in (0, 1) for b in bits):
            raise ValidationError(f"offload bits must be 0 or 1, got {self.offload!r}", "offload")
        object.__setattr__(self, "offload", bits)

    @property
    def offloaded_set(self) -> tuple[int, ...]:
        """0-based indices of the offloaded tasks, increasing."""
        return tuple(i for i, b in enumerate(self.offload) if b)

    def bitstring(self) -> str:
        return "".join(str(b) for b in self.offload)

    def __len__(self) -> int:
        return len(self.offload)


@dataclass(frozen=True)
class Allocation:
    """Powers and slot durations for the offloaded tasks.

    Entries are aligned with ``Decision.offloaded_set``. Under SC, ``l_ul`` and
    ``l_dl`` hold one shared slot each.
    """

    mode: Mode
    p_ul: tuple[float, ...] = ()
    p_dl: tuple[float, ...] = ()
    l_ul: tuple[float, ...] = ()
    l_dl: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("p_ul", "p_dl", "l_ul", "l_dl"):
            values = tuple(float(v) for v in getattr(self, name))
            if any(not v >= 0 for v in values):
                raise ValidationError(f"{name} entries must be >= 0, got {values!r}", name)
            object.__setattr__(self, name, values)
        if len(self.p_ul) != len(self.p_dl):
            raise ValidationError("p_ul and p_dl differ in length", "p_ul")
        if self.mode is Mode.SC:
            n_slots = 1 if self.p_ul else 0
            if len(self.l_ul) != n_slots or len(self.l_dl) != n_slots:
                raise ValidationError(
                    "SC allocations carry exactly one shared uplink and downlink slot", "l_ul"
                )
        elif not (len(self.l_ul) == len(self.l_dl) == len(self.p_ul)):
            raise ValidationError("TD allocations need one slot pair per offloaded task", "l_ul")

    @classmethod
    def empty(cls, mode: Mode | str) -> Allocation:
        return cls(Mode(mode))

    def __len__(self) -> int:
        return len(self.p_ul)

    def slots(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """Per-task (uplink, downlink) slot durations, expanding the shared SC slots."""
        if self.mode is Mode.SC:
            n = len(self.p_ul)
            return self.l_ul * n, self.l_dl * n
        return self.l_ul, self.l_dl

    def as_vector(self) -> list[float]:
        return [*self.p_ul, *self.p_dl, *self.l_ul, *self.l_dl]


@dataclass(frozen=True)
class EvalReport:
    """Exact evaluation of a (decision, allocation) pair.

    ``violations`` maps constraint names to signed slack (``>= 0`` means satisfied).
    """

    energy: float
    latency: float
    rho_ul: tuple[float, ...]
    rho_dl: tuple[float, ...]
    sl_prob: tuple[float, ...]
    feasible: bool
    violations: dict[str, float]

    @property
    def min_slack(self) -> float:
        return min(self.violations.values(), default=math.inf)


@dataclass(frozen=True)
class CompoundHypergraph:
    """Call graph with the output task replicated once per service level.

    ``hyperedges[i]`` is ``(task, tail, label)``: task ``i`` feeds service
    levels ``i..N`` (0-based) with ``bits_out`` bits.
    """

    n_tasks: int
    input_edges: tuple[tuple[str, int, float], ...]
    output_nodes: tuple[str, ...]
    hyperedges: tuple[tuple[int, tuple[str, ...], float], ...]


def build_compound_hypergraph(graph: CallGraph) -> CompoundHypergraph:
    n = len(graph)
    outputs = tuple(f"SL({j + 1})" for j in range(n))
    return CompoundHypergraph(
        n_tasks=n,
        input_edges=tuple(("input", i, t.bits_in) for i, t in enumerate(graph.tasks)),
        output_nodes=outputs,
        hyperedges=tuple((i, outputs[i:], t.bits_out) for i, t in enumerate(graph.tasks)),
    )


def offloaded_latency_slots(scenario: Scenario, alloc: Allocation) -> float:
    """Communication time charged to the latency budget."""
    if not len(alloc):
        return 0.0
    if alloc.mode is Mode.SC and scenario.params.sc_latency == "once":
        return alloc.l_ul[0] + alloc.l_dl[0]
    ul, dl = alloc.slots()
    return sum(ul) + sum(dl)


def _link_probabilities(
    scenario: Scenario, decision: Decision, alloc: Allocation
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    p = scenario.params
    tasks = [scenario.graph.tasks[i] for i in decision.offloaded_set]
    if not tasks:
        return (), ()
    if alloc.mode is Mode.TD:
        rho_ul = tuple(
            success_prob_td(LinkParams(t.bits_in, l, p.bw_ul, p.snr_ul, p.diversity), pw)
            for t, l, pw in zip(tasks, alloc.l_ul, alloc.p_ul)
        )
        rho_dl = tuple(
            success_prob_td(LinkParams(t.bits_out, l, p.bw_dl, p.snr_dl, p.diversity), pw)
            for t, l, pw in zip(tasks, alloc.l_dl, alloc.p_dl)
        )
        return rho_ul, rho_dl
    up = ScLayerStack(alloc.p_ul, tuple(t.bits_in for t in tasks), alloc.l_ul[0],
                      p.bw_ul, p.snr_ul, p.diversity)
    down = ScLayerStack(alloc.p_dl, tuple(t.bits_out for t in tasks), alloc.l_dl[0],
                        p.bw_dl, p.snr_dl, p.diversity)
    return (
        tuple(success_prob_sc(up, k) for k in range(len(tasks))),
        tuple(success_prob_sc(down, k) for k in range(len(tasks))),
    )


def evaluate(
    scenario: Scenario, decision: Decision, alloc: Allocation, atol: float = 1e-9
) -> EvalReport:
    """Energy, latency and reliability of a candidate, with exact closed-form probabilities.

    A constraint counts as satisfied when its slack is ``>= -atol``.
    """
    if len(decision) != scenario.n_tasks:
        raise ValidationError(
            f"decision has {len(decision)} entries for {scenario.n_tasks} tasks", "offload"
        )
    offloaded = decision.offloaded_set
    if len(alloc) != len(offloaded):
        raise ValidationError(
            f"allocation covers {len(alloc)} tasks but {len(offloaded)} are offloaded", "p_ul"
        )
    p = scenario.params
    ul_slots, _ = alloc.slots()
    energy = scenario.local_energy(decision) + sum(
        pw * l for pw, l in zip(alloc.p_ul, ul_slots)
    )
    latency = scenario.compute_floor(decision) + offloaded_latency_slots(scenario, alloc)
    rho_ul, rho_dl = _link_probabilities(scenario, decision, alloc)

    violations = {"latency": p.latency_max - latency}
    for k, i in enumerate(offloaded):
        need = math.sqrt(scenario.reliability.conditional[i])
        violations[f"rho_ul[{i + 1}]"] = rho_ul[k] - need
        violations[f"rho_dl[{i + 1}]"] = rho_dl[k] - need
        violations[f"p_dl[{i + 1}]"] = p.p_max_dl - alloc.p_dl[k]

    factor = {i: rho_ul[k] * rho_dl[k] for k, i in enumerate(offloaded)}
    sl_prob = []
    acc = 1.0
    for i in range(scenario.n_tasks):
        acc *= factor.get(i, 1.0)
        sl_prob.append(acc)

    feasible = all(s >= -atol for s in violations.values())
    return EvalReport(
        energy=energy,
        latency=latency,
        rho_ul=rho_ul,
        rho_dl=rho_dl,
        sl_prob=tuple(sl_prob),
        feasible=feasible,
        violations=violations,
    )
