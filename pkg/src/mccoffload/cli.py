"""Command-line front end: ``sweep``, ``plan`` and ``validate-channel``.

Exit codes: 0 success, 2 validation or usage error, 3 runtime failure
(including a failed channel validation and an unwritable output path).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass
from typing import Sequence

from .channel import (
    LinkParams,
    ScLayerStack,
    mc_estimate_sc,
    mc_estimate_td,
    success_prob_sc,
    success_prob_td,
)
from .config import ConfigError, LoadedConfig, load_config
from .model import Allocation, Decision, Mode, Scenario, ValidationError
from .planner import OPTIMAL, Solution, sweep

__all__ = [
    "EXIT_OK",
    "EXIT_VALIDATION",
    "EXIT_RUNTIME",
    "MIN_SAMPLES",
    "GridError",
    "parse_grid",
    "csv_columns",
    "solution_row",
    "format_csv",
    "read_records",
    "ChannelCheck",
    "channel_checks",
    "main",
]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
MIN_SAMPLES = 10_000
FLOAT_FMT = "%.12g"


class GridError(ValueError):
    pass


class _UsageError(Exception):
    pass


# ----------------------------------------------------------------- grids


def parse_grid(spec: str) -> list[float]:
    """``START:STOP:STEP`` (stop included within half a step) or a single value."""
    spec = spec.strip()
    if not spec:
        raise GridError("empty grid spec")
    parts = spec.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise GridError(f"invalid grid spec {spec!r}") from None
    if not all(math.isfinite(v) for v in values):
        raise GridError(f"grid values must be finite: {spec!r}")
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise GridError(f"grid spec must be VALUE or START:STOP:STEP, got {spec!r}")
    start, stop, step = values
    if not step > 0:
        raise GridError("grid step must be > 0")
    if stop < start - 0.5 * step:
        raise GridError(f"grid stop {stop} precedes start {start}")
    count = int(math.floor((stop - start) / step + 0.5)) + 1
    # round away accumulation noise so CSV values read as typed
    return [float(FLOAT_FMT % (start + i * step)) for i in range(count)]


# ------------------------------------------------------------------- CSV


def csv_columns(n_tasks: int) -> list[str]:
    cols = ["l_max", "mode", "status", "energy_joules", "decision_bitstring", "latency_used"]
    for i in range(1, n_tasks + 1):
        cols += [f"p_ul_{i}", f"p_dl_{i}", f"l_ul_{i}", f"l_dl_{i}"]
    cols += [f"sl_prob_{i}" for i in range(1, n_tasks + 1)]
    return cols


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def solution_row(l_max: float, sol: Solution, n_tasks: int) -> list[str]:
    """One CSV record. Locally computed tasks carry zero powers and slots."""
    row = [_fmt(l_max), sol.mode.value, sol.status]
    if sol.status != OPTIMAL:
        return row + [""] * (len(csv_columns(n_tasks)) - len(row))
    rep = sol.report
    row += [_fmt(sol.energy), sol.decision.bitstring(), _fmt(rep.latency)]
    per_task = [[0.0] * 4 for _ in range(n_tasks)]
    l_ul, l_dl = sol.allocation.slots()
    for j, i in enumerate(sol.decision.offloaded_set):
        per_task[i] = [sol.allocation.p_ul[j], sol.allocation.p_dl[j], l_ul[j], l_dl[j]]
    for vals in per_task:
        row += [_fmt(v) for v in vals]
    row += [_fmt(v) for v in rep.sl_prob]
    return row


def format_csv(axis: Sequence[float], solutions: dict[Mode, Sequence[Solution]],
               n_tasks: int) -> str:
    """CSV text ordered by grid point, then mode (TD before SC)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(n_tasks))
    modes = [m for m in (Mode.TD, Mode.SC) if m in solutions]
    for i, l_max in enumerate(axis):
        for m in modes:
            w.writerow(solution_row(l_max, solutions[m][i], n_tasks))
    return buf.getvalue()


@dataclass(frozen=True)
class Record:
    l_max: float
    mode: Mode
    status: str
    energy: float
    decision: Decision | None
    allocation: Allocation | None
    latency_used: float
    sl_prob: tuple[float, ...]


def read_records(text: str, n_tasks: int) -> list[Record]:
    """Parse CSV written by :func:`format_csv` back into decisions and allocations."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        mode = Mode(row["mode"])
        if row["status"] != OPTIMAL:
            out.append(Record(float(row["l_max"]), mode, row["status"], math.inf,
                              None, None, math.nan, ()))
            continue
        dec = Decision(tuple(int(c) for c in row["decision_bitstring"]))
        vals = {c: [float(row[f"{c}_{i + 1}"]) for i in dec.offloaded_set]
                for c in ("p_ul", "p_dl", "l_ul", "l_dl")}
        if mode is Mode.SC and dec.offloaded_set:
            vals["l_ul"], vals["l_dl"] = vals["l_ul"][:1], vals["l_dl"][:1]
        alloc = Allocation(mode, tuple(vals["p_ul"]), tuple(vals["p_dl"]),
                           tuple(vals["l_ul"]), tuple(vals["l_dl"]))
        out.append(Record(
            float(row["l_max"]), mode, row["status"], float(row["energy_joules"]), dec, alloc,
            float(row["latency_used"]),
            tuple(float(row[f"sl_prob_{i}"]) for i in range(1, n_tasks + 1)),
        ))
    return out


# ------------------------------------------------------ channel validation

DIVERSITIES = (1, 2, 3)
SNR_POWER = (0.5, 1.0, 2.0)
RATES = (0.07, 0.14, 0.28)
# layer powers in units of 1/snr, top layer last
SC_STACKS = ((2.0, 1.0), (0.1, 1.0), (4.0, 2.0, 1.0), (6.0, 1.5, 0.5))


@dataclass(frozen=True)
class ChannelCheck:
    label: str
    closed_form: float
    estimate: float
    std_error: float
    samples: int

    @property
    def null_error(self) -> float:
        """Standard error of the estimate if the closed form is the true probability."""
        p = self.closed_form
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.samples)

    @property
    def passed(self) -> bool:
        # the sample error is 0 when no draw fails, so never test tighter than the null error
        se = max(self.std_error, self.null_error)
        return abs(self.closed_form - self.estimate) <= 3.0 * se + 1e-12


def channel_checks(scenario: Scenario, samples: int, seed: int = 0) -> list[ChannelCheck]:
    """Closed-form success probabilities against Monte Carlo on a built-in grid.

    The grid is expressed as received SNR and spectral efficiency, so it is
    mapped onto each direction's bandwidth and SNR from ``scenario``.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}, got {samples}")
    p = scenario.params
    checks = []
    diversities = sorted(set(DIVERSITIES) | {p.diversity})
    idx = 0
    for direction, bw, snr in (("ul", p.bw_ul, p.snr_ul), ("dl", p.bw_dl, p.snr_dl)):
        for d in diversities:
            for gp in SNR_POWER:
                for rate in RATES:
                    link = LinkParams(bits=rate * bw, slot=1.0, bw=bw, snr=snr, diversity=d)
                    est, se = mc_estimate_td(link, gp / snr, samples, seed=seed + idx)
                    idx += 1
                    checks.append(ChannelCheck(
                        f"td {direction} d={d} snr*P={gp:g} rate={rate:g}",
                        success_prob_td(link, gp / snr), est, se, samples))
            for powers in SC_STACKS:
                for rate in RATES[:2]:
                    stack = ScLayerStack(tuple(q / snr for q in powers),
                                         tuple(rate * bw for _ in powers), 1.0, bw, snr, d)
                    for layer in range(len(powers)):
                        est, se = mc_estimate_sc(stack, layer, samples, seed=seed + idx)
                        idx += 1
                        checks.append(ChannelCheck(
                            f"sc {direction} d={d} snr*P={'/'.join(f'{q:g}' for q in powers)} "
                            f"rate={rate:g} layer={layer + 1}",
                            success_prob_sc(stack, layer), est, se, samples))
    return checks


# ------------------------------------------------------------------ main


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mccoffload", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_seed=True):
        p.add_argument("--config", required=True, help="YAML scenario file")
        if with_seed:
            p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
        p.add_argument("--out", help="write the CSV here instead of standard output")

    s = sub.add_parser("sweep", help="energy versus latency over an L_max grid")
    common(s)
    s.add_argument("--mode", choices=("td", "sc", "both"), default="both")
    s.add_argument("--lmax", required=True, help="START:STOP:STEP or VALUE (seconds)")
    s.add_argument("--restarts", type=int, default=3, help="SCA starts per decision")

    p = sub.add_parser("plan", help="optimal decision for one L_max")
    common(p)
    p.add_argument("--mode", choices=("td", "sc", "both"), default="both")
    p.add_argument("--lmax", help="VALUE in seconds (default: the config's latency_max)")
    p.add_argument("--restarts", type=int, default=3, help="SCA starts per decision")

    v = sub.add_parser("validate-channel", help="closed forms against Monte Carlo")
    common(v)
    v.add_argument("--samples", type=int, default=1_000_000,
                   help=f"draws per point (>= {MIN_SAMPLES})")
    return ap


def _modes(flag: str) -> list[Mode]:
    return [Mode.TD, Mode.SC] if flag == "both" else [Mode(flag)]


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _check_writable(path: str) -> None:
    # fail before a long sweep rather than after it
    folder = os.path.dirname(os.path.abspath(path))
    if os.path.isdir(path) or not os.path.isdir(folder) or not os.access(folder, os.W_OK):
        raise OSError(f"cannot write output file {path!r}")
    if os.path.exists(path) and not os.access(path, os.W_OK):
        raise OSError(f"cannot write output file {path!r}")


def _summary(axis, solutions) -> str:
    lines = []
    for i, l_max in enumerate(axis):
        for m in (Mode.TD, Mode.SC):
            if m not in solutions:
                continue
            sol = solutions[m][i]
            if sol.found:
                lines.append(f"l_max={_fmt(l_max)} mode={m.value} decision={sol.decision.bitstring()} "
                             f"energy={_fmt(sol.energy)} J")
            else:
                lines.append(f"l_max={_fmt(l_max)} mode={m.value} infeasible")
    return "\n".join(lines) + "\n"


def _run_sweep(cfg: LoadedConfig, axis, modes, args) -> int:
    if args.restarts < 1:
        raise _UsageError("--restarts must be >= 1")
    res = sweep(cfg.scenario, modes, axis, cfg.solver, args.restarts, args.seed)
    text = format_csv(res.axis, res.solutions, cfg.scenario.n_tasks)
    _emit(text, args.out)
    # keep standard output pure CSV when no file is given
    (sys.stderr if args.out is None else sys.stdout).write(_summary(res.axis, res.solutions))
    return EXIT_OK


def _run_validate(cfg: LoadedConfig, args) -> int:
    if args.samples < MIN_SAMPLES:
        raise _UsageError(f"--samples must be >= {MIN_SAMPLES}, got {args.samples}")
    checks = channel_checks(cfg.scenario, args.samples, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point", "closed_form", "estimate", "std_error", "result"])
    for c in checks:
        w.writerow([c.label, _fmt(c.closed_form), _fmt(c.estimate), _fmt(c.std_error),
                    "pass" if c.passed else "FAIL"])
    _emit(buf.getvalue(), args.out)
    failed = sum(not c.passed for c in checks)
    sys.stderr.write(f"{len(checks) - failed}/{len(checks)} points within 3 standard errors\n")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            _check_writable(args.out)
        if args.command == "validate-channel":
            return _run_validate(cfg, args)
        if args.command == "sweep":
            axis = parse_grid(args.lmax)
        else:
            if args.lmax is None:
                axis = [cfg.scenario.params.latency_max]
            else:
                axis = parse_grid(args.lmax)
                if len(axis) != 1:
                    raise _UsageError("plan takes a single --lmax VALUE")
        for x in axis:
            if not x > 0:
                raise _UsageError(f"L_max must be > 0, got {x:g}")
        return _run_sweep(cfg, axis, _modes(args.mode), args)
    except (ConfigError, ValidationError, GridError, _UsageError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failure
        sys.stderr.write(f"runtime failure: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
