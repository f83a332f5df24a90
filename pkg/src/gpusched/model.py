"""Domain types for CPU-memory-GPU task systems.

All durations are exact rationals measured in microseconds.  Floating point
is never used in the analyses; taskset files store integer microseconds so
round-trips are lossless.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional

Duration = Fraction

# Measured upper bound on the interleaved execution ratio of any kernel.
MAX_INTERLEAVE_RATIO = Fraction(18, 10)


class MemModel(str, Enum):
    """How memory copies are arranged around each GPU kernel."""

    TWO_COPY = "two_copy"  # host-to-device copy before and device-to-host copy after
    ONE_COPY = "one_copy"  # single combined copy before the kernel


class AnalysisMethod(str, Enum):
    RTGPU = "rtgpu"
    SELF_SUSPENSION = "selfsusp"
    BUSY_WAITING = "busywait"


class TasksetFormatError(ValueError):
    """Raised when a taskset file cannot be parsed; names the offending field."""


@dataclass(frozen=True)
class ExecBounds:
    """Lower/upper bound on a segment duration."""

    lo: Fraction
    hi: Fraction

    @classmethod
    def exact(cls, value) -> "ExecBounds":
        v = Fraction(value)
        return cls(v, v)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo


@dataclass(frozen=True)
class GpuKernelModel:
    """Timing model of one GPU kernel.

    ``work`` bounds the total execution time on a single SM in isolation,
    ``critical_path_overhead`` is the sequential launch overhead, and
    ``interleave_ratio`` is the worst-case inflation when the kernel
    self-interleaves on its dedicated SMs.
    """

    work: ExecBounds
    critical_path_overhead: Fraction
    interleave_ratio: Fraction


@dataclass(frozen=True)
class TaskSpec:
    """One sporadic task: alternating CPU, memory-copy, and GPU segments.

    With ``m`` CPU segments the task has ``m - 1`` GPU segments and either
    ``2m - 2`` (two-copy) or ``m - 1`` (one-copy) memory segments.
    """

    id: str
    cpu_segments: tuple[ExecBounds, ...]
    mem_segments: tuple[ExecBounds, ...]
    gpu_segments: tuple[GpuKernelModel, ...]
    deadline: Fraction
    period: Fraction
    priority: int

    @property
    def n_subtasks(self) -> int:
        return len(self.cpu_segments)

    @property
    def is_pure_cpu(self) -> bool:
        return self.n_subtasks == 1


@dataclass(frozen=True)
class PlatformConfig:
    physical_sms: int
    launch_overhead_frac: Fraction = Fraction(12, 100)


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple[TaskSpec, ...]
    mem_model: MemModel
    platform: PlatformConfig

    def by_priority(self) -> tuple[TaskSpec, ...]:
        return tuple(sorted(self.tasks, key=lambda t: t.priority))


@dataclass
class SmAllocation:
    """Dedicated virtual-SM counts per task under federated scheduling.

    Counts are virtual SMs (always twice a physical-SM count); pure-CPU
    tasks get zero.
    """

    per_task_virtual_sms: dict[str, int]

    def virtual_sms(self, task_id: str) -> int:
        return self.per_task_virtual_sms.get(task_id, 0)

    def total_physical(self) -> int:
        return sum(v // 2 for v in self.per_task_virtual_sms.values())


@dataclass
class TaskReport:
    """Per-task response-time bounds; ``None`` marks an unschedulable entry."""

    gpu_r: tuple[ExecBounds, ...] = ()
    mem_r_up: tuple[Optional[Fraction], ...] = ()
    cpu_r_up: tuple[Optional[Fraction], ...] = ()
    end_to_end_up: Optional[Fraction] = None


@dataclass
class AnalysisReport:
    schedulable: bool
    method: AnalysisMethod
    allocation: Optional[SmAllocation] = None
    per_task: dict[str, TaskReport] = field(default_factory=dict)


def expected_mem_count(m: int, mem_model: MemModel) -> int:
    if m <= 1:
        return 0
    if mem_model is MemModel.TWO_COPY:
        return 2 * m - 2
    return m - 1


def validate_taskset(ts: TaskSet) -> list[str]:
    """Check every structural invariant; violations are data, not errors."""
    out: list[str] = []

    def bad(task_id: str, field_name: str, rule: str) -> None:
        out.append(f"task {task_id}: {field_name}: {rule}")

    plat = ts.platform
    if plat.physical_sms < 1:
        out.append("platform: physical_sms: must be >= 1")
    if not (0 <= plat.launch_overhead_frac < 1):
        out.append("platform: launch_overhead_frac: must be in [0, 1)")

    prios = sorted(t.priority for t in ts.tasks)
    if prios != list(range(1, len(ts.tasks) + 1)):
        out.append("taskset: priorities not a permutation of 1..n")

    seen_ids = set()
    for t in ts.tasks:
        if t.id in seen_ids:
            bad(t.id, "id", "duplicate task id")
        seen_ids.add(t.id)

        m = t.n_subtasks
        if m < 1:
            bad(t.id, "cpu_segments", "at least one CPU segment required")
            continue
        if not (0 < t.deadline <= t.period):
            bad(t.id, "deadline", "must satisfy 0 < deadline <= period")

        want_mem = expected_mem_count(m, ts.mem_model)
        if len(t.mem_segments) != want_mem:
            bad(t.id, "mem_segments", f"mem segment count != {want_mem} "
                f"for {ts.mem_model.value} with m={m}")
        if len(t.gpu_segments) != m - 1:
            bad(t.id, "gpu_segments", f"gpu segment count != {m - 1}")

        for name, segs in (("cpu_segments", t.cpu_segments),
                           ("mem_segments", t.mem_segments)):
            for j, b in enumerate(segs):
                if not (0 <= b.lo <= b.hi):
                    bad(t.id, f"{name}[{j}]", "requires 0 <= lo <= hi")
        for j, g in enumerate(t.gpu_segments):
            if not (0 <= g.work.lo <= g.work.hi):
                bad(t.id, f"gpu_segments[{j}].work", "requires 0 <= lo <= hi")
            if not (1 <= g.interleave_ratio <= MAX_INTERLEAVE_RATIO):
                bad(t.id, f"gpu_segments[{j}].interleave_ratio",
                    "must be in [1.0, 1.8]")
            if not (0 <= g.critical_path_overhead <= g.work.lo):
                bad(t.id, f"gpu_segments[{j}].critical_path_overhead",
                    "must be in [0, work.lo]")
    return out


# ---------------------------------------------------------------------------
# Serialization.  Durations are integer microseconds; the interleave ratio is
# stored in integer percent (100..180).  Field names are frozen here and in
# the README.
# ---------------------------------------------------------------------------

def _need(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise TasksetFormatError(f"{ctx}: missing field '{key}'")
    return obj[key]


def _int_us(value, ctx: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TasksetFormatError(f"{ctx}: expected integer microseconds, got {value!r}")
    if value < 0:
        raise TasksetFormatError(f"{ctx}: negative duration {value}")
    return Fraction(value)


def _bounds_from_json(value, ctx: str) -> ExecBounds:
    if not (isinstance(value, list) and len(value) == 2):
        raise TasksetFormatError(f"{ctx}: expected [lo, hi] pair, got {value!r}")
    return ExecBounds(_int_us(value[0], ctx + "[0]"), _int_us(value[1], ctx + "[1]"))


def _as_int_us(d: Fraction, ctx: str) -> int:
    if d.denominator != 1:
        raise TasksetFormatError(f"{ctx}: duration {d} is not an integer microsecond count")
    return int(d)


def taskset_to_dict(ts: TaskSet) -> dict:
    tasks = []
    for t in ts.tasks:
        tasks.append({
            "id": t.id,
            "priority": t.priority,
            "deadline_us": _as_int_us(t.deadline, f"task {t.id}: deadline"),
            "period_us": _as_int_us(t.period, f"task {t.id}: period"),
            "cpu_segments_us": [[_as_int_us(b.lo, "cpu lo"), _as_int_us(b.hi, "cpu hi")]
                                for b in t.cpu_segments],
            "mem_segments_us": [[_as_int_us(b.lo, "mem lo"), _as_int_us(b.hi, "mem hi")]
                                for b in t.mem_segments],
            "gpu_segments": [{
                "work_us": [_as_int_us(g.work.lo, "gpu work lo"),
                            _as_int_us(g.work.hi, "gpu work hi")],
                "critical_path_overhead_us": _as_int_us(
                    g.critical_path_overhead, "gpu overhead"),
                "interleave_ratio_pct": int(g.interleave_ratio * 100),
            } for g in t.gpu_segments],
        })
    eps = ts.platform.launch_overhead_frac
    return {
        "mem_model": ts.mem_model.value,
        "platform": {
            "physical_sms": ts.platform.physical_sms,
            "launch_overhead_pct": int(eps * 100),
        },
        "tasks": tasks,
    }


def taskset_from_dict(data: dict) -> TaskSet:
    if not isinstance(data, dict):
        raise TasksetFormatError("top level: expected a JSON object")
    mm_raw = _need(data, "mem_model", "top level")
    try:
        mem_model = MemModel(mm_raw)
    except ValueError:
        raise TasksetFormatError(f"mem_model: unknown value {mm_raw!r}") from None

    plat_raw = _need(data, "platform", "top level")
    sms = _need(plat_raw, "physical_sms", "platform")
    if isinstance(sms, bool) or not isinstance(sms, int):
        raise TasksetFormatError(f"platform.physical_sms: expected integer, got {sms!r}")
    pct = _need(plat_raw, "launch_overhead_pct", "platform")
    if isinstance(pct, bool) or not isinstance(pct, int):
        raise TasksetFormatError(
            f"platform.launch_overhead_pct: expected integer percent, got {pct!r}")
    platform = PlatformConfig(sms, Fraction(pct, 100))

    tasks = []
    raw_tasks = _need(data, "tasks", "top level")
    if not isinstance(raw_tasks, list):
        raise TasksetFormatError("tasks: expected a list")
    for idx, raw in enumerate(raw_tasks):
        ctx = f"tasks[{idx}]"
        tid = _need(raw, "id", ctx)
        prio = _need(raw, "priority", ctx)
        if isinstance(prio, bool) or not isinstance(prio, int):
            raise TasksetFormatError(f"{ctx}.priority: expected integer, got {prio!r}")
        gpu = []
        for gj, graw in enumerate(_need(raw, "gpu_segments", ctx)):
            gctx = f"{ctx}.gpu_segments[{gj}]"
            ratio_pct = _need(graw, "interleave_ratio_pct", gctx)
            if isinstance(ratio_pct, bool) or not isinstance(ratio_pct, int):
                raise TasksetFormatError(
                    f"{gctx}.interleave_ratio_pct: expected integer, got {ratio_pct!r}")
            gpu.append(GpuKernelModel(
                work=_bounds_from_json(_need(graw, "work_us", gctx), gctx + ".work_us"),
                critical_path_overhead=_int_us(
                    _need(graw, "critical_path_overhead_us", gctx),
                    gctx + ".critical_path_overhead_us"),
                interleave_ratio=Fraction(ratio_pct, 100),
            ))
        tasks.append(TaskSpec(
            id=str(tid),
            priority=prio,
            deadline=_int_us(_need(raw, "deadline_us", ctx), ctx + ".deadline_us"),
            period=_int_us(_need(raw, "period_us", ctx), ctx + ".period_us"),
            cpu_segments=tuple(
                _bounds_from_json(b, f"{ctx}.cpu_segments_us[{j}]")
                for j, b in enumerate(_need(raw, "cpu_segments_us", ctx))),
            mem_segments=tuple(
                _bounds_from_json(b, f"{ctx}.mem_segments_us[{j}]")
                for j, b in enumerate(_need(raw, "mem_segments_us", ctx))),
            gpu_segments=tuple(gpu),
        ))
    return TaskSet(tasks=tuple(tasks), mem_model=mem_model, platform=platform)


def save_taskset(ts: TaskSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(taskset_to_dict(ts), fh, indent=2)
        fh.write("\n")


def load_taskset(path) -> TaskSet:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TasksetFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return taskset_from_dict(data)


# Exact-duration helpers shared by report/trace serialization.

def duration_to_str(d: Optional[Fraction]) -> Optional[str]:
    if d is None:
        return None
    if d.denominator == 1:
        return str(d.numerator)
    return f"{d.numerator}/{d.denominator}"


def duration_from_str(s) -> Optional[Fraction]:
    if s is None:
        return None
    return Fraction(s)


def report_to_dict(report: AnalysisReport) -> dict:
    per_task = {}
    for tid, tr in report.per_task.items():
        per_task[tid] = {
            "gpu_r": [[duration_to_str(b.lo), duration_to_str(b.hi)] for b in tr.gpu_r],
            "mem_r_up": [duration_to_str(v) for v in tr.mem_r_up],
            "cpu_r_up": [duration_to_str(v) for v in tr.cpu_r_up],
            "end_to_end_up": duration_to_str(tr.end_to_end_up),
        }
    return {
        "method": report.method.value,
        "schedulable": report.schedulable,
        "allocation": (dict(report.allocation.per_task_virtual_sms)
                       if report.allocation is not None else None),
        "per_task": per_task,
    }


def report_from_dict(data: dict) -> AnalysisReport:
    per_task = {}
    for tid, raw in data.get("per_task", {}).items():
        per_task[tid] = TaskReport(
            gpu_r=tuple(ExecBounds(duration_from_str(lo), duration_from_str(hi))
                        for lo, hi in raw["gpu_r"]),
            mem_r_up=tuple(duration_from_str(v) for v in raw["mem_r_up"]),
            cpu_r_up=tuple(duration_from_str(v) for v in raw["cpu_r_up"]),
            end_to_end_up=duration_from_str(raw["end_to_end_up"]),
        )
    alloc = data.get("allocation")
    return AnalysisReport(
        schedulable=bool(data["schedulable"]),
        method=AnalysisMethod(data["method"]),
        allocation=SmAllocation(dict(alloc)) if alloc is not None else None,
        per_task=per_task,
    )


def save_report(report: AnalysisReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def load_report(path) -> AnalysisReport:
    with open(path) as fh:
        return report_from_dict(json.load(fh))
