"""Experiment harness: random taskset generation, acceptance-ratio
sweeps, and GPU throughput metrics.

Generation draws integer-microsecond segment bounds, normalizes per-task
utilizations to an exact rational target, and derives deadlines from the
single-resource demand so the whole pipeline stays in exact arithmetic.
Sweeps derive one RNG seed per (utilization, taskset index) cell; the
seed excludes the varied dimension, the memory model, and the analysis
method, so comparisons across those are paired on identical tasksets.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .analysis import analyze
from .model import (
    AnalysisMethod,
    ExecBounds,
    GpuKernelModel,
    MemModel,
    PlatformConfig,
    SmAllocation,
    TaskSet,
    TaskSpec,
    TasksetFormatError,
)

ZERO = Fraction(0)

# Interleave-ratio caps in percent per kernel class (special function,
# branch heavy, memory bound, computation bound).
KERNEL_CLASS_ALPHA_CAPS = (145, 170, 170, 180)


@dataclass(frozen=True)
class GenParams:
    """Generator knobs; defaults follow the reference experiment setup."""

    n_tasks: int = 5
    n_subtasks: int = 5
    cpu_range_us: tuple[int, int] = (1000, 20000)
    gpu_range_us: tuple[int, int] = (1000, 20000)
    mem_range_us: Optional[tuple[int, int]] = None  # default: gpu hi / 4
    target_utilization: Fraction = Fraction(2)
    mem_model: MemModel = MemModel.TWO_COPY
    physical_sms: int = 10
    launch_overhead_frac: Fraction = Fraction(12, 100)
    lo_frac: Fraction = Fraction(1)  # segment lo = lo_frac * hi

    def effective_mem_range(self) -> tuple[int, int]:
        if self.mem_range_us is not None:
            return self.mem_range_us
        return (max(1, self.gpu_range_us[0] // 4), self.gpu_range_us[1] // 4)

    def check(self) -> None:
        if self.target_utilization <= 0:
            raise ValueError("target_utilization must be > 0")
        if self.n_tasks < 1 or self.n_subtasks < 1:
            raise ValueError("n_tasks and n_subtasks must be >= 1")
        if self.physical_sms < 1:
            raise ValueError("physical_sms must be >= 1")
        if not (0 < self.lo_frac <= 1):
            raise ValueError("lo_frac must be in (0, 1]")
        for name, rng in (("cpu_range_us", self.cpu_range_us),
                          ("gpu_range_us", self.gpu_range_us),
                          ("mem_range_us", self.effective_mem_range())):
            if rng[0] > rng[1] or rng[0] < 0:
                raise ValueError(f"{name}: invalid range {rng}")


def _bounds(hi: int, lo_frac: Fraction) -> ExecBounds:
    lo = int(Fraction(hi) * lo_frac)
    return ExecBounds(Fraction(min(lo, hi)), Fraction(hi))


def merge_memory_copies(ts: TaskSet) -> TaskSet:
    """Two-copy taskset with each copy pair combined into one transfer.

    The result has the same total copy length per subtask, so it is the
    paired one-copy counterpart of ``ts``.
    """
    if ts.mem_model is not MemModel.TWO_COPY:
        raise ValueError("merge_memory_copies expects a two_copy taskset")
    tasks = []
    for t in ts.tasks:
        merged = tuple(
            ExecBounds(t.mem_segments[2 * j].lo + t.mem_segments[2 * j + 1].lo,
                       t.mem_segments[2 * j].hi + t.mem_segments[2 * j + 1].hi)
            for j in range(t.n_subtasks - 1))
        tasks.append(dataclasses.replace(t, mem_segments=merged))
    return TaskSet(tuple(tasks), MemModel.ONE_COPY, ts.platform)


def generate_taskset(params: GenParams, seed) -> TaskSet:
    """One random taskset: utilizations scaled to the exact target, then
    deadlines from the summed single-resource demand, periods equal to
    deadlines, and deadline-monotonic priorities."""
    params.check()
    rng = random.Random(seed)
    n = params.n_tasks
    m = params.n_subtasks
    mem_range = params.effective_mem_range()

    # Per-task utilizations: uniform draws scaled so the sum is exact.
    while True:
        raw = [Fraction(rng.random()) for _ in range(n)]
        total = sum(raw, ZERO)
        if total > 0 and all(r > 0 for r in raw):
            break
    utils = [r * params.target_utilization / total for r in raw]

    drafts = []
    for i in range(n):
        cpu = tuple(_bounds(rng.randint(*params.cpu_range_us), params.lo_frac)
                    for _ in range(m))
        mem = tuple(_bounds(rng.randint(*mem_range), params.lo_frac)
                    for _ in range(2 * (m - 1)))
        gpu = []
        for _ in range(m - 1):
            work = _bounds(rng.randint(*params.gpu_range_us), params.lo_frac)
            cap = KERNEL_CLASS_ALPHA_CAPS[rng.randrange(4)]
            alpha = Fraction(rng.randint(100, cap), 100)
            overhead = min(int(params.launch_overhead_frac * work.hi),
                           int(work.lo))
            gpu.append(GpuKernelModel(work, Fraction(overhead), alpha))
        demand = (sum((b.hi for b in cpu), ZERO)
                  + sum((b.hi for b in mem), ZERO)
                  + sum((g.work.hi for g in gpu), ZERO))
        deadline = Fraction(max(1, int(demand / utils[i])))
        drafts.append((deadline, i, cpu, mem, tuple(gpu)))

    order = sorted(range(n), key=lambda i: (drafts[i][0], i))
    prio = {i: p + 1 for p, i in enumerate(order)}
    tasks = []
    for deadline, i, cpu, mem, gpu in drafts:
        tasks.append(TaskSpec(
            id=f"t{i + 1}",
            cpu_segments=cpu,
            mem_segments=mem,
            gpu_segments=gpu,
            deadline=deadline,
            period=deadline,
            priority=prio[i],
        ))
    ts = TaskSet(tuple(tasks), MemModel.TWO_COPY,
                 PlatformConfig(params.physical_sms,
                                params.launch_overhead_frac))
    if params.mem_model is MemModel.ONE_COPY:
        ts = merge_memory_copies(ts)
    return ts


# ---------------------------------------------------------------------------
# Acceptance-ratio sweeps
# ---------------------------------------------------------------------------

SWEEP_DIMENSIONS = ("none", "length_scale", "n_subtasks", "n_tasks",
                    "physical_sms")

CSV_HEADER = ("dimension", "value", "method", "mem_model", "utilization",
              "acceptance")


@dataclass(frozen=True)
class SweepConfig:
    params: GenParams = GenParams()
    dimension: str = "none"
    values: tuple = (None,)
    utilizations: tuple[Fraction, ...] = ()
    methods: tuple[AnalysisMethod, ...] = (
        AnalysisMethod.RTGPU,
        AnalysisMethod.SELF_SUSPENSION,
        AnalysisMethod.BUSY_WAITING,
    )
    mem_models: tuple[MemModel, ...] = (MemModel.TWO_COPY,)
    tasksets_per_point: int = 100
    master_seed: int = 0


@dataclass(frozen=True)
class SweepRow:
    dimension: str
    value: str
    method: AnalysisMethod
    mem_model: MemModel
    utilization: Fraction
    acceptance: Fraction


def _scale_range(rng: tuple[int, int], factor: Fraction) -> tuple[int, int]:
    return (max(1, int(rng[0] * factor)), max(1, int(rng[1] * factor)))


def apply_dimension(params: GenParams, dimension: str, value) -> GenParams:
    """Specialize the generator parameters for one sweep-dimension value."""
    if dimension == "none" or value is None:
        return params
    if dimension == "length_scale":
        f = Fraction(value)
        return dataclasses.replace(
            params,
            gpu_range_us=_scale_range(params.gpu_range_us, f),
            mem_range_us=_scale_range(params.effective_mem_range(), f))
    if dimension == "n_subtasks":
        return dataclasses.replace(params, n_subtasks=int(value))
    if dimension == "n_tasks":
        return dataclasses.replace(params, n_tasks=int(value))
    if dimension == "physical_sms":
        return dataclasses.replace(params, physical_sms=int(value))
    raise ValueError(f"unknown sweep dimension {dimension!r}")


def cell_seed(master_seed: int, utilization: Fraction, index: int) -> str:
    # Excludes the dimension value, memory model, and method on purpose:
    # every comparison across those runs on the same taskset.
    return f"{master_seed}:{utilization}:{index}"


def format_value(value) -> str:
    return "" if value is None else str(value)


def acceptance_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """Acceptance ratio per (dimension value, method, memory model,
    utilization) over ``tasksets_per_point`` generated tasksets."""
    if cfg.dimension not in SWEEP_DIMENSIONS:
        raise ValueError(f"unknown sweep dimension {cfg.dimension!r}")
    if not cfg.utilizations:
        raise ValueError("at least one utilization point required")
    if cfg.tasksets_per_point < 1:
        raise ValueError("tasksets_per_point must be >= 1")
    rows: list[SweepRow] = []
    for value in cfg.values:
        point_params = apply_dimension(cfg.params, cfg.dimension, value)
        for u in cfg.utilizations:
            gen = dataclasses.replace(point_params, target_utilization=u)
            tasksets = {}
            for mm in cfg.mem_models:
                tasksets[mm] = [
                    generate_taskset(dataclasses.replace(gen, mem_model=mm),
                                     cell_seed(cfg.master_seed, u, idx))
                    for idx in range(cfg.tasksets_per_point)]
            for method in cfg.methods:
                for mm in cfg.mem_models:
                    accepted = sum(
                        1 for ts in tasksets[mm]
                        if analyze(ts, method).schedulable)
                    rows.append(SweepRow(
                        dimension=cfg.dimension,
                        value=format_value(value),
                        method=method,
                        mem_model=mm,
                        utilization=u,
                        acceptance=Fraction(accepted,
                                            cfg.tasksets_per_point)))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([
            r.dimension,
            r.value,
            r.method.value,
            r.mem_model.value,
            f"{float(r.utilization):g}",
            f"{float(r.acceptance):.4f}",
        ])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Throughput metrics
# ---------------------------------------------------------------------------

class ThroughputScope(str, Enum):
    WHOLE_GPU = "whole_gpu"
    USED_SMS = "used_sms"


def throughput_improvement(ts: TaskSet, alloc: SmAllocation,
                           scope: ThroughputScope) -> Fraction:
    """Expected throughput gain of interleaved execution over dedicated
    per-kernel SMs: sum over tasks of SM share times (2 / alpha - 1),
    with alpha the task's worst kernel interleave ratio.

    The share denominator is the whole GPU or only the SMs the taskset
    uses, depending on ``scope``.
    """
    used = sum(alloc.virtual_sms(t.id) // 2 for t in ts.tasks)
    if scope is ThroughputScope.WHOLE_GPU:
        denom = ts.platform.physical_sms
    else:
        denom = used
    if denom < 1:
        raise ValueError("no SMs in the chosen scope")
    total = ZERO
    for t in ts.tasks:
        sms = alloc.virtual_sms(t.id) // 2
        if sms == 0:
            continue
        alpha = max(g.interleave_ratio for g in t.gpu_segments)
        if not (1 <= alpha <= 2):
            raise ValueError(f"task {t.id}: interleave ratio {alpha} "
                             "outside [1, 2]")
        total += Fraction(sms, denom) * (2 / alpha - 1)
    return total


# ---------------------------------------------------------------------------
# JSON config parsing (shared with the CLI)
# ---------------------------------------------------------------------------

def _frac(value, ctx: str) -> Fraction:
    try:
        if isinstance(value, float):
            return Fraction(str(value))
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise TasksetFormatError(f"{ctx}: not a number: {value!r}") from None


def _range(value, ctx: str) -> tuple[int, int]:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) for v in value)):
        raise TasksetFormatError(f"{ctx}: expected [lo, hi] integers")
    return (value[0], value[1])


def gen_params_from_dict(data: dict) -> GenParams:
    if not isinstance(data, dict):
        raise TasksetFormatError("params: expected a JSON object")
    known = {"n_tasks", "n_subtasks", "cpu_range_us", "gpu_range_us",
             "mem_range_us", "target_utilization", "mem_model",
             "physical_sms", "launch_overhead_pct", "lo_frac_pct"}
    for key in data:
        if key not in known:
            raise TasksetFormatError(f"params: unknown field {key!r}")
    kwargs = {}
    for key in ("n_tasks", "n_subtasks", "physical_sms"):
        if key in data:
            if not isinstance(data[key], int):
                raise TasksetFormatError(f"params.{key}: expected integer")
            kwargs[key] = data[key]
    for key in ("cpu_range_us", "gpu_range_us", "mem_range_us"):
        if key in data:
            kwargs[key] = _range(data[key], f"params.{key}")
    if "target_utilization" in data:
        kwargs["target_utilization"] = _frac(data["target_utilization"],
                                             "params.target_utilization")
    if "mem_model" in data:
        try:
            kwargs["mem_model"] = MemModel(data["mem_model"])
        except ValueError:
            raise TasksetFormatError(
                f"params.mem_model: unknown value {data['mem_model']!r}"
            ) from None
    if "launch_overhead_pct" in data:
        kwargs["launch_overhead_frac"] = _frac(
            data["launch_overhead_pct"], "params.launch_overhead_pct") / 100
    if "lo_frac_pct" in data:
        kwargs["lo_frac"] = _frac(data["lo_frac_pct"],
                                  "params.lo_frac_pct") / 100
    try:
        params = GenParams(**kwargs)
        params.check()
    except ValueError as exc:
        raise TasksetFormatError(f"params: {exc}") from None
    return params


def sweep_config_from_dict(data: dict) -> SweepConfig:
    if not isinstance(data, dict):
        raise TasksetFormatError("sweep config: expected a JSON object")
    params = gen_params_from_dict(data.get("params", {}))
    dimension = data.get("dimension", "none")
    if dimension not in SWEEP_DIMENSIONS:
        raise TasksetFormatError(f"dimension: unknown value {dimension!r}")
    values = tuple(data.get("values", [None]))
    raw_utils = data.get("utilizations")
    if not isinstance(raw_utils, list) or not raw_utils:
        raise TasksetFormatError("utilizations: expected a non-empty list")
    utils = tuple(_frac(u, f"utilizations[{i}]")
                  for i, u in enumerate(raw_utils))
    try:
        methods = tuple(AnalysisMethod(m) for m in data.get(
            "methods", ["rtgpu", "selfsusp", "busywait"]))
        mem_models = tuple(MemModel(m) for m in data.get(
            "mem_models", ["two_copy"]))
    except ValueError as exc:
        raise TasksetFormatError(str(exc)) from None
    n_per = data.get("tasksets_per_point", 100)
    if not isinstance(n_per, int) or n_per < 1:
        raise TasksetFormatError("tasksets_per_point: expected integer >= 1")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise TasksetFormatError("seed: expected integer")
    return SweepConfig(
        params=params,
        dimension=dimension,
        values=values,
        utilizations=utils,
        methods=methods,
        mem_models=mem_models,
        tasksets_per_point=n_per,
        master_seed=seed,
    )
