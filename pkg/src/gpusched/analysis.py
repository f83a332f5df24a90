"""End-to-end schedulability analysis for CPU-memory-GPU tasksets.

The combined analysis gives each task dedicated virtual SMs (closed-form
kernel response bounds), then bounds memory-copy responses on the shared
non-preemptive bus and CPU responses on the preemptive uniprocessor with
self-suspension-aware workload functions, and finally combines them into
an end-to-end bound per task.  A grid search over SM allocations accepts
the first allocation (in nested-loop order) under which every task meets
its deadline.

Two baseline analyses are provided for comparison.  Neither has a
published closed form; both are reconstructions of their prose
descriptions and are flagged as such in the README:

* self-suspension: CPU time is execution, the whole memory+GPU span is a
  suspension, and each higher-priority task interferes as a sporadic task
  with release jitter equal to its total suspension (the classical
  suspension-aware uniprocessor test);
* busy-waiting: the CPU is held for the full duration of every segment,
  collapsing each task to one execution block under plain preemptive
  response-time analysis.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional

from .gpu import feasible_allocations, gpu_bounds_cache, gpu_response_bounds
from .model import (
    AnalysisMethod,
    AnalysisReport,
    MemModel,
    SmAllocation,
    TaskReport,
    TaskSet,
    TaskSpec,
)
from .suspension import chain_workload, fixed_point

ZERO = Fraction(0)

GpuBoundsCache = dict  # task id -> list of ExecBounds, fixed per allocation


class InfeasibleGapError(ValueError):
    """A minimum inter-arrival gap came out negative: the task cannot fit
    one job between consecutive releases, so the analysis rejects it."""


def _check(gap: Fraction, task_id: str, what: str) -> Fraction:
    if gap < 0:
        raise InfeasibleGapError(f"task {task_id}: negative {what} gap {gap}")
    return gap


def mem_inter_arrival(ts: TaskSet, i: TaskSpec, j: int,
                      cache: GpuBoundsCache) -> Fraction:
    """Minimum gap between memory-copy segments j and j+1 of task i."""
    p = len(i.mem_segments)
    if p == 0:
        raise ValueError("task has no memory segments")
    m = i.n_subtasks
    jp = j % p
    gr = cache[i.id]
    cl = i.cpu_segments
    if ts.mem_model is MemModel.TWO_COPY:
        if jp != p - 1:
            if jp % 2 == 0:
                return gr[jp // 2].lo  # enclosed kernel
            return cl[(jp + 1) // 2].lo  # CPU segment after the return copy
        if j == p - 1:
            # First job in the window, delayed toward its deadline.
            return _check(i.period - i.deadline + cl[m - 1].lo + cl[0].lo,
                          i.id, "deadline-side")
    else:
        if jp != p - 1:
            return gr[jp].lo + cl[jp + 1].lo  # kernel then CPU segment
        if j == p - 1:
            return _check(i.period - i.deadline + gr[m - 2].lo
                          + cl[m - 1].lo + cl[0].lo, i.id, "deadline-side")
    wrap = (i.period
            - sum((b.hi for b in i.mem_segments), ZERO)
            - sum((cl[q].lo for q in range(1, m - 1)), ZERO)
            - sum((g.lo for g in gr), ZERO))
    return _check(wrap, i.id, "wrap-around")


def cpu_inter_arrival(ts: TaskSet, i: TaskSpec, j: int,
                      cache: GpuBoundsCache) -> Fraction:
    """Minimum gap between CPU segments j and j+1 of task i."""
    m = i.n_subtasks
    jp = j % m
    gr = cache[i.id]
    ml = i.mem_segments
    if jp != m - 1:
        if ts.mem_model is MemModel.TWO_COPY:
            return ml[2 * jp].lo + gr[jp].lo + ml[2 * jp + 1].lo
        return ml[jp].lo + gr[jp].lo
    if j == m - 1:
        return i.period - i.deadline
    wrap = (i.period
            - sum((b.hi for b in i.cpu_segments), ZERO)
            - sum((b.lo for b in ml), ZERO)
            - sum((g.lo for g in gr), ZERO))
    return _check(wrap, i.id, "wrap-around")


def mem_workload(ts: TaskSet, i: TaskSpec, h: int, horizon: Fraction,
                 cache: GpuBoundsCache) -> Fraction:
    """Maximum bus time task i can claim in a window starting at memory
    segment h."""
    return chain_workload([b.hi for b in i.mem_segments],
                          lambda j: mem_inter_arrival(ts, i, j, cache),
                          h, horizon)


def cpu_workload(ts: TaskSet, i: TaskSpec, h: int, horizon: Fraction,
                 cache: GpuBoundsCache) -> Fraction:
    """Maximum CPU time task i can claim in a window starting at CPU
    segment h."""
    return chain_workload([b.hi for b in i.cpu_segments],
                          lambda j: cpu_inter_arrival(ts, i, j, cache),
                          h, horizon)


# Workload maxima are memoized per (resource, task, its SM count, horizon):
# a task's gaps depend only on its own allocation, so entries stay valid
# across the whole grid search.

def _max_workload(ts, i, horizon, cache, kind, memo, alloc):
    nsegs = len(i.mem_segments) if kind == "mem" else i.n_subtasks
    if nsegs == 0 or horizon <= 0:
        return ZERO
    key = None
    if memo is not None:
        key = (kind, i.id, alloc.virtual_sms(i.id) if alloc else 0, horizon)
        hit = memo.get(key)
        if hit is not None:
            return hit
    fn = mem_workload if kind == "mem" else cpu_workload
    val = max(fn(ts, i, h, horizon, cache) for h in range(nsegs))
    if memo is not None:
        memo[key] = val
    return val


def _hp(ts: TaskSet, k: TaskSpec) -> list[TaskSpec]:
    return [t for t in ts.by_priority() if t.priority < k.priority]


def _lp(ts: TaskSet, k: TaskSpec) -> list[TaskSpec]:
    return [t for t in ts.by_priority() if t.priority > k.priority]


def mem_response(ts: TaskSet, k: TaskSpec, j: int, cache: GpuBoundsCache,
                 memo=None, alloc=None) -> Optional[Fraction]:
    """Worst-case response of memory segment j of task k on the bus:
    interference from higher priorities plus one blocking lower-priority
    copy (non-preemptive bus)."""
    hp = [t for t in _hp(ts, k) if t.mem_segments]
    blocking = max((b.hi for t in _lp(ts, k) for b in t.mem_segments),
                   default=ZERO)
    base = k.mem_segments[j].hi + blocking
    try:
        return fixed_point(
            base,
            lambda r: sum((_max_workload(ts, i, r, cache, "mem", memo, alloc)
                           for i in hp), ZERO),
            k.deadline)
    except InfeasibleGapError:
        return None


def cpu_response(ts: TaskSet, k: TaskSpec, j: int, cache: GpuBoundsCache,
                 memo=None, alloc=None) -> Optional[Fraction]:
    """Worst-case response of CPU segment j of task k; the CPU is
    preemptive, so there is no blocking term."""
    hp = _hp(ts, k)
    base = k.cpu_segments[j].hi
    try:
        return fixed_point(
            base,
            lambda r: sum((_max_workload(ts, i, r, cache, "cpu", memo, alloc)
                           for i in hp), ZERO),
            k.deadline)
    except InfeasibleGapError:
        return None


def end_to_end(ts: TaskSet, k: TaskSpec, cache: GpuBoundsCache,
               memo=None, alloc=None,
               mem_rs=None, cpu_rs=None) -> Optional[Fraction]:
    """End-to-end response bound for task k: minimum of the per-segment
    sum and the CPU-perspective whole-task recurrence."""
    if mem_rs is None:
        mem_rs = [mem_response(ts, k, j, cache, memo, alloc)
                  for j in range(len(k.mem_segments))]
    if cpu_rs is None:
        cpu_rs = [cpu_response(ts, k, j, cache, memo, alloc)
                  for j in range(k.n_subtasks)]
    if any(r is None for r in mem_rs):
        return None
    gr_up = sum((b.hi for b in cache[k.id]), ZERO)
    mr_up = sum(mem_rs, ZERO)

    r1: Optional[Fraction] = None
    if all(r is not None for r in cpu_rs):
        cand = gr_up + mr_up + sum(cpu_rs, ZERO)
        if cand <= k.deadline:
            r1 = cand

    hp = _hp(ts, k)
    base = gr_up + mr_up + sum((b.hi for b in k.cpu_segments), ZERO)
    try:
        r2 = fixed_point(
            base,
            lambda r: sum((_max_workload(ts, i, r, cache, "cpu", memo, alloc)
                           for i in hp), ZERO),
            k.deadline)
    except InfeasibleGapError:
        r2 = None

    candidates = [r for r in (r1, r2) if r is not None]
    return min(candidates) if candidates else None


# ---------------------------------------------------------------------------
# Grid-searched analyzers
# ---------------------------------------------------------------------------

def _isolated_sum(k: TaskSpec, gr_up: Fraction) -> Fraction:
    # No analysis can report less than the task's own upper bounds.
    return (gr_up
            + sum((b.hi for b in k.mem_segments), ZERO)
            + sum((b.hi for b in k.cpu_segments), ZERO))


def _min_feasible_gn(k: TaskSpec, total: int) -> Optional[int]:
    """Smallest physical-SM count under which k's isolated bound fits its
    deadline; allocations below it can never pass any of the analyses."""
    for gn in range(1, total + 1):
        gr_up = sum((gpu_response_bounds(g, 2 * gn).hi for g in k.gpu_segments),
                    ZERO)
        if _isolated_sum(k, gr_up) <= k.deadline:
            return gn
    return None


def _grid_search(ts: TaskSet, method: AnalysisMethod, evaluate) -> AnalysisReport:
    """Run ``evaluate(alloc, cache)`` over allocations in grid order and
    return the first schedulable one."""
    ordered = ts.by_priority()
    total = ts.platform.physical_sms
    mins: dict[str, int] = {}
    for t in ordered:
        if t.gpu_segments:
            gn = _min_feasible_gn(t, total)
            if gn is None:
                return AnalysisReport(False, method)
            mins[t.id] = gn
        elif _isolated_sum(t, ZERO) > t.deadline:
            return AnalysisReport(False, method)

    last_per_task: dict[str, TaskReport] = {}
    for alloc in feasible_allocations(ts, mins):
        cache = gpu_bounds_cache(ts, alloc)
        ok, per_task = evaluate(alloc, cache)
        last_per_task = per_task
        if ok:
            return AnalysisReport(True, method, alloc, per_task)
    return AnalysisReport(False, method, None, last_per_task)


def analyze_rtgpu(ts: TaskSet) -> AnalysisReport:
    """Grid-searched federated allocation with the full decomposed
    bus/CPU self-suspension analysis."""
    memo: dict = {}

    def evaluate(alloc: SmAllocation, cache: GpuBoundsCache):
        per_task: dict[str, TaskReport] = {}
        ok = True
        for k in ts.by_priority():
            mem_rs = [mem_response(ts, k, j, cache, memo, alloc)
                      for j in range(len(k.mem_segments))]
            cpu_rs = [cpu_response(ts, k, j, cache, memo, alloc)
                      for j in range(k.n_subtasks)]
            r = end_to_end(ts, k, cache, memo, alloc, mem_rs, cpu_rs)
            per_task[k.id] = TaskReport(
                gpu_r=tuple(cache[k.id]),
                mem_r_up=tuple(mem_rs),
                cpu_r_up=tuple(cpu_rs),
                end_to_end_up=r,
            )
            if r is None or r > k.deadline:
                ok = False
                break
        return ok, per_task

    return _grid_search(ts, AnalysisMethod.RTGPU, evaluate)


def _suspension_bounds(ts: TaskSet, k: TaskSpec,
                       cache: GpuBoundsCache) -> list[ExecBounds]:
    """Bounds of the memory+GPU span between consecutive CPU segments."""
    gr = cache[k.id]
    out = []
    for j in range(k.n_subtasks - 1):
        if ts.mem_model is MemModel.TWO_COPY:
            lo = k.mem_segments[2 * j].lo + gr[j].lo + k.mem_segments[2 * j + 1].lo
            hi = k.mem_segments[2 * j].hi + gr[j].hi + k.mem_segments[2 * j + 1].hi
        else:
            lo = k.mem_segments[j].lo + gr[j].lo
            hi = k.mem_segments[j].hi + gr[j].hi
        out.append(ExecBounds(lo, hi))
    return out


def analyze_self_suspension_baseline(ts: TaskSet) -> AnalysisReport:
    """Baseline treating each memory+GPU span as one non-preemptive
    suspension: lower-priority suspensions contribute a blocking term."""

    def evaluate(alloc: SmAllocation, cache: GpuBoundsCache):
        ordered = ts.by_priority()
        mapped: dict[str, SuspTask] = {}
        for t in ordered:
            try:
                mapped[t.id] = SuspTask(
                    exec_segments=t.cpu_segments,
                    susp_segments=tuple(_suspension_bounds(ts, t, cache)),
                    deadline=t.deadline,
                    period=t.period,
                )
            except ValueError:
                return False, {}
        per_task: dict[str, TaskReport] = {}
        ok = True
        for k in ordered:
            hp = [mapped[t.id] for t in ordered if t.priority < k.priority]
            blocking = max(
                (b.hi for t in ordered if t.priority > k.priority
                 for b in mapped[t.id].susp_segments),
                default=ZERO)
            r = task_response(mapped[k.id], hp, blocking)
            per_task[k.id] = TaskReport(gpu_r=tuple(cache[k.id]),
                                        end_to_end_up=r)
            if r is None or r > k.deadline:
                ok = False
                break
        return ok, per_task

    return _grid_search(ts, AnalysisMethod.SELF_SUSPENSION, evaluate)


def analyze_busy_waiting_baseline(ts: TaskSet) -> AnalysisReport:
    """Baseline holding the CPU through every segment: each task becomes a
    single execution segment under classic preemptive response-time
    analysis."""

    def evaluate(alloc: SmAllocation, cache: GpuBoundsCache):
        ordered = ts.by_priority()
        mapped: dict[str, SuspTask] = {}
        for t in ordered:
            gr = cache[t.id]
            lo = (sum((b.lo for b in t.cpu_segments), ZERO)
                  + sum((b.lo for b in t.mem_segments), ZERO)
                  + sum((g.lo for g in gr), ZERO))
            hi = (sum((b.hi for b in t.cpu_segments), ZERO)
                  + sum((b.hi for b in t.mem_segments), ZERO)
                  + sum((g.hi for g in gr), ZERO))
            try:
                mapped[t.id] = SuspTask(
                    exec_segments=(ExecBounds(lo, hi),),
                    susp_segments=(),
                    deadline=t.deadline,
                    period=t.period,
                )
            except ValueError:
                return False, {}
        per_task: dict[str, TaskReport] = {}
        ok = True
        for k in ordered:
            hp = [mapped[t.id] for t in ordered if t.priority < k.priority]
            r = task_response(mapped[k.id], hp)
            per_task[k.id] = TaskReport(gpu_r=tuple(cache[k.id]),
                                        end_to_end_up=r)
            if r is None or r > k.deadline:
                ok = False
                break
        return ok, per_task

    return _grid_search(ts, AnalysisMethod.BUSY_WAITING, evaluate)


ANALYZERS = {
    AnalysisMethod.RTGPU: analyze_rtgpu,
    AnalysisMethod.SELF_SUSPENSION: analyze_self_suspension_baseline,
    AnalysisMethod.BUSY_WAITING: analyze_busy_waiting_baseline,
}


def analyze(ts: TaskSet, method: AnalysisMethod) -> AnalysisReport:
    return ANALYZERS[method](ts)
