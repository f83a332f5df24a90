"""GPU kernel timing under federated virtual-SM allocation.

A kernel with total single-SM work ``C`` and critical-path overhead ``L``
runs in ``(C - L) / m + L`` on ``m`` SMs.  Under federated scheduling each
task owns an even number of virtual SMs (two per physical SM); the kernel
self-interleaves on them, inflating its work by the interleave ratio.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .model import ExecBounds, GpuKernelModel, SmAllocation, TaskSet


def kernel_time(work: Fraction, overhead: Fraction, sms: int) -> Fraction:
    """Kernel execution time on ``sms`` SMs: (work - overhead) / sms + overhead."""
    if sms < 1:
        raise ValueError("sms must be >= 1")
    if overhead < 0 or overhead > work:
        raise ValueError("overhead must be in [0, work]")
    return (work - overhead) / sms + overhead


def gpu_response_bounds(g: GpuKernelModel, virtual_sms: int) -> ExecBounds:
    """Response-time bounds of a kernel on dedicated virtual SMs.

    Lower bound: minimum work fully parallel, no overhead and no
    interleave inflation.  Upper bound: maximum work inflated by the
    interleave ratio, minus the sequential overhead which does not
    parallelize.
    """
    if virtual_sms < 2 or virtual_sms % 2 != 0:
        raise ValueError("virtual_sms must be an even count >= 2")
    inflated = g.work.hi * g.interleave_ratio
    if g.critical_path_overhead > inflated:
        raise ValueError("critical-path overhead exceeds inflated work")
    lo = g.work.lo / virtual_sms
    hi = (inflated - g.critical_path_overhead) / virtual_sms + g.critical_path_overhead
    return ExecBounds(lo, hi)


def _compositions(total: int, mins: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All tuples with mins[i] <= x_i and sum <= total, lexicographic,
    first position outermost and ascending."""
    n = len(mins)
    if n == 0:
        yield ()
        return
    current = [0] * n

    def rec(i: int, remaining: int) -> Iterator[tuple[int, ...]]:
        if i == n:
            yield tuple(current)
            return
        needed_after = sum(mins[i + 1:])
        for v in range(mins[i], remaining - needed_after + 1):
            current[i] = v
            yield from rec(i + 1, remaining - v)

    yield from rec(0, total)


def gpu_task_ids(ts: TaskSet) -> list[str]:
    """Ids of GPU-using tasks in priority order."""
    return [t.id for t in ts.by_priority() if t.gpu_segments]


def feasible_allocations(ts: TaskSet,
                         mins: Optional[dict[str, int]] = None
                         ) -> Iterator[SmAllocation]:
    """Enumerate physical-SM allocations with at least one SM per GPU task
    and total within the platform budget, in the nested-loop order of the
    grid search (highest-priority task outermost, counts ascending).

    ``mins`` optionally raises the per-task lower bound; allocations below
    it are skipped (used by analyzers to prune counts that provably fail).
    """
    ids = gpu_task_ids(ts)
    total = ts.platform.physical_sms
    lower = [max(1, (mins or {}).get(tid, 1)) for tid in ids]
    if sum(lower) > total:
        return
    pure = [t.id for t in ts.tasks if not t.gpu_segments]
    for combo in _compositions(total, lower):
        alloc = {tid: 2 * gn for tid, gn in zip(ids, combo)}
        alloc.update({tid: 0 for tid in pure})
        yield SmAllocation(alloc)


def gpu_bounds_cache(ts: TaskSet, alloc: SmAllocation
                     ) -> dict[str, list[ExecBounds]]:
    """Per-task kernel response bounds for a fixed allocation."""
    cache: dict[str, list[ExecBounds]] = {}
    for t in ts.tasks:
        if not t.gpu_segments:
            cache[t.id] = []
            continue
        vs = alloc.virtual_sms(t.id)
        cache[t.id] = [gpu_response_bounds(g, vs) for g in t.gpu_segments]
    return cache
