"""Response-time analysis for multi-segment self-suspension tasks.

A task alternates ``m`` execution segments with ``m - 1`` suspension
intervals.  The workload function bounds how much execution a task can
inject into a window; segment and task response times are least fixed
points of the usual interference recurrences.  All fixed-point iterations
abort once the iterate exceeds the task's deadline, which guarantees
termination with exact rational arithmetic: values beyond the deadline
carry no scheduling information.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .model import ExecBounds

ZERO = Fraction(0)


@dataclass(frozen=True)
class SuspTask:
    """Execution/suspension bounds plus deadline and period.

    Construction rejects tasks whose packed length exceeds the period,
    since the wrap-around inter-arrival gap would go negative.
    """

    exec_segments: tuple[ExecBounds, ...]
    susp_segments: tuple[ExecBounds, ...]
    deadline: Fraction
    period: Fraction

    def __post_init__(self):
        m = len(self.exec_segments)
        if m < 1:
            raise ValueError("need at least one execution segment")
        if len(self.susp_segments) != m - 1:
            raise ValueError("need exactly m-1 suspension segments")
        if not (0 < self.deadline <= self.period):
            raise ValueError("deadline must satisfy 0 < D <= T")
        for b in self.exec_segments + self.susp_segments:
            if not (0 <= b.lo <= b.hi):
                raise ValueError(f"bad bounds {b}")
        packed = (sum((b.hi for b in self.exec_segments), ZERO)
                  + sum((b.lo for b in self.susp_segments), ZERO))
        if packed > self.period:
            raise ValueError("sum of execution uppers and suspension lowers "
                             "exceeds the period")

    @property
    def m(self) -> int:
        return len(self.exec_segments)

    @property
    def total_exec_up(self) -> Fraction:
        return sum((b.hi for b in self.exec_segments), ZERO)

    @property
    def total_susp_up(self) -> Fraction:
        return sum((b.hi for b in self.susp_segments), ZERO)


def inter_arrival(t: SuspTask, j: int) -> Fraction:
    """Minimum gap between the end of execution segment j and the start of
    segment j+1, where j counts across successive jobs of the task."""
    m = t.m
    if j % m != m - 1:
        return t.susp_segments[j % m].lo
    if j == m - 1:
        return t.period - t.deadline
    return (t.period - t.total_exec_up
            - sum((b.lo for b in t.susp_segments), ZERO))


def chain_workload(exec_up: Sequence[Fraction],
                   gap: Callable[[int], Fraction],
                   h: int, horizon: Fraction) -> Fraction:
    """Maximum execution a cyclic exec/gap chain can place in a window.

    Greedy packing: full segments while segment plus following gap fit,
    then the truncated next segment.  Shared by the CPU and memory-copy
    workload functions, which differ only in their segment lists and gap
    definitions.
    """
    p = len(exec_up)
    if p == 0 or horizon <= 0:
        return ZERO
    cum = ZERO
    work = ZERO
    j = h
    while True:
        seg = exec_up[j % p]
        g = gap(j)
        if cum + seg + g <= horizon:
            cum += seg + g
            work += seg
            j += 1
        else:
            tail = horizon - cum
            if seg < tail:
                tail = seg
            return work + (tail if tail > 0 else ZERO)


def workload(t: SuspTask, h: int, horizon: Fraction) -> Fraction:
    """Maximum execution of ``t`` in a window of length ``horizon`` that
    starts with execution segment ``h``."""
    if not (0 <= h < t.m):
        raise ValueError(f"start segment {h} out of range")
    return chain_workload([b.hi for b in t.exec_segments],
                          lambda j: inter_arrival(t, j), h, horizon)


def max_workload(t: SuspTask, horizon: Fraction) -> Fraction:
    """Workload maximized over all starting segments."""
    if horizon <= 0:
        return ZERO
    return max(workload(t, h, horizon) for h in range(t.m))


def fixed_point(base: Fraction,
                interference: Callable[[Fraction], Fraction],
                bound: Fraction) -> Optional[Fraction]:
    """Least fixed point of r = base + interference(r), iterated from
    ``base``; ``None`` once the iterate exceeds ``bound``."""
    if base > bound:
        return None
    r = base
    while True:
        nxt = base + interference(r)
        if nxt == r:
            return r
        if nxt > bound:
            return None
        r = nxt


def segment_response(k: SuspTask, j: int, hp: Sequence[SuspTask],
                     blocking: Fraction = ZERO) -> Optional[Fraction]:
    """Worst-case response time of execution segment j of task k under
    interference from the higher-priority tasks ``hp``.

    ``blocking`` is an optional constant addend for non-preemptive
    variants of the recurrence; it is zero in the plain analysis.
    """
    base = k.exec_segments[j].hi + blocking
    return fixed_point(
        base,
        lambda r: sum((max_workload(i, r) for i in hp), ZERO),
        k.deadline)


def task_response(k: SuspTask, hp: Sequence[SuspTask],
                  blocking: Fraction = ZERO) -> Optional[Fraction]:
    """End-to-end response bound: minimum of the per-segment sum and the
    whole-task recurrence, or ``None`` if both exceed the deadline."""
    r1: Optional[Fraction] = k.total_susp_up
    for j in range(k.m):
        seg = segment_response(k, j, hp, blocking)
        if seg is None:
            r1 = None
            break
        r1 += seg
    if r1 is not None and r1 > k.deadline:
        r1 = None

    base = k.total_susp_up + k.total_exec_up + blocking
    r2 = fixed_point(
        base,
        lambda r: sum((max_workload(i, r) for i in hp), ZERO),
        k.deadline)

    candidates = [r for r in (r1, r2) if r is not None]
    return min(candidates) if candidates else None
