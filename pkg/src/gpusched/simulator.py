"""Discrete-event simulation of one preemptive fixed-priority CPU, one
non-preemptive fixed-priority bus, and per-task dedicated virtual SMs.

Used to sanity-check the analysis: under worst-case segment lengths, an
analysis-accepted taskset must show no deadline miss and no observed
response above its bound.  Simultaneous events are processed finishes
first, then deadline checks, then releases, then starts, so a freed
resource is re-granted before anything that happens "at the same time".
"""
from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .gpu import gpu_response_bounds
from .model import (
    AnalysisReport,
    SmAllocation,
    TaskSet,
    TaskSpec,
    duration_to_str,
    validate_taskset,
)

ZERO = Fraction(0)

_FINISH, _DEADLINE, _RELEASE, _START = 0, 1, 2, 3


class LengthPolicy(str, Enum):
    WORST_CASE = "worst"
    UNIFORM_RANDOM = "uniform"


class ReleasePolicy(str, Enum):
    PERIODIC = "periodic"


@dataclass(frozen=True)
class SimConfig:
    horizon: Optional[Fraction] = None  # default: 20 x max period
    seed: int = 0
    length_policy: LengthPolicy = LengthPolicy.WORST_CASE
    release_policy: ReleasePolicy = ReleasePolicy.PERIODIC


@dataclass(frozen=True)
class SimEvent:
    time: Fraction
    task: str
    job: int
    kind: str  # "cpu" | "mem" | "gpu" | "job"
    segment: int
    action: str  # release/start/preempt/resume/finish/deadline-miss


@dataclass
class SimTrace:
    events: list[SimEvent] = field(default_factory=list)
    responses: dict[tuple[str, int], Fraction] = field(default_factory=dict)
    releases: dict[tuple[str, int], Fraction] = field(default_factory=dict)
    truncated: list[tuple[str, int]] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = []
        for e in self.events:
            lines.append(json.dumps({
                "time": duration_to_str(e.time),
                "task": e.task,
                "job": e.job,
                "kind": e.kind,
                "segment": e.segment,
                "action": e.action,
            }))
        return "\n".join(lines) + ("\n" if lines else "")


class _Job:
    __slots__ = ("task", "index", "release", "deadline", "segments", "pos",
                 "remaining", "seg_ready", "seg_finish", "done")

    def __init__(self, task: TaskSpec, index: int, release: Fraction,
                 segments: list[tuple[str, int, Fraction]]):
        self.task = task
        self.index = index
        self.release = release
        self.deadline = release + task.deadline
        self.segments = segments  # (kind, segment-index, duration)
        self.pos = 0
        self.remaining = ZERO  # of the current CPU segment
        self.seg_ready: dict[tuple[str, int], Fraction] = {}
        self.seg_finish: dict[tuple[str, int], Fraction] = {}
        self.done = False

    @property
    def current(self):
        return self.segments[self.pos]


def job_segment_plan(task: TaskSpec, two_copy: bool) -> list[tuple[str, int]]:
    """Execution order of (kind, index) segments for one job."""
    m = task.n_subtasks
    plan: list[tuple[str, int]] = []
    for j in range(m - 1):
        plan.append(("cpu", j))
        if two_copy:
            plan.append(("mem", 2 * j))
            plan.append(("gpu", j))
            plan.append(("mem", 2 * j + 1))
        else:
            plan.append(("mem", j))
            plan.append(("gpu", j))
    plan.append(("cpu", m - 1))
    return plan


def _segment_lengths(task: TaskSpec, alloc: SmAllocation, two_copy: bool,
                     policy: LengthPolicy, rng: random.Random
                     ) -> list[tuple[str, int, Fraction]]:
    vs = alloc.virtual_sms(task.id)

    def pick(bounds) -> Fraction:
        if policy is LengthPolicy.WORST_CASE or bounds.lo == bounds.hi:
            return bounds.hi
        # bounds are integer microseconds by construction
        return Fraction(rng.randint(int(bounds.lo), int(bounds.hi)))

    out = []
    for kind, idx in job_segment_plan(task, two_copy):
        if kind == "cpu":
            out.append((kind, idx, pick(task.cpu_segments[idx])))
        elif kind == "mem":
            out.append((kind, idx, pick(task.mem_segments[idx])))
        else:
            g = task.gpu_segments[idx]
            if policy is LengthPolicy.WORST_CASE:
                dur = gpu_response_bounds(g, vs).hi
            else:
                work = pick(g.work)
                dur = ((work * g.interleave_ratio - g.critical_path_overhead)
                       / vs + g.critical_path_overhead)
            out.append((kind, idx, dur))
    return out


def check_allocation(ts: TaskSet, alloc: SmAllocation) -> None:
    for t in ts.tasks:
        vs = alloc.virtual_sms(t.id)
        if t.gpu_segments:
            if vs < 2 or vs % 2 != 0:
                raise ValueError(f"task {t.id}: needs an even virtual-SM "
                                 f"count >= 2, got {vs}")
        elif vs != 0:
            raise ValueError(f"task {t.id}: pure-CPU task allocated SMs")
    if alloc.total_physical() > ts.platform.physical_sms:
        raise ValueError("allocation exceeds available physical SMs")


def simulate(ts: TaskSet, alloc: SmAllocation, cfg: SimConfig) -> SimTrace:
    violations = validate_taskset(ts)
    if violations:
        raise ValueError("invalid taskset: " + "; ".join(violations))
    check_allocation(ts, alloc)

    two_copy = ts.mem_model.value == "two_copy"
    horizon = cfg.horizon
    if horizon is None:
        horizon = 20 * max((t.period for t in ts.tasks), default=Fraction(1))

    rng = random.Random(cfg.seed)
    trace = SimTrace()
    tasks = ts.by_priority()
    prio = {t.id: t.priority for t in tasks}

    # Pre-scheduled releases, ordered by (time, priority) so sampling at
    # release time is deterministic.
    heap: list = []
    seq = 0

    def push(time, order, payload):
        nonlocal seq
        heapq.heappush(heap, (time, order, seq, payload))
        seq += 1

    release_points = []
    for t in tasks:
        k = 0
        while k * t.period < horizon:
            release_points.append((Fraction(k) * t.period, prio[t.id], t, k))
            k += 1
    release_points.sort(key=lambda r: (r[0], r[1]))
    for time, _, t, k in release_points:
        push(time, _RELEASE, ("release", t, k))

    cpu_running: Optional[_Job] = None
    cpu_run_token = 0
    cpu_ready: list[_Job] = []
    bus_busy: Optional[_Job] = None
    bus_queue: list[_Job] = []
    jobs: dict[tuple[str, int], _Job] = {}

    def emit(time, job: _Job, kind, segment, action):
        trace.events.append(SimEvent(time, job.task.id, job.index, kind,
                                     segment, action))

    def start_cpu(time, job: _Job, resumed: bool):
        nonlocal cpu_running, cpu_run_token
        cpu_running = job
        cpu_run_token += 1
        kind, idx, _ = job.current
        emit(time, job, kind, idx, "resume" if resumed else "start")
        if not resumed:
            job.seg_ready.setdefault((kind, idx), time)
        push(time + job.remaining, _FINISH,
             ("cpu_finish", job, cpu_run_token))

    def sched_cpu(time):
        nonlocal cpu_running
        if not cpu_ready:
            return
        cpu_ready.sort(key=lambda j: prio[j.task.id])
        top = cpu_ready[0]
        if cpu_running is None:
            cpu_ready.pop(0)
            already = top.remaining != top.current[2]
            start_cpu(time, top, already)
        elif prio[top.task.id] < prio[cpu_running.task.id]:
            # Preempt: compute remaining from the pending finish time.
            victim = cpu_running
            kind, idx, _ = victim.current
            finish_at = _pending_cpu_finish(victim)
            victim.remaining = finish_at - time
            emit(time, victim, kind, idx, "preempt")
            cpu_ready.append(victim)
            cpu_ready.pop(0)
            cpu_running = None
            start_cpu(time, top, top.remaining != top.current[2])

    def _pending_cpu_finish(job: _Job) -> Fraction:
        for time, order, _, payload in heap:
            if (order == _FINISH and payload[0] == "cpu_finish"
                    and payload[1] is job and payload[2] == cpu_run_token):
                return time
        raise AssertionError("running CPU job has no pending finish")

    def grant_bus(time):
        nonlocal bus_busy
        if bus_busy is not None or not bus_queue:
            return
        bus_queue.sort(key=lambda j: prio[j.task.id])
        job = bus_queue.pop(0)
        bus_busy = job
        kind, idx, dur = job.current
        emit(time, job, kind, idx, "start")
        job.seg_ready.setdefault((kind, idx), time)
        push(time + dur, _FINISH, ("bus_finish", job))

    def dispatch(time, job: _Job):
        """Route the job's current segment to its resource."""
        kind, idx, dur = job.current
        job.seg_ready.setdefault((kind, idx), time)
        if kind == "cpu":
            job.remaining = dur
            cpu_ready.append(job)
            sched_cpu(time)
        elif kind == "mem":
            bus_queue.append(job)
            grant_bus(time)
        else:  # dedicated SMs: starts immediately
            emit(time, job, kind, idx, "start")
            push(time + dur, _FINISH, ("gpu_finish", job))

    def advance(time, job: _Job):
        kind, idx, _ = job.current
        job.seg_finish[(kind, idx)] = time
        emit(time, job, kind, idx, "finish")
        job.pos += 1
        if job.pos == len(job.segments):
            job.done = True
            trace.responses[(job.task.id, job.index)] = time - job.release
            if time > job.deadline:
                emit(time, job, "job", -1, "deadline-miss")
        else:
            dispatch(time, job)

    while heap:
        time, order, _, payload = heapq.heappop(heap)
        if time > horizon:
            break
        tag = payload[0]
        if tag == "release":
            _, t, k = payload
            segments = _segment_lengths(t, alloc, two_copy,
                                        cfg.length_policy, rng)
            job = _Job(t, k, time, segments)
            jobs[(t.id, k)] = job
            trace.releases[(t.id, k)] = time
            trace.events.append(SimEvent(time, t.id, k, "job", -1, "release"))
            push(job.deadline, _DEADLINE, ("deadline", job))
            dispatch(time, job)
        elif tag == "cpu_finish":
            _, job, token = payload
            if token != cpu_run_token or cpu_running is not job:
                continue  # stale: the job was preempted
            cpu_running = None
            advance(time, job)
            sched_cpu(time)
        elif tag == "bus_finish":
            _, job = payload
            bus_busy = None
            advance(time, job)
            grant_bus(time)
        elif tag == "gpu_finish":
            _, job = payload
            advance(time, job)
        elif tag == "deadline":
            _, job = payload
            if not job.done:
                trace.events.append(SimEvent(
                    time, job.task.id, job.index, "job", -1, "deadline-miss"))

    for key, job in jobs.items():
        if not job.done:
            trace.truncated.append(key)
    return trace


def check_against_analysis(trace: SimTrace,
                           report: AnalysisReport) -> list[str]:
    """Compare observed behavior against an accepting analysis report.

    Returns one violation string per observed per-segment or end-to-end
    response above its bound, and per deadline miss.  Truncated jobs
    (unfinished at the horizon) are skipped.
    """
    if not report.schedulable:
        raise ValueError("report must be from an accepting analysis")
    out: list[str] = []
    truncated = set(trace.truncated)

    for e in trace.events:
        if e.action == "deadline-miss":
            out.append(f"task {e.task} job {e.job}: deadline miss at {e.time}")

    ready: dict[tuple[str, int, str, int], Fraction] = {}
    finish: dict[tuple[str, int, str, int], Fraction] = {}
    for e in trace.events:
        if e.kind == "job":
            continue
        key = (e.task, e.job, e.kind, e.segment)
        if e.action == "start":
            ready.setdefault(key, e.time)
        elif e.action == "finish":
            finish[key] = e.time

    for (task, jobidx, kind, seg), t_fin in finish.items():
        if (task, jobidx) in truncated:
            continue
        tr = report.per_task.get(task)
        if tr is None:
            continue
        resp = t_fin - ready[(task, jobidx, kind, seg)]
        bound = None
        if kind == "mem" and seg < len(tr.mem_r_up):
            bound = tr.mem_r_up[seg]
        elif kind == "cpu" and seg < len(tr.cpu_r_up):
            bound = tr.cpu_r_up[seg]
        elif kind == "gpu" and seg < len(tr.gpu_r):
            bound = tr.gpu_r[seg].hi
        if bound is not None and resp > bound:
            out.append(f"task {task} job {jobidx}: {kind} segment {seg} "
                       f"response {resp} > bound {bound}")

    for (task, jobidx), resp in trace.responses.items():
        tr = report.per_task.get(task)
        if tr is None or tr.end_to_end_up is None:
            continue
        if resp > tr.end_to_end_up:
            out.append(f"task {task} job {jobidx}: end-to-end response "
                       f"{resp} > bound {tr.end_to_end_up}")
    return out
