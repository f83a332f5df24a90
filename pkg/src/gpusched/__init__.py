"""Schedulability analysis, taskset generation, and simulation for
hard-real-time CPU-memory-GPU task systems."""
from .analysis import (
    analyze,
    analyze_busy_waiting_baseline,
    analyze_rtgpu,
    analyze_self_suspension_baseline,
    cpu_response,
    end_to_end,
    mem_response,
)
from .gpu import feasible_allocations, gpu_response_bounds, kernel_time
from .model import (
    AnalysisMethod,
    AnalysisReport,
    ExecBounds,
    GpuKernelModel,
    MemModel,
    PlatformConfig,
    SmAllocation,
    TaskReport,
    TaskSet,
    TaskSpec,
    TasksetFormatError,
    load_report,
    load_taskset,
    save_report,
    save_taskset,
    validate_taskset,
)
from .simulator import LengthPolicy, SimConfig, SimTrace, check_against_analysis, simulate
from .suspension import SuspTask, max_workload, segment_response, task_response, workload
from .workbench import (
    GenParams,
    SweepConfig,
    ThroughputScope,
    acceptance_sweep,
    generate_taskset,
    merge_memory_copies,
    sweep_to_csv,
    throughput_improvement,
)

__all__ = [
    "AnalysisMethod",
    "AnalysisReport",
    "ExecBounds",
    "GenParams",
    "GpuKernelModel",
    "LengthPolicy",
    "MemModel",
    "PlatformConfig",
    "SimConfig",
    "SimTrace",
    "SmAllocation",
    "SuspTask",
    "SweepConfig",
    "TaskReport",
    "TaskSet",
    "TaskSpec",
    "TasksetFormatError",
    "ThroughputScope",
    "acceptance_sweep",
    "analyze",
    "analyze_busy_waiting_baseline",
    "analyze_rtgpu",
    "analyze_self_suspension_baseline",
    "check_against_analysis",
    "cpu_response",
    "end_to_end",
    "feasible_allocations",
    "generate_taskset",
    "gpu_response_bounds",
    "kernel_time",
    "load_report",
    "load_taskset",
    "max_workload",
    "mem_response",
    "merge_memory_copies",
    "save_report",
    "save_taskset",
    "segment_response",
    "simulate",
    "sweep_to_csv",
    "task_response",
    "throughput_improvement",
    "validate_taskset",
    "workload",
]
