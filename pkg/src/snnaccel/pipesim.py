"""Discrete-event simulation of the layer-wise pipeline.

Stages are single servers with bounded input FIFOs. A stage starts a unit
of work once its inputs are queued and it is idle; a finished unit is
handed downstream only when the next FIFO has space, otherwise the stage
blocks (backpressure). The frame-granularity mode (one unit per frame)
reproduces the analytical steady-state model exactly when FIFOs are
unbounded; the unit-granularity mode streams pixels and is what the FIFO
sizing uses.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class StageModel:
    """One pipeline station.

    service_cycles is the time per output unit. units_in / units_out give
    how many stream units one frame occupies on each side of the stage
    (both 1 for frame-granularity modeling). capacity bounds the input
    FIFO in units; None means unbounded.
    """

    label: str
    service_cycles: int
    units_in: int = 1
    units_out: int = 1
    capacity: int | None = None

    def __post_init__(self):
        if self.service_cycles < 1:
            raise ValueError("service_cycles must be >= 1")
        if self.units_in < 1 or self.units_out < 1:
            raise ValueError("unit counts must be >= 1")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be >= 1")

    def min_capacity(self) -> int:
        """Largest single-start consumption burst; smaller FIFOs deadlock."""
        return max(
            math.ceil((j + 1) * self.units_in / self.units_out)
            - math.ceil(j * self.units_in / self.units_out)
            for j in range(self.units_out)
        )


@dataclass
class PipelineTrace:
    starts: list        # starts[f][s]: service start of frame f at stage s
    finishes: list      # finishes[f][s]: service finish of frame f at stage s
    makespan: int
    avg_latency: float
    max_occupancy: list  # per stage, in units


class _Station:
    __slots__ = ("model", "fifo", "cap", "consumed", "started", "done",
                 "busy", "holding", "max_occ", "targets")

    def __init__(self, model: StageModel, frames: int):
        self.model = model
        self.fifo = 0
        self.cap = model.capacity
        self.consumed = 0
        self.started = 0   # output units whose service has begun
        self.done = 0      # output units delivered downstream
        self.busy = False
        self.holding = False
        self.max_occ = 0
        total_out = frames * model.units_out
        # cumulative input units required before output unit j can start
        self.targets = [math.ceil((j + 1) * model.units_in / model.units_out)
                        for j in range(total_out)]

    def space(self) -> int:
        if self.cap is None:
            return 1 << 62
        return self.cap - self.fifo

    def accept(self, n: int) -> None:
        self.fifo += n
        if self.fifo > self.max_occ:
            self.max_occ = self.fifo

    def can_start(self) -> bool:
        if self.busy or self.holding or self.started >= len(self.targets):
            return False
        need = self.targets[self.started] - self.consumed
        return self.fifo >= need


def simulate_units(stages: list, frames: int) -> PipelineTrace:
    """Run the event loop at whatever unit granularity the stages declare."""
    if frames < 1:
        raise ValueError("frame count must be >= 1")
    if not stages:
        raise ValueError("need at least one stage")
    for s in stages:
        if s.capacity is not None and s.capacity < s.min_capacity():
            raise ValueError(
                f"stage {s.label}: capacity {s.capacity} below the "
                f"minimum burst {s.min_capacity()}")

    n_stages = len(stages)
    stations = [_Station(m, frames) for m in stages]
    source_left = frames * stages[0].units_in
    unit_starts = [[0] * (frames * m.units_out) for m in stages]
    unit_finishes = [[0] * (frames * m.units_out) for m in stages]

    events: list = []  # (time, seq, stage index)
    seq = 0
    clock = 0

    def progress(now: int) -> None:
        nonlocal source_left, seq
        moved = True
        while moved:
            moved = False
            # Downstream first so freed slots propagate upstream within one
            # instant.
            for i in range(n_stages - 1, -1, -1):
                st = stations[i]
                if st.holding:
                    if i == n_stages - 1:
                        st.holding = False
                        st.done += 1
                        moved = True
                    elif stations[i + 1].space() >= 1:
                        stations[i + 1].accept(1)
                        st.holding = False
                        st.done += 1
                        moved = True
                if i == 0 and source_left:
                    room = st.space()
                    if room > 0:
                        take = min(room, source_left)
                        st.accept(take)
                        source_left -= take
                        moved = True
                if st.can_start():
                    need = st.targets[st.started] - st.consumed
                    st.fifo -= need
                    st.consumed += need
                    unit_starts[i][st.started] = now
                    st.started += 1
                    st.busy = True
                    heapq.heappush(events, (now + st.model.service_cycles, seq, i))
                    seq += 1
                    moved = True

    progress(0)
    while events:
        clock, _, i = heapq.heappop(events)
        st = stations[i]
        st.busy = False
        st.holding = True
        unit_finishes[i][st.started - 1] = clock
        progress(clock)

    starts = [[unit_starts[s][f * stages[s].units_out] for s in range(n_stages)]
              for f in range(frames)]
    finishes = [[unit_finishes[s][(f + 1) * stages[s].units_out - 1]
                 for s in range(n_stages)]
                for f in range(frames)]
    makespan = finishes[-1][-1]
    return PipelineTrace(starts, finishes, makespan, makespan / frames,
                         [st.max_occ for st in stations])


def simulate(stages: list, frames: int) -> PipelineTrace:
    """Frame-granularity simulation: one service unit per frame per stage."""
    coarse = [StageModel(s.label, s.service_cycles, 1, 1, s.capacity)
              for s in stages]
    return simulate_units(coarse, frames)


@dataclass(frozen=True)
class ModelComparison:
    sim_makespan: int
    model_makespan: int
    abs_gap: int
    rel_gap: float
    capacity_limited: bool


def compare_to_model(trace: PipelineTrace, analytical: tuple) -> ModelComparison:
    """Gap between a simulated trace and the (makespan, avg) analytical pair."""
    model_makespan = analytical[0]
    gap = trace.makespan - model_makespan
    rel = gap / model_makespan if model_makespan else 0.0
    return ModelComparison(trace.makespan, model_makespan, gap, rel,
                           capacity_limited=gap > 0)


def size_fifos(stages: list, frames: int = 32, tolerance: float = 0.01) -> list:
    """Smallest per-stage FIFO capacities keeping the makespan within
    `tolerance` of the unbounded-FIFO makespan.

    Stages are sized downstream first; each search is a doubling phase plus
    binary search with the other stages held at their current values
    (unbounded if not yet sized). Deterministic for a given stage list.
    """
    unbounded = [StageModel(s.label, s.service_cycles, s.units_in, s.units_out, None)
                 for s in stages]
    baseline = simulate_units(unbounded, frames).makespan
    bound = baseline * (1.0 + tolerance)

    caps: list = [None] * len(stages)

    def run_with(caps_now: list) -> int:
        trial = [StageModel(s.label, s.service_cycles, s.units_in, s.units_out, c)
                 for s, c in zip(stages, caps_now)]
        return simulate_units(trial, frames).makespan

    for i in range(len(stages) - 1, -1, -1):
        lo = stages[i].min_capacity()
        hi = lo
        caps[i] = hi
        while run_with(caps) > bound:
            hi *= 2
            caps[i] = hi
        while lo < hi:
            mid = (lo + hi) // 2
            caps[i] = mid
            if run_with(caps) <= bound:
                hi = mid
            else:
                lo = mid + 1
        caps[i] = hi
    return caps
