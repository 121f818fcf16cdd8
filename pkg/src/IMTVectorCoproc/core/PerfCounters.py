from enum import Enum
from dataclasses import dataclass, field
from typing import Dict, List
from IMTVectorCoproc.config import N_HARTS
from IMTVectorCoproc.isa.ISA import FunctionalUnitClass


class ReplayResource(Enum):
    MFU = "mfu"
    ADDER = "adder"
    MULTIPLIER = "multiplier"
    SHIFTER = "shifter"
    COMPARE = "compare"
    MOVE = "move"
    SPMI = "spmi"
    LSU = "lsu"
    RESULT_PENDING = "result-pending"


RESOURCE_OF_UNIT = {unit: ReplayResource(unit.value) for unit in FunctionalUnitClass}


@dataclass(frozen=True)
class ReplayEvent:
    hart: int
    pc: int
    resource: ReplayResource
    cycle: int


class UnitTimeline:
    """
    Busy interval bookkeeping of one serial resource (an MFU, a functional unit class, an SPMI or the LSU).
    """
    __slots__ = ("busy_until", "busy_cycles", "hart")

    def __init__(self) -> None:
        self.busy_until = 0
        self.busy_cycles = 0
        self.hart = None

    def busy(self, now):
        return now < self.busy_until

    def occupy(self, now, cycles, hart):
        end = now + cycles
        if now >= self.busy_until:
            self.busy_cycles += cycles
        elif end > self.busy_until:
            self.busy_cycles += end - self.busy_until
        self.busy_until = max(self.busy_until, end)
        self.hart = hart

    def busy_cycles_until(self, end):
        return self.busy_cycles - max(0, self.busy_until - end)


@dataclass
class PerfCounters:
    cycles: int = 0
    retired: List[int] = field(default_factory=lambda: [0] * N_HARTS)
    retired_vector: int = 0
    replays: Dict[str, int] = field(default_factory=lambda: {r.value: 0 for r in ReplayResource})
    replays_by_hart: List[int] = field(default_factory=lambda: [0] * N_HARTS)
    max_consecutive_replays: List[int] = field(default_factory=lambda: [0] * N_HARTS)
    fu_busy: Dict[str, int] = field(default_factory=lambda: {u.value: 0 for u in FunctionalUnitClass})
    mfu_busy: List[int] = field(default_factory=list)
    lsu_busy: int = 0
    spm_line_reads: int = 0
    spm_line_writes: int = 0
    vector_line_ops: int = 0
    mem_port_words: int = 0
    completions: List[List[int]] = field(default_factory=lambda: [[] for _ in range(N_HARTS)])

    @property
    def retired_total(self):
        return sum(self.retired)

    @property
    def retired_scalar(self):
        return self.retired_total - self.retired_vector

    @property
    def replays_total(self):
        return sum(self.replays.values())

    @property
    def spm_lines(self):
        return self.spm_line_reads + self.spm_line_writes

    @property
    def mfu_idle_cycles(self):
        return sum(max(0, self.cycles - busy) for busy in self.mfu_busy)

    @property
    def ipc(self):
        return self.retired_total / self.cycles if self.cycles else 0.0

    def record_replay(self, hart, resource, streak):
        self.replays[resource.value] += 1
        self.replays_by_hart[hart] += 1
        if streak > self.max_consecutive_replays[hart]:
            self.max_consecutive_replays[hart] = streak

    def to_dict(self):
        return dict(
            cycles=self.cycles,
            retired=list(self.retired),
            retired_total=self.retired_total,
            retired_vector=self.retired_vector,
            replays=dict(self.replays),
            replays_total=self.replays_total,
            replays_by_hart=list(self.replays_by_hart),
            max_consecutive_replays=list(self.max_consecutive_replays),
            fu_busy=dict(self.fu_busy),
            mfu_busy=list(self.mfu_busy),
            mfu_idle_cycles=self.mfu_idle_cycles,
            lsu_busy=self.lsu_busy,
            spm_line_reads=self.spm_line_reads,
            spm_line_writes=self.spm_line_writes,
            vector_line_ops=self.vector_line_ops,
            mem_port_words=self.mem_port_words,
            completions=[list(c) for c in self.completions],
        )
