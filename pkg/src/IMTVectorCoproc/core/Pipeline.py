from dataclasses import dataclass, field
from typing import Dict, Optional, TextIO
from loguru import logger
from IMTVectorCoproc.exceptions import SimulatorTrap
from IMTVectorCoproc.isa.ISA import InstrKind, HartContext, VECTOR_KINDS, MASK32, s32, u32, writes_register
from IMTVectorCoproc.memory.Memory import MainMemory
from IMTVectorCoproc.coprocessor.VectorCoprocessor import VectorCoprocessor
from IMTVectorCoproc.core.PerfCounters import PerfCounters, ReplayResource, ReplayEvent
from IMTVectorCoproc.config import N_HARTS, N_STAGES, DATA_MEMORY_SIZE, PROGRAM_MEMORY_SIZE, LOAD_LATENCY

"""
Four-stage interleaved-multithreading pipeline. The hardware context counter (harc) picks the fetching hart round robin,
branches resolve in execute, and a hart whose coprocessor request finds a busy resource re-fetches the same pc (replay).
"""

FETCH, DECODE, EXECUTE, WRITEBACK = range(N_STAGES)
STAGE_NAMES = ("F", "D", "E", "WB")

FETCHED, ISSUED, REPLAYED = "fetched", "issued", "replayed"

LOAD_WIDTHS = dict(lb=(8, True), lh=(16, True), lw=(32, True), lbu=(8, False), lhu=(16, False))
STORE_WIDTHS = dict(sb=8, sh=16, sw=32)


@dataclass
class SimConfig:
    data_memory_size: int = DATA_MEMORY_SIZE
    program_memory_size: int = PROGRAM_MEMORY_SIZE
    load_latency: int = LOAD_LATENCY
    check_invariants: bool = False
    fast_forward: bool = True
    record_events: bool = False
    trace: Optional[TextIO] = None


@dataclass
class StopCondition:
    max_cycles: Optional[int] = None
    all_halted: bool = True
    instances: Dict[int, int] = field(default_factory=dict)  # hart -> completed instances to wait for


class Slot:
    __slots__ = ("hart", "pc", "instr", "state", "write")

    def __init__(self, hart, pc, instr) -> None:
        self.hart = hart
        self.pc = pc
        self.instr = instr
        self.state = FETCHED
        self.write = None

    def __str__(self):
        mark = "*" if self.state == REPLAYED else ""
        return f"h{self.hart}:{self.pc:08x}{mark}"


class Core:
    def __init__(self, program, cfg, entries, sim=None, memory=None) -> None:
        """
        :param: program Program the harts execute.
        :param: cfg CoprocConfig design point of the vector coprocessor.
        :param: entries dict hart id -> start pc or label; harts without an entry stay halted.
        :param: sim SimConfig simulator knobs.
        :param: memory MainMemory to run on, a fresh one is created if omitted.
        """
        self.sim = sim if sim is not None else SimConfig()
        if 4 * len(program) > self.sim.program_memory_size:
            raise ValueError(f"program of {len(program)} instructions exceeds program memory")
        self.program = program
        self.cfg = cfg
        self.memory = memory if memory is not None else MainMemory(self.sim.data_memory_size)
        for addr, word in program.data:
            self.memory.load_words(addr, [word])
        self.counters = PerfCounters()
        self.coproc = VectorCoprocessor(cfg, self.counters)
        self.lsu = self.coproc.lsu
        self.harts = [HartContext(h) for h in range(N_HARTS)]
        for hart in self.harts:
            entry = entries.get(hart.hartid)
            if isinstance(entry, str):
                entry = program.address_of(entry)
            if entry is None or not program.contains(entry):
                hart.halted = True
            else:
                hart.pc = entry
        self.stages = [None] * N_STAGES
        self.harc = 0
        self.cycle = 0
        self.result_ready = [0] * N_HARTS
        self.waiting = [False] * N_HARTS
        self.streak = [0] * N_HARTS
        self.watch = dict()  # store address -> hart whose instance completion it marks
        self.events = []
        self._cycle_events = []
        if self.sim.trace is not None:
            self.sim.trace.write("cycle\tharc\tF\tD\tE\tWB\treplays\n")
        logger.debug(f"Core ready, entries {entries}, {cfg.label}, scheme {cfg.scheme.value}")

    # ------------------------------------------------------------------ stepping

    def step(self):
        """
        Advances the machine by exactly one clock cycle.
        """
        now = self.cycle
        self.coproc.land_writes(now, self.harts)
        retiring = self.stages[WRITEBACK]
        if retiring is not None and retiring.state == ISSUED:
            if retiring.write is not None:
                self.harts[retiring.hart].write(*retiring.write)
            self.counters.retired[retiring.hart] += 1
            if retiring.instr.kind in VECTOR_KINDS:
                self.counters.retired_vector += 1
        self.stages = [self._fetch(), self.stages[FETCH], self.stages[DECODE], self.stages[EXECUTE]]
        executing = self.stages[EXECUTE]
        if executing is not None:
            self._execute(executing, now)
        if self.sim.trace is not None:
            self._trace_line(now)
        if self.sim.check_invariants:
            self.check_invariants()
        self.harc = (self.harc + 1) % N_HARTS
        self.cycle += 1
        self.counters.cycles = self.cycle

    def _fetch(self):
        hart = self.harts[self.harc]
        if hart.halted:
            return None
        if not self.program.contains(hart.pc):
            raise SimulatorTrap("instruction fetch outside the program", hart.hartid, hart.pc)
        return Slot(hart.hartid, hart.pc, self.program.instrs[self.program.index_of(hart.pc)])

    def _execute(self, slot, now):
        h = slot.hart
        blocked = self.blocked(h, slot.instr, now)
        if blocked is not None:
            resource = blocked[0]
            slot.state = REPLAYED
            self.waiting[h] = True
            self.streak[h] += 1
            self.counters.record_replay(h, resource, self.streak[h])
            if self.sim.record_events or self.sim.trace is not None:
                event = ReplayEvent(h, slot.pc, resource, now)
                self._cycle_events.append(event)
                if self.sim.record_events:
                    self.events.append(event)
            return
        self.waiting[h] = False
        self.streak[h] = 0
        ctx = self.harts[h]
        try:
            ctx.pc = self._issue(slot, ctx, now)
        except SimulatorTrap as e:
            raise e.at(h, slot.pc)
        slot.state = ISSUED

    def blocked(self, h, i, now):
        """
        Availability check done in execute.
        :return: None if the instruction issues at cycle now, else (ReplayResource, cycle that resource frees).
        """
        if now < self.result_ready[h]:
            return ReplayResource.RESULT_PENDING, self.result_ready[h]
        kind = i.kind
        if kind in VECTOR_KINDS:
            return self.coproc.availability(i, h, now)
        if kind is InstrKind.LOAD and self.lsu.busy(now):
            return ReplayResource.LSU, self.lsu.busy_until
        if kind is InstrKind.STORE and not self.lsu.port_free(now):
            return ReplayResource.LSU, self.lsu.busy_until
        return None

    # ------------------------------------------------------------------ execution

    def _issue(self, slot, ctx, now):
        i = slot.instr
        kind = i.kind
        pc = slot.pc
        if kind in VECTOR_KINDS:
            latency = self.coproc.issue(i, ctx, self.memory, now)
            if writes_register(i):
                self.result_ready[ctx.hartid] = now + latency
            return pc + 4
        if kind is InstrKind.BRANCH:
            return pc + i.imm if self._branch_taken(i, ctx) else pc + 4
        if kind is InstrKind.JUMP:
            slot.write = (i.rd, pc + 4)
            return u32(pc + i.imm)
        if kind is InstrKind.JUMP_REG:
            slot.write = (i.rd, pc + 4)
            target = u32(ctx.regs[i.rs1] + i.imm) & ~1
            if target % 4:
                raise SimulatorTrap("misaligned jump target", address=target)
            return target
        if kind is InstrKind.LOAD:
            width, signed = LOAD_WIDTHS[i.op]
            slot.write = (i.rd, self.memory.read(u32(ctx.regs[i.rs1] + i.imm), width, signed))
            self.result_ready[ctx.hartid] = now + self.sim.load_latency
            return pc + 4
        if kind is InstrKind.STORE:
            addr = u32(ctx.regs[i.rs1] + i.imm)
            self.memory.write(addr, STORE_WIDTHS[i.op], ctx.regs[i.rs2])
            if addr in self.watch and self.watch[addr] == ctx.hartid:
                self.counters.completions[ctx.hartid].append(now)
            return pc + 4
        if kind is InstrKind.CSR:
            slot.write = (i.rd, self._csr(i, ctx, now))
            return pc + 4
        if kind is InstrKind.HALT:
            ctx.halted = True
            return pc
        slot.write = (i.rd, execute_scalar(i, ctx, pc))
        return pc + 4

    @staticmethod
    def _branch_taken(i, ctx):
        a, b = ctx.regs[i.rs1], ctx.regs[i.rs2]
        op = i.op
        if op == "beq":
            return a == b
        if op == "bne":
            return a != b
        if op == "blt":
            return s32(a) < s32(b)
        if op == "bge":
            return s32(a) >= s32(b)
        if op == "bltu":
            return a < b
        return a >= b

    @staticmethod
    def _csr(i, ctx, now):
        csr = i.imm & 0xFFF
        old = ctx.ctrl.read(csr, now)
        source = i.rs1 if i.op.endswith("i") else ctx.regs[i.rs1]
        if i.op in ("csrrw", "csrrwi"):
            ctx.ctrl.write(csr, source)
        elif i.rs1 != 0:
            ctx.ctrl.write(csr, old | source if i.op in ("csrrs", "csrrsi") else old & ~source)
        return old

    # ------------------------------------------------------------------ running

    def run(self, stop=None):
        """
        Steps until the stop condition holds.
        :param: stop StopCondition; by default runs until every hart halted.
        :return: PerfCounters with per-hart completion timestamps.
        """
        stop = stop if stop is not None else StopCondition()
        try:
            while not self._stopped(stop):
                if self.sim.fast_forward:
                    self._fast_forward(stop.max_cycles)
                    if stop.max_cycles is not None and self.cycle >= stop.max_cycles:
                        break
                self.step()
        except SimulatorTrap:
            logger.error(f"Trap at cycle {self.cycle}\n{self.state_dump()}")
            raise
        self.coproc.settle(self.cycle)
        self.counters.mem_port_words = self.memory.port_words
        return self.counters

    def _stopped(self, stop):
        if stop.max_cycles is not None and self.cycle >= stop.max_cycles:
            return True
        if stop.instances:
            return all(
                self.harts[h].halted or len(self.counters.completions[h]) >= n for h, n in stop.instances.items()
            )
        if stop.all_halted:
            return self.drained()
        return False

    def drained(self):
        return all(h.halted for h in self.harts) and all(
            s is None or s.state != ISSUED for s in self.stages[EXECUTE:]
        ) and self.stages[FETCH] is None and self.stages[DECODE] is None

    def _fast_forward(self, limit):
        """
        Skips whole harc rotations while every running hart keeps replaying on a resource with a known release cycle.
        The machine state is periodic over such rotations, so only the counters move.
        """
        if self.sim.trace is not None or self.sim.record_events or self.sim.check_invariants:
            return
        retiring = self.stages[WRITEBACK]
        if retiring is not None and retiring.state == ISSUED:
            return
        now = self.cycle
        horizon = None
        stalled = []
        for hart in self.harts:
            if hart.halted:
                continue
            h = hart.hartid
            if not self.waiting[h]:
                return
            blocked = self.blocked(h, self.program.instrs[self.program.index_of(hart.pc)], now)
            if blocked is None:
                return
            stalled.append((h, blocked[0]))
            horizon = blocked[1] if horizon is None else min(horizon, blocked[1])
        if horizon is None:
            return
        landing = self.coproc.next_write()
        if landing is not None:
            horizon = min(horizon, landing)
        rotations = (horizon - now - N_HARTS) // N_HARTS
        if limit is not None:
            rotations = min(rotations, (limit - now) // N_HARTS)
        if rotations < 1:
            return
        counters = self.counters
        for h, resource in stalled:
            self.streak[h] += rotations
            counters.replays[resource.value] += rotations
            counters.replays_by_hart[h] += rotations
            counters.max_consecutive_replays[h] = max(counters.max_consecutive_replays[h], self.streak[h])
        self.cycle += N_HARTS * rotations
        counters.cycles = self.cycle

    # ------------------------------------------------------------------ diagnostics

    def check_invariants(self):
        """
        Hazard fence: two in-flight instructions of one hart are at least 3 stages apart. x0 stays 0.
        """
        for a in range(N_STAGES):
            for b in range(a + 1, N_STAGES):
                sa, sb = self.stages[a], self.stages[b]
                if sa is not None and sb is not None and sa.hart == sb.hart and b - a < N_HARTS:
                    raise AssertionError(f"hazard fence violated at cycle {self.cycle}: {sa} in {STAGE_NAMES[a]}, {sb} in {STAGE_NAMES[b]}")
        for hart in self.harts:
            if hart.regs[0] != 0:
                raise AssertionError(f"x0 of hart {hart.hartid} is {hart.regs[0]}")

    def _trace_line(self, now):
        occupancy = "\t".join(str(s) if s is not None else "-" for s in self.stages)
        replays = ",".join(f"h{e.hart}@{e.pc:08x}:{e.resource.value}" for e in self._cycle_events) or "-"
        self.sim.trace.write(f"{now}\t{self.harc}\t{occupancy}\t{replays}\n")
        self._cycle_events = []

    def state_dump(self):
        lines = [f"cycle={self.cycle} harc={self.harc} stages=" + " ".join(str(s) if s else "-" for s in self.stages)]
        for hart in self.harts:
            regs = " ".join(f"x{n}={v:08x}" for n, v in enumerate(hart.regs) if v)
            lines.append(f"hart {hart.hartid} pc={hart.pc:08x} halted={hart.halted} {regs}")
        return "\n".join(lines)


def execute_scalar(i, ctx, pc=0):
    """
    RV32IM register-register, register-immediate, upper-immediate and multiply/divide semantics.
    :return: the 32-bit value written to rd.
    """
    op = i.op
    a = ctx.regs[i.rs1]
    if i.kind is InstrKind.UPPER_IMM:
        return u32(i.imm) if op == "lui" else u32(pc + i.imm)
    b = u32(i.imm) if i.kind is InstrKind.ALU_IMM else ctx.regs[i.rs2]
    if op in ("add", "addi"):
        return (a + b) & MASK32
    if op == "sub":
        return (a - b) & MASK32
    if op in ("sll", "slli"):
        return (a << (b & 31)) & MASK32
    if op in ("srl", "srli"):
        return a >> (b & 31)
    if op in ("sra", "srai"):
        return u32(s32(a) >> (b & 31))
    if op in ("slt", "slti"):
        return int(s32(a) < s32(b))
    if op in ("sltu", "sltiu"):
        return int(a < b)
    if op in ("xor", "xori"):
        return a ^ b
    if op in ("or", "ori"):
        return a | b
    if op in ("and", "andi"):
        return a & b
    sa, sb = s32(a), s32(b)
    if op == "mul":
        return (sa * sb) & MASK32
    if op == "mulh":
        return u32((sa * sb) >> 32)
    if op == "mulhsu":
        return u32((sa * b) >> 32)
    if op == "mulhu":
        return u32((a * b) >> 32)
    if op == "div":
        if b == 0:
            return MASK32
        if sa == -(1 << 31) and sb == -1:
            return a
        return u32(_truncated_quotient(sa, sb))
    if op == "divu":
        return MASK32 if b == 0 else a // b
    if op == "rem":
        if b == 0:
            return a
        if sa == -(1 << 31) and sb == -1:
            return 0
        return u32(sa - sb * _truncated_quotient(sa, sb))
    if op == "remu":
        return a if b == 0 else a % b
    raise SimulatorTrap(f"illegal instruction {op}")


def _truncated_quotient(a, b):
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q
