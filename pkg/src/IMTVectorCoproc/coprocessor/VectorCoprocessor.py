import numpy as np
from loguru import logger
from IMTVectorCoproc.exceptions import SimulatorTrap
from IMTVectorCoproc.isa.ISA import InstrKind, FunctionalUnitClass, TRANSFER_KINDS, EWIDTHS, classify_unit
from IMTVectorCoproc.memory.Memory import LsuState, transfer_cycles
from IMTVectorCoproc.coprocessor.CoprocConfig import Scheme
from IMTVectorCoproc.core.PerfCounters import PerfCounters, ReplayResource, UnitTimeline, RESOURCE_OF_UNIT
from IMTVectorCoproc.config import N_HARTS

"""
MFU / SPM / SPMI subsystem: scratchpads, vector instruction semantics, latency model and the availability rules of the three sharing schemes.
"""

VECTOR_VECTOR = (InstrKind.KADDV, InstrKind.KSUBV, InstrKind.KVMUL, InstrKind.KVSLT)
SCALAR_FROM_SPM = (InstrKind.KSVADDSC, InstrKind.KSVMULS)
SCALAR_FROM_REGISTER = (InstrKind.KSVADDRF, InstrKind.KSVMULRF, InstrKind.KSVSLT)
DOT_PRODUCTS = (InstrKind.KDOTP, InstrKind.KDOTPPS)


def vector_latency(vlen, lanes, initial):
    """
    One D-bank SPM line (4*D bytes) per cycle after the SPM access latency.
    """
    if vlen <= 0:
        raise ValueError("vector length must be positive")
    return initial + (vlen + 4 * lanes - 1) // (4 * lanes)


def _lines(n_bytes, lanes):
    return (n_bytes + 4 * lanes - 1) // (4 * lanes)


def _wrap(values, ewidth):
    """
    Two's-complement wrap of int64 values to ewidth bits, returned as int64.
    """
    return values.astype(f"<i{ewidth // 8}").astype(np.int64)


class VectorCoprocessor:
    def __init__(self, cfg, counters=None, n_harts=N_HARTS) -> None:
        self.cfg = cfg
        self.n_harts = n_harts
        self.counters = counters if counters is not None else PerfCounters()
        self.spms = [[bytearray(cfg.spm_capacity) for _ in range(cfg.N)] for _ in range(cfg.M)]
        self.spmi = [UnitTimeline() for _ in range(cfg.M)]
        self.mfus = [UnitTimeline() for _ in range(cfg.F)]
        self.units = [{unit: UnitTimeline() for unit in FunctionalUnitClass} for _ in range(cfg.F)]
        self.lsu = LsuState()
        self.lsu_timeline = UnitTimeline()
        self.pending_writes = []  # (ready cycle, hart, rd, value)

    def spmi_of(self, hart):
        return 0 if self.cfg.scheme is Scheme.SHARED else hart

    def mfu_of(self, hart):
        return hart if self.cfg.scheme is Scheme.DEDICATED else 0

    def map_spm_address(self, addr, hart, span=1):
        """
        Decomposes an SPM byte address into (spmi, spm, offset) for the SPMI the hart is bound to.
        :param: addr int byte address inside the SPM space.
        :param: hart int hart id.
        :param: span int bytes accessed from addr; must stay inside one scratchpad.
        """
        cfg = self.cfg
        rel = addr - cfg.spm_base
        if rel < 0 or rel >= cfg.spm_space:
            raise SimulatorTrap("address outside the scratchpad space", address=addr)
        spm, offset = divmod(rel, cfg.spm_capacity)
        if offset + span > cfg.spm_capacity:
            raise SimulatorTrap(f"operand of {span} bytes crosses scratchpad {spm}", address=addr)
        return self.spmi_of(hart), spm, offset

    # ------------------------------------------------------------------ availability

    def availability(self, i, hart, now):
        """
        :return: None when the instruction can issue at cycle now, otherwise (ReplayResource, cycle the resource frees).
        """
        spmi = self.spmi[self.spmi_of(hart)]
        if i.kind in TRANSFER_KINDS:
            if self.lsu.busy(now):
                return ReplayResource.LSU, self.lsu.busy_until
            if spmi.busy(now):
                return ReplayResource.SPMI, spmi.busy_until
            return None
        scheme = self.cfg.scheme
        if scheme is Scheme.SHARED:
            until = max(self.mfus[0].busy_until, spmi.busy_until)
            return (ReplayResource.MFU, until) if now < until else None
        if scheme is Scheme.DEDICATED:
            mfu = self.mfus[hart]
            if mfu.busy(now):
                return ReplayResource.MFU, mfu.busy_until
            if spmi.busy(now):
                return ReplayResource.SPMI, spmi.busy_until
            return None
        if spmi.busy(now):
            return ReplayResource.SPMI, spmi.busy_until
        unit = classify_unit(i)
        timeline = self.units[0][unit]
        if timeline.busy(now):
            return RESOURCE_OF_UNIT[unit], timeline.busy_until
        return None

    # ------------------------------------------------------------------ issue

    def issue(self, i, ctx, memory, now):
        """
        Executes a vector instruction of hart ctx at cycle now and occupies the resources it needs.
        :return: latency in cycles.
        """
        hart = ctx.hartid
        spmi = self.spmi_of(hart)
        if i.kind in TRANSFER_KINDS:
            latency = self.exec_transfer(i, ctx, memory)
            self.lsu.occupy(hart, now, latency, self.cfg.initial_latency)
            self.lsu_timeline.occupy(now, latency, hart)
            self.spmi[spmi].occupy(now, latency, hart)
            return latency
        latency = self.exec_vector(i, ctx, now)
        mfu = self.mfu_of(hart)
        self.mfus[mfu].occupy(now, latency, hart)
        self.units[mfu][classify_unit(i)].occupy(now, latency, hart)
        self.spmi[spmi].occupy(now, latency, hart)
        return latency

    def _vector_shape(self, ctx):
        ewidth, vlen = ctx.ctrl.ewidth, ctx.ctrl.vlen
        if ewidth not in EWIDTHS:
            raise SimulatorTrap(f"element width {ewidth} not supported")
        if vlen == 0 or vlen % (ewidth // 8):
            raise SimulatorTrap(f"vector length {vlen} is not a positive multiple of {ewidth // 8} bytes")
        return vlen, ewidth

    def read_vector(self, addr, hart, vlen, ewidth):
        spmi, spm, offset = self.map_spm_address(addr, hart, vlen)
        raw = bytes(self.spms[spmi][spm][offset:offset + vlen])
        return np.frombuffer(raw, dtype=f"<i{ewidth // 8}").astype(np.int64)

    def write_vector(self, addr, hart, values, ewidth):
        data = np.asarray(values, dtype=np.int64).astype(f"<i{ewidth // 8}").tobytes()
        spmi, spm, offset = self.map_spm_address(addr, hart, len(data))
        self.spms[spmi][spm][offset:offset + len(data)] = data

    def exec_vector(self, i, ctx, now):
        """
        Vector arithmetic semantics. Elements are two's-complement, ewidth bits wide, arithmetic wraps; accumulations use 64 bits.
        """
        hart = ctx.hartid
        vlen, ewidth = self._vector_shape(ctx)
        regs = ctx.regs
        kind = i.kind
        lanes = self.cfg.D
        lines = _lines(vlen, lanes)
        latency = vector_latency(vlen, lanes, self.cfg.initial_latency)
        a = self.read_vector(regs[i.rs1], hart, vlen, ewidth)
        reads, writes = lines, lines
        if kind in VECTOR_VECTOR or kind in DOT_PRODUCTS:
            b = self.read_vector(regs[i.rs2], hart, vlen, ewidth)
            reads += lines
        elif kind in SCALAR_FROM_SPM:
            b = self.read_vector(regs[i.rs2], hart, ewidth // 8, ewidth)[0]
            reads += 1
        elif kind in SCALAR_FROM_REGISTER:
            b = _wrap(np.array([regs[i.rs2]], dtype=np.int64), ewidth)[0]

        if kind in DOT_PRODUCTS:
            acc = int(np.sum(a * b, dtype=np.int64))
            if kind is InstrKind.KDOTPPS:
                pscale = ctx.ctrl.pscale
                if pscale > 31:
                    raise SimulatorTrap(f"post-scaling shift {pscale} out of range")
                acc >>= pscale
            self.pending_writes.append((now + latency, hart, i.rd, acc & 0xFFFFFFFF))
            writes = 0
        elif kind is InstrKind.KVRED:
            total = int(np.sum(a, dtype=np.int64))
            self.write_vector(regs[i.rd], hart, _wrap(np.array([total], dtype=np.int64), ewidth), ewidth)
            writes = 1
        else:
            if kind in (InstrKind.KADDV, InstrKind.KSVADDSC, InstrKind.KSVADDRF):
                c = a + b
            elif kind is InstrKind.KSUBV:
                c = a - b
            elif kind in (InstrKind.KVMUL, InstrKind.KSVMULS, InstrKind.KSVMULRF):
                c = a * b
            elif kind in (InstrKind.KSRLV, InstrKind.KSRAV):
                shift = regs[i.rs2] % ewidth
                if kind is InstrKind.KSRAV:
                    c = a >> shift
                else:
                    c = (a & ((1 << ewidth) - 1)) >> shift
            elif kind is InstrKind.KRELU:
                c = np.maximum(a, 0)
            elif kind in (InstrKind.KVSLT, InstrKind.KSVSLT):
                c = (a < b).astype(np.int64)
            elif kind is InstrKind.KVCP:
                c = a
            else:
                raise SimulatorTrap(f"{kind.value} is not a vector arithmetic instruction")
            self.write_vector(regs[i.rd], hart, c, ewidth)
        counters = self.counters
        counters.spm_line_reads += reads
        counters.spm_line_writes += writes
        counters.vector_line_ops += lines
        return latency

    def exec_transfer(self, i, ctx, memory):
        """
        kmemld copies count bytes main memory -> SPM, kmemstr SPM -> main memory; count is register rs2.
        """
        hart = ctx.hartid
        regs = ctx.regs
        count = regs[i.rs2]
        if count == 0:
            raise SimulatorTrap("vector transfer of 0 bytes")
        if i.kind is InstrKind.KMEMLD:
            spmi, spm, offset = self.map_spm_address(regs[i.rd], hart, count)
            self.spms[spmi][spm][offset:offset + count] = memory.read_block(regs[i.rs1], count)
            self.counters.spm_line_writes += _lines(count, self.cfg.D)
        else:
            spmi, spm, offset = self.map_spm_address(regs[i.rs1], hart, count)
            memory.write_block(regs[i.rd], bytes(self.spms[spmi][spm][offset:offset + count]))
            self.counters.spm_line_reads += _lines(count, self.cfg.D)
        memory.port_words += (count + 3) // 4
        return transfer_cycles(count, self.cfg.initial_latency)

    # ------------------------------------------------------------------ result writes

    def land_writes(self, now, harts):
        """
        Applies register writes of dot products whose result is ready at cycle now.
        """
        if not self.pending_writes:
            return
        remaining = []
        for ready, hart, rd, value in self.pending_writes:
            if ready <= now:
                harts[hart].write(rd, value)
            else:
                remaining.append((ready, hart, rd, value))
        self.pending_writes = remaining

    def next_write(self):
        return min((w[0] for w in self.pending_writes), default=None)

    # ------------------------------------------------------------------ reporting

    def settle(self, end):
        """
        Copies busy-cycle totals up to cycle end into the counters.
        """
        counters = self.counters
        counters.mfu_busy = [mfu.busy_cycles_until(end) for mfu in self.mfus]
        for unit in FunctionalUnitClass:
            counters.fu_busy[unit.value] = sum(units[unit].busy_cycles_until(end) for units in self.units)
        counters.lsu_busy = self.lsu_timeline.busy_cycles_until(end)
        logger.debug(f"MFU busy {counters.mfu_busy}, LSU busy {counters.lsu_busy} over {end} cycles")

    def dump_scratchpads(self):
        """
        :return: dict (spmi, spm) -> int64 words in logical order.
        """
        return {
            (m, n): np.frombuffer(bytes(spm), dtype="<i4").astype(np.int64)
            for m, spmi in enumerate(self.spms) for n, spm in enumerate(spmi)
        }
