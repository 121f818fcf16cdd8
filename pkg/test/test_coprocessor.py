import pytest
from IMTVectorCoproc.exceptions import ConfigError, SimulatorTrap
from IMTVectorCoproc.isa.ISA import Instruction, InstrKind, HartContext
from IMTVectorCoproc.memory.Memory import MainMemory
from IMTVectorCoproc.coprocessor.CoprocConfig import CoprocConfig, Scheme, design_grid
from IMTVectorCoproc.coprocessor.VectorCoprocessor import VectorCoprocessor, vector_latency
from IMTVectorCoproc.core.PerfCounters import ReplayResource
from IMTVectorCoproc.config import SPM_BASE, SPM_CAPACITY

A, B, C = SPM_BASE, SPM_BASE + 64, SPM_BASE + SPM_CAPACITY


def _machine(scheme=Scheme.SHARED, d=1, words=4, ewidth=32):
    coproc = VectorCoprocessor(CoprocConfig(scheme=scheme, D=d))
    ctx = HartContext(0)
    ctx.ctrl.vlen = words * ewidth // 8
    ctx.ctrl.ewidth = ewidth
    ctx.write(1, A)
    ctx.write(2, B)
    ctx.write(3, C)
    return coproc, ctx


def _run(coproc, ctx, kind, a, b=None, rs2=2, ewidth=32):
    coproc.write_vector(A, 0, a, ewidth)
    if b is not None:
        coproc.write_vector(B, 0, b, ewidth)
    if kind in (InstrKind.KVRED, InstrKind.KRELU, InstrKind.KVCP):
        instr = Instruction(kind, 3, 1)
    else:
        instr = Instruction(kind, 3, 1, rs2)
    coproc.exec_vector(instr, ctx, 0)
    return list(coproc.read_vector(C, 0, ctx.ctrl.vlen, ewidth))


class TestCoprocConfig:
    def test_scheme_units(self):
        assert (CoprocConfig(Scheme.SHARED).M, CoprocConfig(Scheme.SHARED).F) == (1, 1)
        assert (CoprocConfig(Scheme.DEDICATED).M, CoprocConfig(Scheme.DEDICATED).F) == (3, 3)
        assert (CoprocConfig(Scheme.SHARED_MFU).M, CoprocConfig(Scheme.SHARED_MFU).F) == (3, 1)

    def test_scheme_from_text(self):
        assert CoprocConfig("shared_mfu").scheme is Scheme.SHARED_MFU

    @pytest.mark.parametrize("kwargs", [
        dict(scheme="mimd"),
        dict(scheme=Scheme.SHARED, M=3),
        dict(D=3),
        dict(N=0),
        dict(D=8, spm_capacity=100),
        dict(initial_latency=3),
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            CoprocConfig(**kwargs)

    def test_families(self):
        labels = [cfg.label for cfg in design_grid()]
        assert len(labels) == 12
        assert labels[0] == "SISD D=1"
        assert labels[3] == "SIMD D=8"
        assert labels[4] == "Sym MIMD D=1"
        assert labels[-1] == "Het MIMD+SIMD D=8"


class TestSpmMapping:
    def test_spmi_follows_scheme(self):
        shared = VectorCoprocessor(CoprocConfig(Scheme.SHARED, N=2))
        dedicated = VectorCoprocessor(CoprocConfig(Scheme.DEDICATED, N=2))
        assert shared.map_spm_address(C + 12, 2) == (0, 1, 12)
        assert dedicated.map_spm_address(C + 12, 2) == (2, 1, 12)

    def test_out_of_space(self):
        coproc = VectorCoprocessor(CoprocConfig(Scheme.SHARED, N=2))
        with pytest.raises(SimulatorTrap):
            coproc.map_spm_address(SPM_BASE + 2 * SPM_CAPACITY, 0)
        with pytest.raises(SimulatorTrap):
            coproc.map_spm_address(SPM_BASE - 4, 0)
        with pytest.raises(SimulatorTrap):
            coproc.map_spm_address(C - 8, 0, span=16)


class TestLatency:
    def test_line_per_cycle(self):
        assert vector_latency(128, 1, 4) == 36
        assert vector_latency(128, 8, 4) == 8
        assert vector_latency(4, 8, 6) == 7

    def test_monotonic_in_lanes(self):
        values = [vector_latency(256, d, 4) for d in (1, 2, 4, 8)]
        assert values == sorted(values, reverse=True)


class TestVectorSemantics:
    def test_add_wraps(self):
        coproc, ctx = _machine()
        assert _run(coproc, ctx, InstrKind.KADDV, [1, 2, 2 ** 31 - 1, -5], [10, 20, 1, 5]) == [11, 22, -2 ** 31, 0]

    def test_sub_and_mul(self):
        coproc, ctx = _machine()
        assert _run(coproc, ctx, InstrKind.KSUBV, [1, 2, 3, 4], [4, 3, 2, 1]) == [-3, -1, 1, 3]
        assert _run(coproc, ctx, InstrKind.KVMUL, [1, -2, 65536, 4], [4, 3, 65536, 1]) == [4, -6, 0, 4]

    def test_scalar_from_register(self):
        coproc, ctx = _machine()
        ctx.write(4, -3)
        assert _run(coproc, ctx, InstrKind.KSVMULRF, [1, 2, 3, 4], rs2=4) == [-3, -6, -9, -12]
        assert _run(coproc, ctx, InstrKind.KSVADDRF, [1, 2, 3, 4], rs2=4) == [-2, -1, 0, 1]

    def test_scalar_from_spm(self):
        coproc, ctx = _machine()
        assert _run(coproc, ctx, InstrKind.KSVMULS, [1, 2, 3, 4], [5, 0, 0, 0]) == [5, 10, 15, 20]

    def test_shifts(self):
        coproc, ctx = _machine()
        ctx.write(4, 1)
        assert _run(coproc, ctx, InstrKind.KSRAV, [-7, 7, -1, 8], rs2=4) == [-4, 3, -1, 4]
        assert _run(coproc, ctx, InstrKind.KSRLV, [-2, 7, 0, 8], rs2=4) == [2 ** 31 - 1, 3, 0, 4]

    def test_relu_compare_copy(self):
        coproc, ctx = _machine()
        assert _run(coproc, ctx, InstrKind.KRELU, [-1, 0, 5, -9]) == [0, 0, 5, 0]
        assert _run(coproc, ctx, InstrKind.KVSLT, [1, 5, 3, -4], [2, 5, 1, 0]) == [1, 0, 0, 1]
        assert _run(coproc, ctx, InstrKind.KVCP, [9, 8, 7, 6]) == [9, 8, 7, 6]

    def test_reduction(self):
        coproc, ctx = _machine()
        assert _run(coproc, ctx, InstrKind.KVRED, [1, 2, 3, 4])[0] == 10

    def test_dot_product_lands_after_latency(self):
        coproc, ctx = _machine()
        coproc.write_vector(A, 0, [1 << 30, 1 << 30, 3, 0], 32)
        coproc.write_vector(B, 0, [4, 4, 1 << 28, 0], 32)
        ctx.ctrl.pscale = 4
        latency = coproc.exec_vector(Instruction(InstrKind.KDOTPPS, 5, 1, 2), ctx, 0)
        assert latency == vector_latency(16, 1, 4)
        coproc.land_writes(latency - 1, [ctx])
        assert ctx.read(5) == 0
        coproc.land_writes(latency, [ctx])
        assert ctx.read(5) == ((8 << 30) + (3 << 28)) >> 4

    def test_element_width(self):
        coproc, ctx = _machine(words=4, ewidth=8)
        assert _run(coproc, ctx, InstrKind.KADDV, [127, -128, 1, 2], [1, -1, 1, 2], ewidth=8) == [-128, 127, 2, 4]

    def test_bad_vector_length(self):
        coproc, ctx = _machine()
        ctx.ctrl.vlen = 6
        with pytest.raises(SimulatorTrap):
            coproc.exec_vector(Instruction(InstrKind.KADDV, 3, 1, 2), ctx, 0)

    def test_operand_outside_spm(self):
        coproc, ctx = _machine()
        ctx.write(1, SPM_BASE + SPM_CAPACITY - 8)
        with pytest.raises(SimulatorTrap):
            coproc.exec_vector(Instruction(InstrKind.KADDV, 3, 1, 2), ctx, 0)
        ctx.write(1, 0x100)
        with pytest.raises(SimulatorTrap):
            coproc.exec_vector(Instruction(InstrKind.KADDV, 3, 1, 2), ctx, 0)


class TestTransfers:
    def test_load_store_round_trip(self):
        coproc, ctx = _machine()
        memory = MainMemory(4096)
        memory.load_words(0x100, [1, -2, 3, -4])
        ctx.write(5, 0x100)
        ctx.write(6, 16)
        ctx.write(7, 0x200)
        cycles = coproc.exec_transfer(Instruction(InstrKind.KMEMLD, 1, 5, 6), ctx, memory)
        coproc.exec_transfer(Instruction(InstrKind.KMEMSTR, 7, 1, 6), ctx, memory)
        assert cycles == 4 + 4
        assert list(memory.peek_words(0x200, 4)) == [1, -2, 3, -4]
        assert memory.port_words == 8

    def test_zero_length(self):
        coproc, ctx = _machine()
        with pytest.raises(SimulatorTrap):
            coproc.exec_transfer(Instruction(InstrKind.KMEMLD, 1, 5, 0), ctx, MainMemory(64))


class TestAvailability:
    ADD = Instruction(InstrKind.KADDV, 3, 1, 2)
    MUL = Instruction(InstrKind.KVMUL, 3, 1, 2)

    def _busy(self, scheme):
        coproc, ctx = _machine(scheme)
        latency = coproc.issue(self.ADD, ctx, MainMemory(64), 0)
        return coproc, latency

    def test_shared_serializes_all_harts(self):
        coproc, latency = self._busy(Scheme.SHARED)
        assert coproc.availability(self.MUL, 1, 1) == (ReplayResource.MFU, latency)
        assert coproc.availability(self.MUL, 1, latency) is None

    def test_dedicated_only_blocks_own_hart(self):
        coproc, latency = self._busy(Scheme.DEDICATED)
        assert coproc.availability(self.ADD, 1, 1) is None
        assert coproc.availability(self.ADD, 0, 1) == (ReplayResource.MFU, latency)

    def test_shared_mfu_per_unit_class(self):
        coproc, latency = self._busy(Scheme.SHARED_MFU)
        assert coproc.availability(self.MUL, 1, 1) is None
        assert coproc.availability(self.ADD, 1, 1) == (ReplayResource.ADDER, latency)
        assert coproc.availability(self.MUL, 0, 1) == (ReplayResource.SPMI, latency)

    def test_transfer_waits_for_lsu(self):
        coproc, ctx = _machine(Scheme.DEDICATED)
        memory = MainMemory(4096)
        ctx.write(5, 0)
        ctx.write(6, 64)
        load = Instruction(InstrKind.KMEMLD, 1, 5, 6)
        cycles = coproc.issue(load, ctx, memory, 0)
        assert coproc.availability(load, 2, 1) == (ReplayResource.LSU, cycles)

    def test_busy_accounting(self):
        coproc, latency = self._busy(Scheme.SHARED_MFU)
        coproc.settle(100)
        assert coproc.counters.fu_busy["adder"] == latency
        assert coproc.counters.fu_busy["multiplier"] == 0
        assert coproc.counters.mfu_busy == [latency]
