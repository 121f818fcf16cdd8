import io
import pytest
from IMTVectorCoproc.assembler.Assembler import assemble
from IMTVectorCoproc.coprocessor.CoprocConfig import CoprocConfig, Scheme
from IMTVectorCoproc.core.Pipeline import Core, SimConfig, StopCondition
from IMTVectorCoproc.core.PerfCounters import ReplayResource
from IMTVectorCoproc.exceptions import SimulatorTrap
from IMTVectorCoproc.config import SPM_BASE

ALL_HARTS = {0: 0, 1: 0, 2: 0}


def _alu_program(count):
    return assemble("\n".join(["addi t0, t0, 1"] * count + ["ebreak"]))


def _core(source, entries=None, scheme=Scheme.SHARED, d=1, **sim):
    program = assemble(source) if isinstance(source, str) else source
    return Core(program, CoprocConfig(scheme=scheme, D=d), ALL_HARTS if entries is None else entries, SimConfig(**sim))


VECTOR_LOOP = """
        li t0, 64
        csrw vlen, t0
        li a0, {spm}
        csrr t1, hartid
        slli t1, t1, 8
        add a0, a0, t1
        addi a1, a0, 64
        li s0, 4
loop:   kaddv (a1),(a0),(a0)
        kvmul (a0),(a1),(a1)
        addi s0, s0, -1
        bnez s0, loop
        ebreak
""".format(spm=SPM_BASE)


class TestInterleaving:
    def test_three_harts_retire_one_instruction_per_cycle(self):
        core = _core(_alu_program(1000))
        counters = core.run(StopCondition(max_cycles=3004))
        assert counters.retired == [1000, 1000, 1000]
        assert counters.replays_total == 0

    def test_single_hart_retires_every_third_cycle(self):
        core = _core(_alu_program(10), entries={0: 0})
        counters = core.run()
        assert counters.retired == [11, 0, 0]
        assert counters.cycles == 3 * 11 + 2
        assert core.harts[0].regs[5] == 10

    def test_run_to_completion(self):
        core = _core(_alu_program(1000))
        counters = core.run()
        assert counters.retired_total == 3003
        assert counters.cycles == 3007
        assert all(h.regs[5] == 1000 for h in core.harts)

    def test_harts_without_entry_stay_halted(self):
        core = _core(_alu_program(3), entries={1: 0, 2: 0x1000})
        counters = core.run()
        assert counters.retired == [0, 4, 0]

    def test_label_entries(self):
        core = _core("nop\nstart: addi t0, t0, 7\nebreak", entries={0: "start"})
        core.run()
        assert core.harts[0].regs[5] == 7


class TestHazardFence:
    def test_back_to_back_dependencies_without_forwarding(self):
        source = "li t0, 1\n" + "add t0, t0, t0\n" * 20 + "lw t1, 0(zero)\naddi t1, t1, 1\nsw t1, 0(zero)\nebreak"
        core = _core(source, check_invariants=True)
        core.run()
        assert [h.regs[5] for h in core.harts] == [1 << 20] * 3
        assert core.memory.read(0, 32) in (1, 2, 3)

    def test_vector_loop_keeps_fence(self):
        core = _core(VECTOR_LOOP, check_invariants=True)
        counters = core.run()
        assert counters.retired == [counters.retired[0]] * 3
        assert counters.replays_total > 0


class TestBranches:
    def test_loop(self):
        core = _core("li t0, 5\nli t1, 0\nloop: add t1, t1, t0\naddi t0, t0, -1\nbnez t0, loop\nebreak", entries={0: 0})
        core.run()
        assert core.harts[0].regs[6] == 15

    def test_call_and_return(self):
        source = "jal ra, f\naddi t1, t0, 1\nebreak\nf: li t0, 41\nret"
        core = _core(source, entries={0: 0})
        core.run()
        assert core.harts[0].regs[6] == 42

    def test_csr_reads(self):
        core = _core("csrr t0, hartid\nebreak")
        core.run()
        assert [h.regs[5] for h in core.harts] == [0, 1, 2]


class TestReplay:
    def test_shared_mfu_replays_are_counted(self):
        core = _core(VECTOR_LOOP, record_events=True)
        counters = core.run()
        assert counters.replays["mfu"] > 0
        assert counters.replays_total == len(core.events)
        assert all(e.resource in (ReplayResource.MFU, ReplayResource.RESULT_PENDING) for e in core.events)

    def test_dedicated_needs_fewer_cycles(self):
        shared = _core(VECTOR_LOOP).run()
        dedicated = _core(VECTOR_LOOP, scheme=Scheme.DEDICATED).run()
        assert dedicated.cycles < shared.cycles
        assert dedicated.replays_total < shared.replays_total

    @pytest.mark.parametrize("scheme", list(Scheme))
    @pytest.mark.parametrize("d", [1, 8])
    def test_fast_forward_is_exact(self, scheme, d):
        fast = _core(VECTOR_LOOP, scheme=scheme, d=d)
        slow = _core(VECTOR_LOOP, scheme=scheme, d=d, fast_forward=False)
        assert fast.run().to_dict() == slow.run().to_dict()
        assert fast.coproc.dump_scratchpads()[(0, 0)].tolist() == slow.coproc.dump_scratchpads()[(0, 0)].tolist()

    def test_dot_product_result_pending(self):
        source = """
            li t0, 8
            csrw vlen, t0
            li a0, {spm}
            li t1, 3
            sw t1, 0(zero)
            li t2, 8
            kmemld (a0),(zero),t2
            kdotp (a1),(a0),(a0)
            addi a2, a1, 0
            ebreak
        """.format(spm=SPM_BASE)
        core = _core(source, entries={0: 0}, record_events=True)
        core.run()
        assert core.harts[0].regs[12] == 9
        assert any(e.resource is ReplayResource.RESULT_PENDING for e in core.events)


class TestDiagnostics:
    def test_trace(self):
        stream = io.StringIO()
        core = _core(_alu_program(2), trace=stream)
        core.run()
        lines = stream.getvalue().splitlines()
        assert lines[0] == "cycle\tharc\tF\tD\tE\tWB\treplays"
        assert lines[1].split("\t")[:3] == ["0", "0", "h0:00000000"]
        assert len(lines) == core.cycle + 1

    def test_fetch_outside_program_traps(self):
        core = _core("nop", entries={0: 0})
        with pytest.raises(SimulatorTrap):
            core.run()

    def test_bad_load_traps_with_context(self):
        core = _core("nop\nlw t0, 2(zero)\nebreak", entries={0: 0})
        with pytest.raises(SimulatorTrap) as info:
            core.run()
        assert info.value.hart == 0
        assert info.value.pc == 4

    def test_max_cycles(self):
        core = _core("loop: j loop")
        counters = core.run(StopCondition(max_cycles=50))
        assert counters.cycles == 50
