import pytest
from IMTVectorCoproc.exceptions import SimulatorTrap
from IMTVectorCoproc.memory.Memory import MainMemory, LsuState, transfer_cycles


class TestMemory:
    def test_sign_extension(self):
        memory = MainMemory(64)
        memory.write(0, 8, 0xFF)
        memory.write(4, 16, 0x8000)
        assert memory.read(0, 8, signed=True) == 0xFFFFFFFF
        assert memory.read(0, 8) == 0xFF
        assert memory.read(4, 16, signed=True) == 0xFFFF8000

    def test_little_endian_words(self):
        memory = MainMemory(64)
        memory.load_words(8, [0x11223344, -2])
        assert memory.read(8, 8) == 0x44
        assert memory.read(12, 32) == 0xFFFFFFFE
        assert list(memory.peek_words(8, 2)) == [0x11223344, -2]

    def test_port_counts_scalar_accesses_only(self):
        memory = MainMemory(64)
        memory.load_words(0, [1, 2, 3])
        memory.write(0, 32, 5)
        memory.read(0, 32)
        assert memory.port_words == 2

    def test_traps(self):
        memory = MainMemory(64)
        with pytest.raises(SimulatorTrap):
            memory.read(64, 32)
        with pytest.raises(SimulatorTrap):
            memory.read(2, 32)
        with pytest.raises(SimulatorTrap):
            memory.read_block(60, 8)

    def test_transfer_cycles(self):
        assert transfer_cycles(16, 4) == 8
        assert transfer_cycles(17, 4) == 9
        with pytest.raises(ValueError):
            transfer_cycles(0, 4)

    def test_port_free_during_initial_latency(self):
        lsu = LsuState()
        lsu.occupy(0, 10, transfer_cycles(32, 4), 4)
        assert lsu.busy(11) and lsu.port_free(11)
        assert lsu.busy(14) and not lsu.port_free(14)
        assert not lsu.busy(22) and lsu.port_free(22)
