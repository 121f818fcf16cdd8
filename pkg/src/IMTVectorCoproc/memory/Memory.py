import numpy as np
from dataclasses import dataclass
from IMTVectorCoproc.exceptions import SimulatorTrap
from IMTVectorCoproc.config import DATA_MEMORY_SIZE

"""
Main data memory behind the single 32-bit data port, and the LSU that moves vectors between it and the scratchpads.
"""

WIDTH_BYTES = {8: 1, 16: 2, 32: 4}


def transfer_cycles(n_bytes, initial_latency):
    """
    Cycles the LSU needs for a vector transfer: one word per cycle through the 32-bit port after the initial latency.
    """
    if n_bytes <= 0:
        raise ValueError("transfer size must be positive")
    return initial_latency + (n_bytes + 3) // 4


class MainMemory:
    def __init__(self, size=DATA_MEMORY_SIZE) -> None:
        if size <= 0 or size % 4:
            raise ValueError("memory size must be a positive multiple of 4")
        self.size = size
        self.contents = bytearray(size)
        self.port_words = 0  # words moved through the data port

    def _check(self, addr, n_bytes):
        if addr < 0 or addr + n_bytes > self.size:
            raise SimulatorTrap("data memory access out of range", address=addr)
        if addr % n_bytes:
            raise SimulatorTrap(f"misaligned {8 * n_bytes}-bit access", address=addr)

    def read(self, addr, width, signed=False):
        """
        Scalar load through the data port.
        :param: addr int byte address.
        :param: width int access width in bits (8, 16, 32).
        :param: signed bool sign-extend the loaded value.
        """
        n_bytes = WIDTH_BYTES[width]
        self._check(addr, n_bytes)
        self.port_words += 1
        return int.from_bytes(self.contents[addr:addr + n_bytes], "little", signed=signed) & 0xFFFFFFFF

    def write(self, addr, width, value):
        n_bytes = WIDTH_BYTES[width]
        self._check(addr, n_bytes)
        self.port_words += 1
        self.contents[addr:addr + n_bytes] = (value & ((1 << (8 * n_bytes)) - 1)).to_bytes(n_bytes, "little")

    def read_block(self, addr, n_bytes):
        if addr < 0 or n_bytes < 0 or addr + n_bytes > self.size:
            raise SimulatorTrap("vector transfer outside data memory", address=addr)
        return bytes(self.contents[addr:addr + n_bytes])

    def write_block(self, addr, data):
        if addr < 0 or addr + len(data) > self.size:
            raise SimulatorTrap("vector transfer outside data memory", address=addr)
        self.contents[addr:addr + len(data)] = data

    def load_words(self, addr, words):
        """
        Preloads 32-bit words without touching the port counters (used by loaders and the harness).
        """
        data = np.asarray(words, dtype=np.int64).astype("<u4")
        self.write_block(addr, data.tobytes())

    def peek_words(self, addr, count):
        return np.frombuffer(self.read_block(addr, 4 * count), dtype="<i4").astype(np.int64)


@dataclass
class LsuState:
    busy_start: int = 0
    busy_until: int = 0
    active_hart: int = None
    initial_latency: int = 0
    transfers: int = 0

    def busy(self, now):
        return now < self.busy_until

    def port_free(self, now):
        """
        The port is idle while a transfer is still in its initial latency.
        """
        return now >= self.busy_until or now < self.busy_start + self.initial_latency

    def occupy(self, hart, now, cycles, initial_latency):
        self.active_hart = hart
        self.busy_start = now
        self.busy_until = now + cycles
        self.initial_latency = initial_latency
        self.transfers += 1
