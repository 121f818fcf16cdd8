from dataclasses import dataclass
from typing import List
from loguru import logger
from IMTVectorCoproc.exceptions import KernelBuildError
from IMTVectorCoproc.config import N_HARTS


@dataclass(frozen=True)
class SpmBuffer:
    name: str
    spm: int
    offset: int  # inside the hart's slice
    size: int


class SpmPlan:
    """
    Static placement of kernel buffers in the scratchpads. Every SPM is cut into one slice per hart whatever the scheme,
    so a kernel assembles to the same text under all schemes; with a private SPMI a hart leaves the other slices unused.
    A buffer never crosses an SPM boundary.
    """
    def __init__(self, cfg) -> None:
        self.cfg = cfg
        line = 4 * cfg.D
        self.slice_bytes = cfg.spm_capacity // N_HARTS // line * line
        self.used = [0] * cfg.N
        self.buffers = dict()

    @property
    def hart_stride(self):
        """
        Byte distance between the slices of consecutive harts inside one SPM.
        """
        return self.slice_bytes

    def allocate(self, name, size, spm=None):
        """
        :param: name str buffer name, unique in the plan.
        :param: size int bytes, rounded up to whole words.
        :param: spm int scratchpad to place the buffer in, first fit if None.
        """
        if name in self.buffers:
            raise KernelBuildError(f"SPM buffer {name} allocated twice")
        size = (size + 3) // 4 * 4
        candidates = range(self.cfg.N) if spm is None else [spm]
        for n in candidates:
            if n < self.cfg.N and self.used[n] + size <= self.slice_bytes:
                buffer = SpmBuffer(name, n, self.used[n], size)
                self.used[n] += size
                self.buffers[name] = buffer
                return buffer
        raise KernelBuildError(
            f"SPM buffer {name} of {size} bytes does not fit ({self.cfg.N} SPMs, {self.slice_bytes} bytes per hart slice, used {self.used})"
        )

    def allocate_rows(self, name, rows, row_bytes):
        """
        Places rows of equal size as consecutive segments, filling the SPMs in order; rows never straddle two SPMs.
        :return: list of SpmBuffer segments named name[0], name[1], ...
        """
        segments: List[SpmBuffer] = []
        remaining = rows
        for n in range(self.cfg.N):
            fit = (self.slice_bytes - self.used[n]) // row_bytes
            if fit <= 0 or remaining == 0:
                continue
            take = min(fit, remaining)
            segments.append(self.allocate(f"{name}[{len(segments)}]", take * row_bytes, n))
            remaining -= take
        if remaining:
            raise KernelBuildError(f"SPM buffer {name} of {rows} rows x {row_bytes} bytes does not fit")
        return segments

    def address(self, name):
        """
        SPM address of a buffer in hart 0's slice. Hart h adds h * hart_stride at run time.
        """
        buffer = self.buffers[name]
        return self.cfg.spm_base + buffer.spm * self.cfg.spm_capacity + buffer.offset

    def describe(self):
        text = ", ".join(f"{b.name}@spm{b.spm}+{b.offset}:{b.size}" for b in self.buffers.values())
        logger.debug(f"SPM plan ({self.slice_bytes} bytes per slice): {text}")
        return text
