from dataclasses import dataclass, fields, asdict
import numpy as np
from IMTVectorCoproc.exceptions import ConfigError
from IMTVectorCoproc.config import ENERGY_WEIGHTS
from IMTVectorCoproc.config.Config import Config

"""
Event-weighted energy proxy per algorithmic operation. Supports trend comparisons between design points only.
"""


@dataclass(frozen=True)
class EnergyWeights:
    scalar_instr: float = ENERGY_WEIGHTS["scalar_instr"]
    vector_line: float = ENERGY_WEIGHTS["vector_line"]
    spm_line: float = ENERGY_WEIGHTS["spm_line"]
    mem_word: float = ENERGY_WEIGHTS["mem_word"]
    mfu_idle_cycle: float = ENERGY_WEIGHTS["mfu_idle_cycle"]
    base_cycle: float = ENERGY_WEIGHTS["base_cycle"]

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"energy weight {f.name} has to be a non-negative number, got {value}")

    @classmethod
    def from_dict(cls, values):
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"Unknown energy weights: {sorted(unknown)}")
        try:
            return cls(**{k: float(v) for k, v in values.items()})
        except ValueError as e:
            raise ConfigError(f"energy weights: {e}")

    @classmethod
    def from_file(cls, file):
        return cls.from_dict(Config.read_key_values(file))

    def scaled(self, factor):
        return EnergyWeights(**{k: v * factor for k, v in asdict(self).items()})

    def as_array(self):
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)


def event_counts(counters):
    """
    Event counts in EnergyWeights field order.
    """
    return np.array([
        counters.retired_scalar,
        counters.vector_line_ops,
        counters.spm_lines,
        counters.mem_port_words,
        counters.mfu_idle_cycles,
        counters.cycles,
    ], dtype=np.float64)


def energy_proxy(counters, weights, ops):
    """
    :param: counters PerfCounters of a finished run.
    :param: weights EnergyWeights.
    :param: ops int algorithmic operations (multiplies + adds) the run performed.
    """
    if ops <= 0:
        raise ValueError("energy proxy needs a positive operation count")
    return float(np.dot(event_counts(counters), weights.as_array()) / ops)
