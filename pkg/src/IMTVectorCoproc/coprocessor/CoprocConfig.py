from enum import Enum
from dataclasses import dataclass, replace
from IMTVectorCoproc.exceptions import ConfigError
from IMTVectorCoproc.config import SPM_BASE, SPM_CAPACITY, INITIAL_LATENCY, N_HARTS

LANES = (1, 2, 4, 8)


class Scheme(Enum):
    SHARED = "shared"
    DEDICATED = "dedicated"
    SHARED_MFU = "shared_mfu"


# (M, F) forced by each sharing scheme
SCHEME_UNITS = {
    Scheme.SHARED: (1, 1),
    Scheme.DEDICATED: (N_HARTS, N_HARTS),
    Scheme.SHARED_MFU: (N_HARTS, 1),
}

FAMILY_NAMES = {
    (Scheme.SHARED, False): "SISD",
    (Scheme.SHARED, True): "SIMD",
    (Scheme.DEDICATED, False): "Sym MIMD",
    (Scheme.DEDICATED, True): "Sym MIMD+SIMD",
    (Scheme.SHARED_MFU, False): "Het MIMD",
    (Scheme.SHARED_MFU, True): "Het MIMD+SIMD",
}


@dataclass(frozen=True)
class CoprocConfig:
    scheme: Scheme = Scheme.SHARED
    D: int = 1
    F: int = None
    M: int = None
    N: int = 4
    spm_capacity: int = SPM_CAPACITY
    initial_latency: int = INITIAL_LATENCY
    spm_base: int = SPM_BASE

    def __post_init__(self):
        if not isinstance(self.scheme, Scheme):
            try:
                object.__setattr__(self, "scheme", Scheme(str(self.scheme).lower()))
            except ValueError:
                raise ConfigError(f"Unknown sharing scheme: {self.scheme}")
        m, f = SCHEME_UNITS[self.scheme]
        if self.M is None:
            object.__setattr__(self, "M", m)
        if self.F is None:
            object.__setattr__(self, "F", f)
        if (self.M, self.F) != (m, f):
            raise ConfigError(f"{self.scheme.value} requires M={m}, F={f} (got M={self.M}, F={self.F})")
        if self.D not in LANES:
            raise ConfigError(f"D has to be one of {LANES}")
        if self.N < 1:
            raise ConfigError("N has to be at least 1")
        if self.spm_capacity <= 0 or self.spm_capacity % (4 * self.D):
            raise ConfigError(f"spm_capacity has to be a positive multiple of 4*D={4 * self.D}")
        if not 4 <= self.initial_latency <= 8:
            raise ConfigError("initial_latency has to be between 4 and 8 cycles")
        if self.spm_base % 4:
            raise ConfigError("spm_base has to be word aligned")

    @property
    def family(self):
        return FAMILY_NAMES[(self.scheme, self.D > 1)]

    @property
    def label(self):
        return f"{self.family} D={self.D}"

    @property
    def spm_space(self):
        return self.N * self.spm_capacity

    def with_spms(self, n):
        return replace(self, N=n)

    def to_dict(self):
        return dict(
            scheme=self.scheme.value,
            d=self.D,
            f=self.F,
            m=self.M,
            n=self.N,
            spm_capacity=self.spm_capacity,
            initial_latency=self.initial_latency,
            spm_base=self.spm_base,
        )


def design_grid(**kwargs):
    """
    Design points of every sharing scheme at D = 1, 2, 4, 8.
    """
    return [CoprocConfig(scheme=scheme, D=d, **kwargs) for scheme in Scheme for d in LANES]
