import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple
import numpy as np
from loguru import logger
from IMTVectorCoproc.exceptions import OracleMismatchError, ConfigError
from IMTVectorCoproc.core.Pipeline import Core, SimConfig, StopCondition
from IMTVectorCoproc.kernels.KernelBuilder import KernelBuilder, DEFAULT_PARAMS, REQUIRED_SPMS, KERNELS
from IMTVectorCoproc.kernels.TestData import kernel_inputs
from IMTVectorCoproc.kernels.Oracles import oracle
from IMTVectorCoproc.harness.Energy import EnergyWeights, energy_proxy
from IMTVectorCoproc.config import INSTANCES, SEED, N_HARTS

HOMOGENEOUS, COMPOSITE = "homogeneous", "composite"
COMPOSITE_ASSIGNMENT = {
    0: ("conv", dict(size=32, filter=3)),
    1: ("fft", dict(size=256)),
    2: ("matmul", dict(size=64)),
}
WORKLOAD_RE = re.compile(r"^(conv|fft|matmul)(\d+)(?:_f(\d+))?(?:_p(\d+))?$")


@dataclass
class WorkloadSpec:
    mode: str = HOMOGENEOUS
    kernel: str = "conv"
    params: dict = field(default_factory=dict)
    instances: int = INSTANCES
    harts: Tuple[int, ...] = tuple(range(N_HARTS))
    assignment: Optional[Dict[int, Tuple[str, dict]]] = None

    def __post_init__(self):
        if self.instances < 1:
            raise ConfigError("instances has to be at least 1")
        if self.mode == COMPOSITE:
            if self.assignment is None:
                self.assignment = dict(COMPOSITE_ASSIGNMENT)
            if sorted(self.assignment) != list(range(N_HARTS)):
                raise ConfigError("a composite workload assigns a kernel to every hart")
        elif self.mode == HOMOGENEOUS:
            if self.kernel not in KERNELS:
                raise ConfigError(f"Unknown kernel: {self.kernel}")
            self.params = {**DEFAULT_PARAMS[self.kernel], **self.params}
        else:
            raise ConfigError(f"Unknown workload mode: {self.mode}")

    @classmethod
    def parse(cls, name, instances=INSTANCES):
        """
        :param: name str "composite" or kernel + size with optional filter and pscale, e.g. conv32, conv32_f7, conv8_p4, fft256, matmul64.
        """
        if name == COMPOSITE:
            return cls(COMPOSITE, instances=instances)
        match = WORKLOAD_RE.match(name)
        if match is None:
            raise ConfigError(f"Cannot parse workload name: {name}")
        kernel, size, k, pscale = match.groups()
        params = dict(size=int(size))
        if kernel == "conv":
            params["filter"] = int(k) if k else 3
            params["pscale"] = int(pscale) if pscale else 0
        elif k or pscale:
            raise ConfigError(f"{kernel} takes no filter or pscale: {name}")
        return cls(HOMOGENEOUS, kernel, params, instances)

    @property
    def name(self):
        if self.mode == COMPOSITE:
            return COMPOSITE
        text = f"{self.kernel}{self.params['size']}"
        if self.kernel == "conv":
            if self.params.get("filter", 3) != 3:
                text += f"_f{self.params['filter']}"
            if self.params.get("pscale", 0):
                text += f"_p{self.params['pscale']}"
        return text

    @property
    def kinds(self):
        if self.mode == COMPOSITE:
            return sorted({kind for kind, _ in self.assignment.values()})
        return [self.kernel]

    @property
    def required_spms(self):
        return max(REQUIRED_SPMS[kind] for kind in self.kinds)


def workload_config(cfg, w):
    """
    The design point with the scratchpad count the workload's kernels are written for.
    """
    return cfg.with_spms(w.required_spms)


@dataclass
class RunReport:
    workload: str
    config: dict
    averages: Dict[str, float]
    instances: Dict[str, int]
    counters: object
    energy_proxy: float
    ops: int
    verified: bool

    def to_dict(self):
        return dict(
            workload=self.workload,
            config=dict(self.config),
            kernels=[dict(kernel=kind, avg_cycles=self.averages[kind], instances=self.instances[kind]) for kind in sorted(self.averages)],
            counters=self.counters.to_dict(),
            energy_proxy=self.energy_proxy,
            error=None,
        )


class Workload:
    def __init__(self, w, cfg, seed=SEED, sim=None, weights=None) -> None:
        """
        :param: w WorkloadSpec what every hart runs.
        :param: cfg CoprocConfig design point.
        :param: seed int base data seed; hart h uses seed + h.
        :param: sim SimConfig simulator knobs.
        :param: weights EnergyWeights for the energy proxy.
        """
        self.w = w
        self.cfg = cfg
        self.seed = seed
        self.sim = sim if sim is not None else SimConfig()
        self.weights = weights if weights is not None else EnergyWeights()
        self.kernels = None
        self.core = None
        self.expected = dict()

    def build(self):
        builder = KernelBuilder(self.cfg, self.w.instances)
        if self.w.mode == COMPOSITE:
            self.kernels = builder.compose(self.w.assignment)
        else:
            self.kernels = builder.build(self.w.kernel, self.w.params, self.w.harts)
        self.core = Core(self.kernels.program, self.cfg, self.kernels.entries, self.sim)
        self.core.watch = self.kernels.watch()
        for hart, text in self.kernels.kernels.items():
            inputs = kernel_inputs(text.kind, text.params, self.seed + hart)
            text.stage(self.core.memory, hart, inputs)
            self.expected[hart] = oracle(text.kind, text.params, inputs)
        return self.kernels

    def run(self, max_cycles=None):
        """
        Runs every hart to completion of its instances, then checks the outputs against the oracles.
        :return: RunReport.
        """
        if self.core is None:
            self.build()
        logger.info(f"Running {self.w.name} on {self.cfg.label} ({self.cfg.scheme.value}, N={self.cfg.N})")
        counters = self.core.run(StopCondition(max_cycles=max_cycles))
        self.verify()
        averages, completed = self.averages()
        ops = sum(
            len(counters.completions[hart]) * text.ops_per_instance for hart, text in self.kernels.kernels.items()
        )
        report = RunReport(
            self.w.name,
            {**self.cfg.to_dict(), "load_latency": self.sim.load_latency},
            averages,
            completed,
            counters,
            energy_proxy(counters, self.weights, ops),
            ops,
            True,
        )
        logger.info(f"{self.w.name} on {self.cfg.label}: " + ", ".join(f"{k} {v:.1f}" for k, v in averages.items()))
        return report

    def verify(self):
        for hart, text in self.kernels.kernels.items():
            if len(self.core.counters.completions[hart]) < text.instances:
                raise OracleMismatchError(
                    f"hart {hart} completed {len(self.core.counters.completions[hart])} of {text.instances} {text.kind} instances"
                )
            outputs = text.collect(self.core.memory, hart)
            for name, expected in self.expected[hart].items():
                got = outputs[name]
                expected = np.asarray(expected, dtype=np.int64).ravel()
                if not np.array_equal(got, expected):
                    wrong = np.flatnonzero(got != expected)
                    message = (
                        f"{text.kind} output {name} of hart {hart} differs from the oracle in {len(wrong)} words, "
                        f"first at {wrong[0]} (got {got[wrong[0]]}, expected {expected[wrong[0]]})"
                    )
                    logger.error(message)
                    raise OracleMismatchError(message)
        logger.debug(f"{self.w.name}: outputs match the oracles")

    def averages(self):
        """
        Per kernel type: (last completion cycle - start cycle) / completed instances for each hart, averaged over the harts running it.
        """
        spans = dict()
        for hart, text in self.kernels.kernels.items():
            completions = self.core.counters.completions[hart]
            spans.setdefault(text.kind, []).append((completions[-1] / len(completions), len(completions)))
        averages = {kind: float(np.mean([s for s, _ in values])) for kind, values in spans.items()}
        completed = {kind: int(min(n for _, n in values)) for kind, values in spans.items()}
        return averages, completed


def run_workload(w, cfg, seed=SEED, sim=None, weights=None, max_cycles=None):
    return Workload(w, cfg, seed, sim, weights).run(max_cycles)
