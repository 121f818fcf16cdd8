import io
from loguru import logger
from IMTVectorCoproc.io.IO import IO
from IMTVectorCoproc.assembler.Assembler import Assembler, disassemble
from IMTVectorCoproc.coprocessor.CoprocConfig import CoprocConfig, design_grid
from IMTVectorCoproc.core.Pipeline import SimConfig, StopCondition
from IMTVectorCoproc.harness.Workload import WorkloadSpec, Workload, workload_config
from IMTVectorCoproc.harness.Energy import EnergyWeights
from IMTVectorCoproc.harness.Sweep import STANDARD_WORKLOADS, FILTER_WORKLOADS, sweep, sweep_cells, workloads
from IMTVectorCoproc.harness.Report import emit_report, to_frame
from IMTVectorCoproc.harness.TrendCheck import trend_check, all_passed
from IMTVectorCoproc.config import SEED, INSTANCES, N_JOBS, PROGRAM_ORIGIN, LOAD_LATENCY

"""
Entry point of the simulator: assemble programs, run one workload on one design point, sweep the design space and check the performance trends.
"""


class IMTVectorCoproc:
    def __init__(self, seed=SEED, instances=INSTANCES, weights=None, load_latency=LOAD_LATENCY, n_jobs=N_JOBS) -> None:
        self.io = IO()
        self.seed = seed
        self.instances = instances
        self.weights = weights if weights is not None else EnergyWeights()
        self.load_latency = load_latency
        self.n_jobs = n_jobs
        self.workload = None

    def assemble(self, file_asm, origin=PROGRAM_ORIGIN):
        """
        :param: file_asm str path of an assembly source.
        :return: Program.
        """
        program = Assembler(origin).assemble_file(file_asm)
        logger.info(f"Assembled {file_asm}: {len(program)} instructions, {len(program.data)} data words")
        return program

    def disassemble(self, program):
        return disassemble(program).text

    def run(self, workload, cfg=None, check_invariants=False, trace=None, max_cycles=None):
        """
        Runs one workload on one design point and verifies it against the oracles.
        :param: workload str workload name (e.g. conv32, conv32_f7, fft256, matmul64, composite) or WorkloadSpec.
        :param: cfg CoprocConfig design point; the scratchpad count is fitted to the workload when None.
        :param: check_invariants bool assert the hazard fence and x0 every cycle.
        :param: trace text stream receiving the per-cycle pipeline trace.
        :param: max_cycles int stop after this many cycles.
        :return: RunReport.
        """
        w = workload if isinstance(workload, WorkloadSpec) else WorkloadSpec.parse(workload, self.instances)
        cfg = workload_config(CoprocConfig(), w) if cfg is None else cfg
        sim = SimConfig(load_latency=self.load_latency, check_invariants=check_invariants, trace=trace)
        self.workload = Workload(w, cfg, self.seed, sim, self.weights)
        return self.workload.run(max_cycles)

    def trace(self, workload, cfg=None, cycles=2000):
        """
        :return: the tab-separated cycle trace of the first cycles of a run as str.
        """
        w = workload if isinstance(workload, WorkloadSpec) else WorkloadSpec.parse(workload, self.instances)
        cfg = workload_config(CoprocConfig(), w) if cfg is None else cfg
        stream = io.StringIO()
        self.workload = Workload(w, cfg, self.seed, SimConfig(load_latency=self.load_latency, trace=stream), self.weights)
        self.workload.build()
        self.workload.core.run(StopCondition(max_cycles=cycles))
        return stream.getvalue()

    def dump_spm(self, dir_out):
        if self.workload is None or self.workload.core is None:
            raise ValueError("Please run a workload before dumping the scratchpads.")
        return self.io.dump_scratchpads(self.workload.core.coproc, dir_out)

    def sweep(self, names=STANDARD_WORKLOADS, configs=None, fit_spms=True):
        """
        :param: names list of workload names.
        :param: configs list of CoprocConfig, every scheme at D = 1, 2, 4, 8 by default.
        :param: fit_spms bool replace N of every design point by what the workload needs.
        :return: list of run dicts.
        """
        configs = design_grid() if configs is None else configs
        cells = sweep_cells(workloads(names, self.instances), configs, fit_spms)
        return sweep(cells, self.seed, self.weights, self.n_jobs, self.load_latency)

    def check(self, configs=None, fit_spms=True):
        """
        Runs the standard and the larger-filter workloads on the design grid and evaluates the trend checks.
        :return: (runs, list of TrendResult, bool all checks and oracle comparisons passed)
        """
        names = list(dict.fromkeys(STANDARD_WORKLOADS + FILTER_WORKLOADS))
        runs = self.sweep(names, configs, fit_spms)
        results = trend_check(to_frame(runs))
        ok = all_passed(results) and all(run["error"] is None for run in runs)
        return runs, results, ok

    def report(self, runs, fmt, file=None, checks=()):
        return emit_report(runs, fmt, file, checks)
