import sys
import argparse
from loguru import logger
from IMTVectorCoproc.IMTVectorCoproc import IMTVectorCoproc
from IMTVectorCoproc.coprocessor.CoprocConfig import CoprocConfig, Scheme, LANES
from IMTVectorCoproc.harness.Workload import WorkloadSpec, workload_config
from IMTVectorCoproc.harness.Energy import EnergyWeights
from IMTVectorCoproc.harness.Report import failed_run
from IMTVectorCoproc.harness.Sweep import STANDARD_WORKLOADS
from IMTVectorCoproc.config.Config import Config
from IMTVectorCoproc.exceptions import AssemblyError, ConfigError, OracleMismatchError, SimulatorTrap, KernelBuildError
from IMTVectorCoproc.config import SEED, INSTANCES, N_JOBS, LOAD_LATENCY, SPM_CAPACITY, INITIAL_LATENCY, PROGRAM_ORIGIN

"""
Command line: imt-vector-coproc {run, sweep, check, asm, trace}. Flags override the values of a key=value config file.
"""

FORMATS = ("csv", "json", "text")


def _config_flags(parser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--scheme", choices=[s.value for s in Scheme])
    parser.add_argument("--d", type=int, choices=LANES, help="MFU lanes")
    parser.add_argument("--f", type=int, help="MFUs (implied by the scheme)")
    parser.add_argument("--m", type=int, help="SPMIs (implied by the scheme)")
    parser.add_argument("--n", type=int, help="scratchpads per SPMI (default: what the workload needs)")
    parser.add_argument("--spm-capacity", dest="spm_capacity", type=int, help="bytes per scratchpad")
    parser.add_argument("--initial-latency", dest="initial_latency", type=int, help="SPM/transfer start-up cycles")
    parser.add_argument("--load-latency", dest="load_latency", type=int, help="scalar load-use latency")
    parser.add_argument("--seed", type=lambda v: int(v, 0))
    parser.add_argument("--instances", type=int, help="kernel instances per hart")
    parser.add_argument("--weights", help="energy weights file")
    parser.add_argument("--n-jobs", dest="n_jobs", type=int)


def _output_flags(parser, default_format="text"):
    parser.add_argument("--format", choices=FORMATS, default=default_format)
    parser.add_argument("--out", help="report file, stdout if omitted")


def build_parser():
    parser = argparse.ArgumentParser(prog="imt-vector-coproc", description=__doc__)
    parser.add_argument("--loglevel", default="INFO", help="loguru level (DEBUG, INFO, WARNING, ...)")
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="run one workload on one design point")
    _config_flags(run)
    run.add_argument("--workload", help="conv4..conv32, conv32_f5..conv32_f11, conv8_p4, fft256, matmul64, composite")
    run.add_argument("--check-invariants", action="store_true")
    run.add_argument("--dump-spm", dest="dump_spm", help="directory for scratchpad hex dumps after the run")
    _output_flags(run)

    sweep = verbs.add_parser("sweep", help="run workloads over the design grid")
    _config_flags(sweep)
    sweep.add_argument("--workloads", nargs="+", default=list(STANDARD_WORKLOADS))
    sweep.add_argument("--schemes", nargs="+", choices=[s.value for s in Scheme], default=[s.value for s in Scheme])
    sweep.add_argument("--ds", nargs="+", type=int, choices=LANES, default=list(LANES))
    _output_flags(sweep, "csv")

    check = verbs.add_parser("check", help="sweep the design grid and evaluate the trend checks")
    _config_flags(check)
    _output_flags(check)

    asm = verbs.add_parser("asm", help="assemble a source file")
    asm.add_argument("file")
    asm.add_argument("--origin", type=lambda v: int(v, 0), default=PROGRAM_ORIGIN)
    asm.add_argument("--out", help="write the canonical disassembly here")

    trace = verbs.add_parser("trace", help="cycle trace of the start of a run")
    _config_flags(trace)
    trace.add_argument("--workload")
    trace.add_argument("--cycles", type=int, default=2000)
    trace.add_argument("--out", help="trace file, stdout if omitted")
    return parser


def _settings(args):
    config = Config.from_file(args.config) if args.config else Config()
    return config.merged({k: v for k, v in vars(args).items() if k in (
        "scheme", "d", "f", "m", "n", "spm_capacity", "initial_latency", "load_latency", "seed", "instances", "weights", "n_jobs", "workload",
    )})


def _simulator(settings):
    weights = EnergyWeights.from_file(settings.get("weights")) if settings.get("weights") else None
    return IMTVectorCoproc(
        seed=settings.get("seed", SEED),
        instances=settings.get("instances", INSTANCES),
        weights=weights,
        load_latency=settings.get("load_latency", LOAD_LATENCY),
        n_jobs=settings.get("n_jobs", N_JOBS),
    )


def _design_point(settings, scheme=None, d=None):
    return CoprocConfig(
        scheme=scheme or settings.get("scheme", Scheme.SHARED.value),
        D=d or settings.get("d", 1),
        F=settings.get("f"),
        M=settings.get("m"),
        N=settings.get("n", 4),
        spm_capacity=settings.get("spm_capacity", SPM_CAPACITY),
        initial_latency=settings.get("initial_latency", INITIAL_LATENCY),
    )


def _workload(settings):
    name = settings.get("workload")
    if name is None:
        kernel = settings.get("kernel", "conv")
        sizes = settings.get("sizes") or [None]
        params = {k: v for k, v in (("size", sizes[0]), ("filter", settings.get("filter")), ("pscale", settings.get("pscale"))) if v is not None}
        return WorkloadSpec(kernel=kernel, params=params, instances=settings.get("instances", INSTANCES))
    return WorkloadSpec.parse(name, settings.get("instances", INSTANCES))


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as dst:
            dst.write(text)
    except OSError as e:
        logger.error(f"Cannot write {out}")
        raise OSError(f"{out}: {e}")


def cmd_run(args):
    settings = _settings(args)
    sim = _simulator(settings)
    w = _workload(settings)
    cfg = _design_point(settings)
    if settings.get("n") is None:
        cfg = workload_config(cfg, w)
    try:
        report = sim.run(w, cfg, check_invariants=args.check_invariants)
    except (OracleMismatchError, SimulatorTrap, KernelBuildError) as e:
        logger.error(f"{w.name} on {cfg.label} failed: {e}")
        _write(sim.report([failed_run(w.name, cfg, e)], args.format), args.out)
        return 1
    if args.dump_spm:
        sim.dump_spm(args.dump_spm)
    _write(sim.report([report.to_dict()], args.format), args.out)
    return 0


def cmd_sweep(args):
    settings = _settings(args)
    sim = _simulator(settings)
    configs = [_design_point(settings, scheme, d) for scheme in args.schemes for d in args.ds]
    runs = sim.sweep(args.workloads, configs, fit_spms=settings.get("n") is None)
    _write(sim.report(runs, args.format), args.out)
    return 0 if all(run["error"] is None for run in runs) else 1


def cmd_check(args):
    settings = _settings(args)
    sim = _simulator(settings)
    configs = [_design_point(settings, scheme.value, d) for scheme in Scheme for d in LANES]
    runs, results, ok = sim.check(configs, fit_spms=settings.get("n") is None)
    _write(sim.report(runs, args.format, checks=results), args.out)
    return 0 if ok else 1


def cmd_asm(args):
    sim = IMTVectorCoproc()
    try:
        program = sim.assemble(args.file, args.origin)
    except AssemblyError as e:
        for d in e.diagnostics:
            sys.stderr.write(f"{d}\n")
        return 1
    text = sim.disassemble(program)
    if args.out:
        _write(text, args.out)
    else:
        sys.stdout.write(f"{len(program)} instructions, {len(program.labels)} labels, {len(program.data)} data words\n")
    return 0


def cmd_trace(args):
    settings = _settings(args)
    sim = _simulator(settings)
    w = _workload(settings)
    cfg = _design_point(settings)
    if settings.get("n") is None:
        cfg = workload_config(cfg, w)
    _write(sim.trace(w, cfg, args.cycles), args.out)
    return 0


COMMANDS = dict(run=cmd_run, sweep=cmd_sweep, check=cmd_check, asm=cmd_asm, trace=cmd_trace)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logger.remove()
    logger.add(sys.stderr, level=args.loglevel.upper())
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, FileNotFoundError, KernelBuildError) as e:
        logger.error(str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
