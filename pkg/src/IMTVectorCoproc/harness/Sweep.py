from joblib import Parallel, delayed
from loguru import logger
from IMTVectorCoproc.coprocessor.CoprocConfig import design_grid
from IMTVectorCoproc.core.Pipeline import SimConfig
from IMTVectorCoproc.harness.Workload import WorkloadSpec, workload_config, run_workload
from IMTVectorCoproc.harness.Report import failed_run
from IMTVectorCoproc.kernels.Oracles import FILTER_SIDES
from IMTVectorCoproc.config import N_JOBS, SEED, INSTANCES

STANDARD_WORKLOADS = ("conv4", "conv8", "conv16", "conv32", "fft256", "matmul64")
FILTER_WORKLOADS = tuple("conv32" if k == 3 else f"conv32_f{k}" for k in FILTER_SIDES)


def workloads(names, instances=INSTANCES):
    return [WorkloadSpec.parse(name, instances) for name in names]


def sweep_cells(specs, configs, fit_spms=True):
    """
    Cartesian product of workloads and design points.
    :param: fit_spms bool give each design point the scratchpad count of the workload; False keeps the configured N.
    """
    return [(w, workload_config(cfg, w) if fit_spms else cfg) for w in specs for cfg in configs]


def run_cell(w, cfg, seed=SEED, weights=None, load_latency=None):
    """
    One sweep cell. Failures are caught and reported in the run's error field.
    """
    sim = SimConfig() if load_latency is None else SimConfig(load_latency=load_latency)
    try:
        return run_workload(w, cfg, seed, sim, weights).to_dict()
    except Exception as e:
        logger.warning(f"Cell {w.name} on {cfg.label} ({cfg.scheme.value}) failed: {e}")
        return failed_run(w.name, cfg, f"{type(e).__name__}: {e}")


def sweep(cells, seed=SEED, weights=None, n_jobs=N_JOBS, load_latency=None):
    """
    :param: cells list of (WorkloadSpec, CoprocConfig).
    :return: list of run dicts in cell order.
    """
    if not cells:
        return []
    logger.info(f"Sweeping {len(cells)} cells on {n_jobs} jobs")
    return Parallel(n_jobs=n_jobs)(delayed(run_cell)(w, cfg, seed, weights, load_latency) for w, cfg in cells)


def standard_sweep(names=STANDARD_WORKLOADS, instances=INSTANCES, seed=SEED, weights=None, n_jobs=N_JOBS, **config_kwargs):
    cells = sweep_cells(workloads(names, instances), design_grid(**config_kwargs))
    return sweep(cells, seed, weights, n_jobs)
