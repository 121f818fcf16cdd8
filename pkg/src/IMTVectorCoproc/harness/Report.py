import json
import numpy as np
import pandas as pd
from loguru import logger
from IMTVectorCoproc.coprocessor.CoprocConfig import Scheme, FAMILY_NAMES, LANES
from IMTVectorCoproc.config import REPORT_SCHEMA_VERSION

"""
Report emission. CSV has one row per (design point, workload, kernel type); JSON nests the same content per run.
"""

CSV_COLUMNS = [
    "scheme", "d", "f", "m", "n", "kernel", "avg_cycles", "total_cycles", "retired", "replays",
    "fu_busy_adder", "fu_busy_mul", "fu_busy_shift", "fu_busy_cmp", "fu_busy_move",
    "spm_lines", "mem_words", "energy_proxy", "workload", "error",
]
FU_COLUMNS = dict(
    fu_busy_adder="adder", fu_busy_mul="multiplier", fu_busy_shift="shifter", fu_busy_cmp="compare", fu_busy_move="move",
)
VERDICTS = ("PASS", "FAIL", "NOT_RUN")

RUN_KEYS = ("workload", "config", "kernels", "counters", "energy_proxy", "error")
CONFIG_KEYS = ("scheme", "d", "f", "m", "n", "spm_capacity", "initial_latency")
COUNTER_KEYS = ("cycles", "retired", "replays", "fu_busy", "spm_line_reads", "spm_line_writes", "mem_port_words")
KERNELS = ("conv", "fft", "matmul")


def _require(condition, message):
    if not condition:
        raise ValueError(f"Invalid report: {message}")


def validate_run(run):
    _require(all(k in run for k in RUN_KEYS), f"run lacks one of {RUN_KEYS}")
    config = run["config"]
    _require(all(k in config for k in CONFIG_KEYS), f"config lacks one of {CONFIG_KEYS}")
    _require(config["scheme"] in [s.value for s in Scheme], f"scheme {config['scheme']}")
    _require(config["d"] in LANES, f"d={config['d']}")
    _require(min(config["f"], config["m"], config["n"]) >= 1, "f, m and n must be positive")
    for k in run["kernels"]:
        _require(k["kernel"] in KERNELS, f"kernel {k['kernel']}")
        _require(k["avg_cycles"] > 0 and k["instances"] >= 1, f"{k['kernel']} has no completed instance")
    counters = run["counters"]
    if counters is None:
        _require(run["error"] is not None, f"{run['workload']} has neither counters nor an error")
        return
    _require(all(k in counters for k in COUNTER_KEYS), f"counters lack one of {COUNTER_KEYS}")
    _require(all(v >= 0 for v in counters["replays"].values()), "negative replay count")
    _require(all(v >= 0 for v in counters["fu_busy"].values()), "negative busy count")


def validate_check(check):
    _require(all(k in check for k in ("name", "verdict", "cells")), "check lacks name, verdict or cells")
    _require(check["verdict"] in VERDICTS, f"verdict {check['verdict']} of {check['name']}")


def validate_document(document):
    """
    Structure of a json report: schema_version, runs and checks. Raises ValueError naming the first problem.
    """
    _require(document.get("schema_version") == REPORT_SCHEMA_VERSION, f"schema_version {document.get('schema_version')}")
    for run in document["runs"]:
        validate_run(run)
    for check in document["checks"]:
        validate_check(check)
    return document


def failed_run(workload, cfg, error):
    return dict(workload=workload, config=cfg.to_dict(), kernels=[], counters=None, energy_proxy=None, error=str(error))


def csv_rows(run):
    """
    :param: run dict as made by RunReport.to_dict() or failed_run().
    """
    config = run["config"]
    common = dict(scheme=config["scheme"], d=config["d"], f=config["f"], m=config["m"], n=config["n"], workload=run["workload"])
    counters = run["counters"]
    if counters is None:
        return [dict(common, kernel=None, error=run["error"])]
    totals = dict(
        total_cycles=counters["cycles"],
        retired=counters["retired_total"],
        replays=counters["replays_total"],
        spm_lines=counters["spm_line_reads"] + counters["spm_line_writes"],
        mem_words=counters["mem_port_words"],
        energy_proxy=run["energy_proxy"],
        error=run["error"],
        **{column: counters["fu_busy"][unit] for column, unit in FU_COLUMNS.items()},
    )
    return [dict(common, kernel=k["kernel"], avg_cycles=k["avg_cycles"], **totals) for k in run["kernels"]]


def to_frame(runs):
    rows = [row for run in runs for row in csv_rows(run)]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def check_dicts(checks):
    return [c.to_dict() if hasattr(c, "to_dict") else dict(c) for c in checks]


def report_document(runs, checks=()):
    return dict(schema_version=REPORT_SCHEMA_VERSION, runs=list(runs), checks=check_dicts(checks))


def text_grid(frame):
    """
    Average cycles per kernel, design points as rows and workloads as columns.
    """
    if frame.empty:
        return "(no results)\n"
    frame = frame.copy()
    frame["family"] = [
        f"{FAMILY_NAMES[(Scheme(s), d > 1)]} D={d}" for s, d in zip(frame["scheme"], frame["d"])
    ]
    frame["order"] = [list(Scheme).index(Scheme(s)) * 10 + d for s, d in zip(frame["scheme"], frame["d"])]
    frame["column"] = [w if w != "composite" else f"composite:{k}" for w, k in zip(frame["workload"], frame["kernel"])]
    grid = frame.pivot_table(index=["order", "family"], columns="column", values="avg_cycles", aggfunc="first")
    grid = grid.sort_index().droplevel("order")
    grid.index.name = None
    grid.columns.name = None
    return grid.round(0).astype("Int64").to_string() + "\n"


def checks_text(checks):
    lines = []
    for c in check_dicts(checks):
        cells = ", ".join(f"{k}={v:.1f}" if v is not None else f"{k}=missing" for k, v in c["cells"].items())
        lines.append(f"[{c['verdict']}] {c['name']}: {cells}")
    return "\n".join(lines) + ("\n" if lines else "")


def emit_report(runs, fmt, file=None, checks=()):
    """
    :param: runs list of run dicts.
    :param: fmt str csv, json or text.
    :param: file str output path, the report text is returned when None.
    :param: checks list of TrendResult appended to json and text reports.
    """
    if fmt == "csv":
        text = to_frame(runs).to_csv(index=False)
    elif fmt == "json":
        text = json.dumps(validate_document(report_document(runs, checks)), indent=2, default=_json_default) + "\n"
    elif fmt == "text":
        text = text_grid(to_frame(runs)) + checks_text(checks)
    else:
        raise ValueError(f"Unknown report format: {fmt}")
    if file is None:
        return text
    try:
        with open(file, "w", encoding="utf-8", newline="\n") as dst:
            dst.write(text)
    except OSError as e:
        logger.error(f"Cannot write report: {file}")
        raise OSError(f"{file}: {e}")
    logger.info(f"Wrote {fmt} report {file}")
    return file


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")
