from dataclasses import dataclass, field
from typing import Dict, Optional
import numpy as np
from loguru import logger
from IMTVectorCoproc.coprocessor.CoprocConfig import Scheme, LANES
from IMTVectorCoproc.kernels.Oracles import FILTER_SIDES

"""
Ordering and ratio checks of average cycle counts across design points. A check whose cells are missing is NOT_RUN.
"""

PASS, FAIL, NOT_RUN = "PASS", "FAIL", "NOT_RUN"
DLP_MIN_SPEEDUP = 2.5
HET_OVERHEAD_MAX = 0.15


@dataclass
class TrendResult:
    name: str
    cells: Dict[str, Optional[float]]
    verdict: str
    detail: str = ""

    def to_dict(self):
        return dict(name=self.name, verdict=self.verdict, cells=dict(self.cells), detail=self.detail)


@dataclass
class _Cells:
    table: object
    values: Dict[str, Optional[float]] = field(default_factory=dict)

    def get(self, scheme, d, workload, kernel=None):
        """
        Average cycles of one cell, None if the table lacks it or the cell failed.
        """
        t = self.table
        mask = (t["scheme"] == scheme.value) & (t["d"] == d) & (t["workload"] == workload)
        if kernel is not None:
            mask &= t["kernel"] == kernel
        rows = t[mask]
        value = None
        if len(rows) and not rows["avg_cycles"].isna().all():
            value = float(rows["avg_cycles"].dropna().iloc[0])
        self.values[f"{workload}/{scheme.value}/D{d}"] = value
        return value


def _result(name, cells, condition, detail=""):
    if any(v is None for v in cells.values.values()):
        logger.warning(f"Trend check {name} not run, missing cells")
        return TrendResult(name, cells.values, NOT_RUN, detail)
    return TrendResult(name, cells.values, PASS if condition() else FAIL, detail)


def dlp_monotonic(table, workload="conv32"):
    cells = _Cells(table)
    values = [cells.get(Scheme.SHARED, d, workload) for d in LANES]
    return _result(
        f"dlp_monotonic_{workload}", cells, lambda: all(a > b for a, b in zip(values, values[1:])),
        "shared scheme average strictly decreases with D",
    )


def dlp_ratio(table, workload="conv32", minimum=DLP_MIN_SPEEDUP):
    cells = _Cells(table)
    d1, d8 = cells.get(Scheme.SHARED, 1, workload), cells.get(Scheme.SHARED, 8, workload)
    return _result(f"dlp_ratio_{workload}", cells, lambda: d1 / d8 >= minimum, f"D=1 / D=8 >= {minimum}")


def tlp_beats_dlp(table, workload="conv4"):
    cells = _Cells(table)
    sym, simd = cells.get(Scheme.DEDICATED, 1, workload), cells.get(Scheme.SHARED, 8, workload)
    return _result(f"tlp_beats_dlp_{workload}", cells, lambda: sym < simd, "Sym MIMD D=1 < SIMD D=8")


def dlp_beats_tlp(table, workload="conv32"):
    cells = _Cells(table)
    simd, sym = cells.get(Scheme.SHARED, 8, workload), cells.get(Scheme.DEDICATED, 1, workload)
    return _result(f"dlp_beats_tlp_{workload}", cells, lambda: simd < sym, "SIMD D=8 < Sym MIMD D=1")


def combined_minimum(table, workload):
    cells = _Cells(table)
    best = cells.get(Scheme.DEDICATED, 8, workload)
    others = [cells.get(s, d, workload) for s in Scheme for d in LANES if (s, d) != (Scheme.DEDICATED, 8)]
    return _result(
        f"combined_minimum_{workload}", cells, lambda: all(best <= v for v in others), "Sym MIMD+SIMD D=8 is the row minimum"
    )


def het_overhead(table, workload, d, maximum=HET_OVERHEAD_MAX):
    cells = _Cells(table)
    het, sym = cells.get(Scheme.SHARED_MFU, d, workload), cells.get(Scheme.DEDICATED, d, workload)
    return _result(
        f"het_overhead_{workload}_D{d}", cells, lambda: 0 <= (het - sym) / sym <= maximum,
        f"0 <= (het - sym) / sym <= {maximum}",
    )


def fft_prefers_tlp(table, workload="fft256"):
    cells = _Cells(table)
    sym = cells.get(Scheme.DEDICATED, 1, workload)
    simd = cells.get(Scheme.SHARED, 8, workload)
    sisd = cells.get(Scheme.SHARED, 1, workload)
    return _result(f"fft_prefers_tlp_{workload}", cells, lambda: sym < simd < sisd, "Sym MIMD D=1 < SIMD D=8 < SISD")


def larger_filters(table):
    cells = _Cells(table)
    names = ["conv32" if k == 3 else f"conv32_f{k}" for k in FILTER_SIDES]
    pairs = [(cells.get(Scheme.SHARED, 1, name), cells.get(Scheme.SHARED, 8, name)) for name in names]

    def non_decreasing():
        speedups = [sisd / simd for sisd, simd in pairs]
        return all(b >= a for a, b in zip(speedups, speedups[1:]))

    return _result("larger_filter_speedup", cells, non_decreasing, "SISD / SIMD D=8 non-decreasing in filter side")


def trend_check(table):
    """
    :param: table DataFrame with the report's CSV columns.
    :return: list of TrendResult.
    """
    results = [
        dlp_monotonic(table),
        dlp_ratio(table),
        tlp_beats_dlp(table),
        dlp_beats_tlp(table),
        combined_minimum(table, "conv32"),
        combined_minimum(table, "matmul64"),
        *(het_overhead(table, workload, d) for workload in ("conv32", "matmul64") for d in (1, 2)),
        fft_prefers_tlp(table),
        larger_filters(table),
    ]
    counts = {v: int(np.sum([r.verdict == v for r in results])) for v in (PASS, FAIL, NOT_RUN)}
    logger.info(f"Trend checks: {counts}")
    return results


def all_passed(results):
    return all(r.verdict == PASS for r in results)
