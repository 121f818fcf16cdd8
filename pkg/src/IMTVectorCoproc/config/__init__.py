"""
Default settings of the simulator, the coprocessor design point and the workload harness.
"""

N_HARTS = 3
N_STAGES = 4

DATA_MEMORY_SIZE = 1 << 20  # 1 MiB
PROGRAM_MEMORY_SIZE = 64 << 10  # 64 KiB
PROGRAM_ORIGIN = 0x0

SPM_BASE = 0x00100000
SPM_CAPACITY = 8192  # bytes per scratchpad
INITIAL_LATENCY = 4
LOAD_LATENCY = 1

N_SPM_CONV = 4
N_SPM_FFT = 4
N_SPM_MATMUL = 3

INSTANCES = 8
SEED = 0x5EED
DATA_BOUND = 1 << 20
N_JOBS = 4

# control registers, numbers chosen by this simulator
CSR_VLEN = 0x800
CSR_EWIDTH = 0x801
CSR_PSCALE = 0x802
CSR_CYCLE = 0xC00
CSR_CYCLEH = 0xC80
CSR_HARTID = 0xF14

CSR_NAMES = {
    "vlen": CSR_VLEN,
    "ewidth": CSR_EWIDTH,
    "pscale": CSR_PSCALE,
    "cyclecount": CSR_CYCLE,
    "cycle": CSR_CYCLE,
    "cycleh": CSR_CYCLEH,
    "hartid": CSR_HARTID,
    "mhartid": CSR_HARTID,
}

ENERGY_WEIGHTS = dict(
    scalar_instr=1.0,
    vector_line=2.0,
    spm_line=1.5,
    mem_word=3.0,
    mfu_idle_cycle=0.2,
    base_cycle=0.5,
)

REPORT_SCHEMA_VERSION = "1.0"
