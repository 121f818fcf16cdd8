from dataclasses import dataclass, field
from typing import Dict, Tuple
import numpy as np
from loguru import logger
from IMTVectorCoproc.exceptions import KernelBuildError
from IMTVectorCoproc.assembler.Assembler import Assembler, SourceUnit
from IMTVectorCoproc.kernels.SpmPlan import SpmPlan
from IMTVectorCoproc.kernels.Oracles import FILTER_SIDES, TWIDDLE_FRAC_BITS, twiddles, op_count
from IMTVectorCoproc.isa.ISA import u32
from IMTVectorCoproc.config import N_HARTS, INSTANCES, N_SPM_CONV, N_SPM_FFT, N_SPM_MATMUL, PROGRAM_ORIGIN

"""
Benchmark kernels as assembly text. Every kernel runs the same code on all harts; a hart finds its data region
(s8) and its scratchpad slice offset (s9) from the hartid CSR. s11 counts finished instances and the
store of s11 to the done word (address in s10) marks an instance completion.
"""

KERNELS = ("conv", "fft", "matmul")
DEFAULT_PARAMS = dict(
    conv=dict(size=32, filter=3, pscale=0),
    fft=dict(size=256),
    matmul=dict(size=64),
)
REQUIRED_SPMS = dict(conv=N_SPM_CONV, fft=N_SPM_FFT, matmul=N_SPM_MATMUL)
CONV_SIZES = (4, 8, 16, 32)
MATMUL_BLOCKS = (32, 16, 8, 4)
REGION_BASE = 0x1000
REGION_ALIGN = 64


@dataclass
class KernelLayout:
    """
    Main-memory placement of one kernel: a region per hart at base + hart * stride plus hart-independent tables.
    """
    base: int
    stride: int
    buffers: Dict[str, Tuple[int, int]] = field(default_factory=dict)  # name -> (offset in region, words)
    tables: Dict[str, Tuple[int, int]] = field(default_factory=dict)  # name -> (address, words)

    def address(self, name, hart=0):
        if name in self.tables:
            return self.tables[name][0]
        return self.base + hart * self.stride + self.buffers[name][0]

    def words(self, name):
        return (self.tables.get(name) or self.buffers[name])[1]

    @property
    def end(self):
        tables_end = max((addr + 4 * words for addr, words in self.tables.values()), default=0)
        return max(self.base + N_HARTS * self.stride, tables_end)


def region_layout(base, buffers, table_words=()):
    """
    :param: base int first byte of the layout.
    :param: buffers list of (name, words) laid out back to back inside each hart's region.
    :param: table_words list of (name, words) placed once after the hart regions.
    """
    layout = KernelLayout(base, 0)
    offset = 0
    for name, words in buffers:
        layout.buffers[name] = (offset, words)
        offset += 4 * words
    layout.stride = (offset + REGION_ALIGN - 1) // REGION_ALIGN * REGION_ALIGN
    address = base + N_HARTS * layout.stride
    for name, words in table_words:
        layout.tables[name] = (address, words)
        address += 4 * words
    return layout


@dataclass
class KernelText:
    kind: str
    params: dict
    prefix: str
    source: str
    layout: KernelLayout
    plan: SpmPlan
    instances: int
    outputs: Tuple[str, ...]

    @property
    def entry(self):
        return f"{self.prefix}entry"

    @property
    def ops_per_instance(self):
        return op_count(self.kind, self.params)

    def stage(self, memory, hart, inputs):
        """
        Writes the inputs made by TestData.kernel_inputs into the hart's region.
        """
        layout = self.layout
        if self.kind == "fft":
            samples = np.stack([inputs["re"], inputs["im"]], axis=1).ravel()
            memory.load_words(layout.address("in", hart), samples)
            return
        for name, values in inputs.items():
            memory.load_words(layout.address(name, hart), np.asarray(values).ravel())

    def collect(self, memory, hart):
        """
        :return: dict output name -> int64 words read back from the hart's region.
        """
        return {name: memory.peek_words(self.layout.address(name, hart), self.layout.words(name)) for name in self.outputs}


@dataclass
class KernelProgram:
    program: object
    source: str
    entries: Dict[int, str]
    kernels: Dict[int, KernelText]  # hart -> kernel it runs

    def done_address(self, hart):
        return self.kernels[hart].layout.address("done", hart)

    def watch(self):
        return {self.done_address(hart): hart for hart in self.entries}


class _Emitter:
    def __init__(self, prefix) -> None:
        self.prefix = prefix
        self.lines = []

    def __call__(self, text):
        self.lines.append(f"    {text}")

    def label(self, name):
        self.lines.append(f"{self.prefix}{name}:")

    def ref(self, name):
        return f"{self.prefix}{name}"

    def comment(self, text):
        self.lines.append(f"# {text}")

    def address(self, reg, const, base_reg):
        self(f"li {reg}, {const}")
        self(f"add {reg}, {reg}, {base_reg}")

    @property
    def text(self):
        return "\n".join(self.lines) + "\n"


class KernelBuilder:
    def __init__(self, cfg, instances=INSTANCES, origin=PROGRAM_ORIGIN) -> None:
        """
        :param: cfg CoprocConfig the kernels are planned for (SPM slices depend on D and N, not on the scheme).
        :param: instances int kernel instances each hart runs before halting.
        """
        if instances < 1:
            raise KernelBuildError("instances has to be at least 1")
        self.cfg = cfg
        self.instances = instances
        self.origin = origin

    # ------------------------------------------------------------------ programs

    def build(self, kind, params=None, harts=range(N_HARTS), region_base=REGION_BASE):
        """
        Homogeneous workload: every hart in harts runs the same kernel on its own data.
        """
        text = self.kernel_text(kind, params, region_base, prefix=f"{kind}_")
        return self._program([text], {hart: text for hart in harts})

    def compose(self, assignment, region_base=REGION_BASE):
        """
        Composite workload.
        :param: assignment dict hart -> (kind, params); each distinct kernel is emitted once with its own label prefix.
        """
        texts = dict()
        by_hart = dict()
        base = region_base
        for hart, (kind, params) in sorted(assignment.items()):
            key = (kind, tuple(sorted((params or {}).items())))
            if key not in texts:
                texts[key] = self.kernel_text(kind, params, base, prefix=f"k{len(texts)}_{kind}_")
                base = texts[key].layout.end
            by_hart[hart] = texts[key]
        return self._program(list(texts.values()), by_hart)

    def _program(self, texts, by_hart):
        source = "".join(t.source for t in texts)
        program = Assembler(self.origin).assemble(SourceUnit.from_text(source, "<kernels>"))
        entries = {hart: text.entry for hart, text in by_hart.items()}
        logger.debug(f"Kernel program: {len(program)} instructions, entries {entries}")
        return KernelProgram(program, source, entries, dict(by_hart))

    def kernel_text(self, kind, params=None, region_base=REGION_BASE, prefix=None):
        if kind not in KERNELS:
            raise KernelBuildError(f"Unknown kernel: {kind}")
        params = {**DEFAULT_PARAMS[kind], **(params or {})}
        prefix = prefix if prefix is not None else f"{kind}_"
        build = dict(conv=self._conv, fft=self._fft, matmul=self._matmul)[kind]
        e = _Emitter(prefix)
        layout, plan, outputs = build(e, params, region_base)
        plan.describe()
        return KernelText(kind, params, prefix, e.text, layout, plan, self.instances, outputs)

    # ------------------------------------------------------------------ shared frame

    def _prologue(self, e, kind, layout, plan):
        e.comment(f"{kind} kernel, D={self.cfg.D}")
        e.label("entry")
        e("csrr t0, hartid")
        e(f"li t1, {layout.stride}")
        e("mul s8, t0, t1")
        e(f"li t1, {layout.base}")
        e("add s8, s8, t1")
        e(f"li t1, {plan.hart_stride}")
        e("mul s9, t0, t1")
        e(f"li t1, {layout.buffers['done'][0]}")
        e("add s10, s8, t1")
        e("li s11, 0")
        e.label("instance")

    def _epilogue(self, e):
        e("addi s11, s11, 1")
        e("sw s11, 0(s10)")
        e(f"li t0, {self.instances}")
        e(f"bge s11, t0, {e.ref('exit')}")
        e(f"j {e.ref('instance')}")
        e.label("exit")
        e("ebreak")

    # ------------------------------------------------------------------ conv

    def _conv(self, e, params, region_base):
        """
        Row-wise convolution in im2col form. A ring of k padded-row slots in SPM holds the input rows of the current
        output row. Every tap (i, j) gathers slot (r + i) mod k shifted by j words into the column buffer with kvcp,
        scales it in place by the filter word staged in SPM with ksvmuls and accumulates it with kaddv.
        """
        n, k, pscale = params["size"], params["filter"], params.get("pscale", 0)
        if n not in CONV_SIZES:
            raise KernelBuildError(f"conv size has to be one of {CONV_SIZES}")
        if k not in FILTER_SIDES:
            raise KernelBuildError(f"conv filter has to be one of {FILTER_SIDES}")
        if not 0 <= pscale <= 31:
            raise KernelBuildError("conv pscale has to be in [0, 31]")
        half = k // 2
        row_bytes = 4 * n
        slot_bytes = 4 * (n + k - 1)
        layout = region_layout(region_base, [("padded", (n + k - 1) * n), ("filter", k * k), ("output", n * n), ("done", 1)])
        layout.buffers["input"] = (layout.buffers["padded"][0] + half * row_bytes, n * n)
        plan = SpmPlan(self.cfg)
        plan.allocate("slots", k * slot_bytes, 0)
        plan.allocate("acc", row_bytes)
        plan.allocate("col", row_bytes)
        plan.allocate("filter", 4 * k * k)
        slots, acc, col = plan.address("slots"), plan.address("acc"), plan.address("col")
        padded = layout.buffers["padded"][0]

        self._prologue(e, "conv", layout, plan)
        e(f"li a2, {row_bytes}")
        e("csrw vlen, a2")
        e(f"li s6, {pscale}")
        e.address("a3", acc, "s9")
        e.address("a4", col, "s9")
        e.address("s5", plan.address("filter"), "s9")
        e.address("t0", layout.buffers["filter"][0], "s8")
        e(f"li t2, {4 * k * k}")
        e("kmemld (s5),(t0),t2")
        e.comment(f"preload padded rows 0..{k - 2}")
        for q in range(k - 1):
            e.address("t0", padded + q * row_bytes, "s8")
            e.address("t1", slots + q * slot_bytes + 4 * half, "s9")
            e("kmemld (t1),(t0),a2")
        e.address("s1", padded + (k - 1) * row_bytes, "s8")
        e.address("s2", layout.buffers["output"][0], "s8")
        e("li s3, 0")
        e(f"li s0, {n}")
        e(f"li s7, {slot_bytes}")
        e.label("row")
        e(f"addi t0, s3, {k - 1}")
        self._mod_k(e, k, "fill")
        e("mul t0, t0, s7")
        e.address("t1", slots + 4 * half, "s9")
        e("add t0, t0, t1")
        e("kmemld (t0),(s1),a2")
        for i in range(k):
            e(f"addi t0, s3, {i}")
            self._mod_k(e, k, f"tap{i}")
            e("mul t0, t0, s7")
            e(f"li t1, {slots}")
            e("add t0, t0, t1")
            e("add s4, t0, s9")
            for j in range(k):
                source = "s4"
                if j:
                    e(f"addi t3, s4, {4 * j}")
                    source = "t3"
                e(f"kvcp (a4),({source})")
                e(f"addi t5, s5, {4 * (i * k + j)}")
                if i == 0 and j == 0:
                    e("ksvmuls (a3),(a4),(t5)")
                else:
                    e("ksvmuls (a4),(a4),(t5)")
                    e("kaddv (a3),(a3),(a4)")
        if pscale:
            e("ksrav (a3),(a3),s6")
        e("kmemstr (s2),(a3),a2")
        e(f"addi s1, s1, {row_bytes}")
        e(f"addi s2, s2, {row_bytes}")
        e("addi s3, s3, 1")
        e("mv t0, s3")
        self._mod_k(e, k, "head")
        e("mv s3, t0")
        e("addi s0, s0, -1")
        e(f"beqz s0, {e.ref('rows_done')}")
        e(f"j {e.ref('row')}")
        e.label("rows_done")
        self._epilogue(e)
        return layout, plan, ("output",)

    @staticmethod
    def _mod_k(e, k, name):
        """
        t0 = t0 mod k for 0 <= t0 < 2k.
        """
        e(f"li t1, {k}")
        e(f"blt t0, t1, {e.ref(name)}")
        e("sub t0, t0, t1")
        e.label(name)

    # ------------------------------------------------------------------ fft

    def _fft(self, e, params, region_base):
        """
        Radix-2 FFT in constant-geometry order on natural-order samples. Before the stage that joins transforms of size l
        into size 2l (m = n / 2l blocks), sample j * 2m + k holds output j of the size-l transform of the samples
        k, k + 2m, k + 4m, ...; the a block j is samples [2jm, 2jm + m) and the b block the m samples after it.
        A stage writes b * W^(jm) for every butterfly into the product vector t (two kdotpps, then ksvaddrf from the
        zero pair), gathers the a blocks with kvcp, forms a + t and a - t as the two output halves with kaddv and ksubv
        and scales the output by 1/2 with ksrav. Stage buffers ping-pong between two SPMs.
        """
        n = params["size"]
        if n < 4 or n & (n - 1):
            raise KernelBuildError("fft size has to be a power of two of at least 4")
        half_bytes = 4 * n
        work_bytes = 8 * n
        layout = region_layout(region_base, [("in", 2 * n), ("work", 2 * n), ("done", 1)], [("twiddles", 2 * n)])
        plan = SpmPlan(self.cfg)
        plan.allocate("x0", work_bytes)
        plan.allocate("x1", work_bytes)
        plan.allocate("twiddles", work_bytes)
        plan.allocate("a", half_bytes)
        plan.allocate("t", half_bytes + 4)
        plan.allocate("zero", 8)
        w_re, w_im = twiddles(n)

        e.comment("twiddles [w_re, -w_im, w_im, w_re]")
        e(f".org 0x{layout.address('twiddles'):08x}")
        for re_k, im_k in zip(w_re, w_im):
            e(".word " + ", ".join(f"0x{u32(int(v)):08x}" for v in (re_k, -im_k, im_k, re_k)))

        self._prologue(e, "fft", layout, plan)
        e(f"csrwi pscale, {TWIDDLE_FRAC_BITS}")
        e.address("a6", plan.address("x0"), "s9")
        e.address("a7", plan.address("x1"), "s9")
        e.address("a3", plan.address("twiddles"), "s9")
        e.address("a5", plan.address("zero"), "s9")
        e.address("s5", plan.address("a"), "s9")
        e.address("s7", plan.address("t"), "s9")
        e.address("a2", half_bytes, "s7")
        e(f"li t2, {work_bytes}")
        e(f"li t0, {layout.address('twiddles')}")
        e("kmemld (a3),(t0),t2")
        e.address("t0", layout.buffers["in"][0], "s8")
        e("kmemld (a6),(t0),t2")
        e("li t0, 8")
        e("csrw vlen, t0")
        e("ksubv (a5),(a5),(a5)")
        e(f"li s3, {half_bytes}")  # 8 * m bytes
        e.label("stage")
        e("li t0, 8")
        e("csrw vlen, t0")
        e("add s4, s3, s3")
        e("add s2, a6, s3")
        e("mv s6, a3")
        e("mv s1, s7")
        e.label("block")
        e("srli a4, s3, 3")
        e("addi t5, s6, 8")
        e.label("butterfly")
        e("kdotpps (a0),(s2),(s6)")
        e("kdotpps (a1),(s2),(t5)")
        e("ksvaddrf (s1),(a5),a0")  # vlen 8 writes the word twice, the next write covers the copy
        e("addi s1, s1, 4")
        e("ksvaddrf (s1),(a5),a1")
        e("addi s1, s1, 4")
        e("addi s2, s2, 8")
        e("addi a4, a4, -1")
        e(f"bnez a4, {e.ref('butterfly')}")
        e("add s2, s2, s3")
        e("add s6, s6, s4")
        e(f"blt s1, a2, {e.ref('block')}")
        e("csrw vlen, s3")
        e("mv s2, a6")
        e("mv t1, s5")
        e.address("t6", half_bytes, "s5")
        e.label("gather")
        e("kvcp (t1),(s2)")
        e("add t1, t1, s3")
        e("add s2, s2, s4")
        e(f"blt t1, t6, {e.ref('gather')}")
        e(f"li t0, {half_bytes}")
        e("csrw vlen, t0")
        e("kaddv (a7),(s5),(s7)")
        e("add t1, a7, t0")
        e("ksubv (t1),(s5),(s7)")
        e.comment("scale the stage output by 1/2")
        e(f"li t0, {work_bytes}")
        e("csrw vlen, t0")
        e("li t0, 1")
        e("ksrav (a7),(a7),t0")
        e("mv t0, a6")
        e("mv a6, a7")
        e("mv a7, t0")
        e("srli s3, s3, 1")
        e("li t0, 8")
        e(f"bge s3, t0, {e.ref('stage')}")
        e.address("t0", layout.buffers["work"][0], "s8")
        e("kmemstr (t0),(a6),t2")
        self._epilogue(e)
        return layout, plan, ("work",)

    # ------------------------------------------------------------------ matmul

    def _matmul_plan(self, n):
        for width in (w for w in MATMUL_BLOCKS if w <= n and n % w == 0):
            plan = SpmPlan(self.cfg)
            try:
                segments = plan.allocate_rows("b", n, 4 * width)
                plan.allocate("c", 4 * width)
                plan.allocate("col", 4 * width)
                plan.allocate("a", 4 * n)
            except KernelBuildError:
                continue
            return width, plan, segments
        raise KernelBuildError(f"SPM buffer b of matmul {n}x{n} does not fit {self.cfg.N} SPMs")

    def _matmul(self, e, params, region_base):
        """
        C row i of a column block = sum over k of A[i, k] * B[k, block]. B blocks are staged row by row with kmemld
        (row segments follow the SPM plan) and A row i is staged before its row of C. Per k the B row is gathered into
        the column buffer with kvcp, scaled in place by A[i, k] with ksvmuls and accumulated with kaddv.
        """
        n = params["size"]
        if n < 4 or n % 4:
            raise KernelBuildError("matmul size has to be a multiple of 4")
        width, plan, segments = self._matmul_plan(n)
        line = 4 * width
        layout = region_layout(region_base, [("a", n * n), ("b", n * n), ("c", n * n), ("done", 1)])
        a, b, c = (layout.buffers[name][0] for name in ("a", "b", "c"))

        self._prologue(e, "matmul", layout, plan)
        e(f"li a2, {line}")
        e("csrw vlen, a2")
        e.address("a3", plan.address("c"), "s9")
        e.address("a4", plan.address("col"), "s9")
        e.address("a5", plan.address("a"), "s9")
        e(f"li t2, {4 * n}")
        e.address("s1", b, "s8")
        e.address("s4", c, "s8")
        e(f"li s5, {n // width}")
        e.label("block")
        e("mv t0, s1")
        for segment in segments:
            e.address("t1", plan.address(segment.name), "s9")
            for _ in range(segment.size // line):
                e("kmemld (t1),(t0),a2")
                e("add t0, t0, t2")
                e(f"addi t1, t1, {line}")
        e.address("s2", a, "s8")
        e("mv s3, s4")
        e(f"li s0, {n}")
        e.label("row")
        e("kmemld (a5),(s2),t2")
        k = 0
        for segment in segments:
            e.address("t3", plan.address(segment.name), "s9")
            for _ in range(segment.size // line):
                e("kvcp (a4),(t3)")
                e(f"addi t5, a5, {4 * k}")
                if k == 0:
                    e("ksvmuls (a3),(a4),(t5)")
                else:
                    e("ksvmuls (a4),(a4),(t5)")
                    e("kaddv (a3),(a3),(a4)")
                e(f"addi t3, t3, {line}")
                k += 1
        e("kmemstr (s3),(a3),a2")
        e("add s2, s2, t2")
        e("add s3, s3, t2")
        e("addi s0, s0, -1")
        e(f"beqz s0, {e.ref('rows_done')}")
        e(f"j {e.ref('row')}")
        e.label("rows_done")
        e(f"addi s1, s1, {line}")
        e(f"addi s4, s4, {line}")
        e("addi s5, s5, -1")
        e(f"beqz s5, {e.ref('blocks_done')}")
        e(f"j {e.ref('block')}")
        e.label("blocks_done")
        self._epilogue(e)
        return layout, plan, ("c",)



def build_kernel(kind, params, cfg, instances=INSTANCES, harts=range(N_HARTS), region_base=REGION_BASE):
    return KernelBuilder(cfg, instances).build(kind, params, harts, region_base)
