import numpy as np
import pytest
from IMTVectorCoproc.exceptions import KernelBuildError
from IMTVectorCoproc.coprocessor.CoprocConfig import CoprocConfig, Scheme
from IMTVectorCoproc.kernels.TestData import generate_test_data, generate_matrix, conv_filter_bound, kernel_inputs, LCG_A, LCG_C
from IMTVectorCoproc.kernels.Oracles import (
    oracle_conv2d, oracle_matmul, oracle_fft, oracle_fft256, reference_dft, bit_reverse_indices, twiddles, wrap32, op_count, Q30,
)
from IMTVectorCoproc.kernels.SpmPlan import SpmPlan
from IMTVectorCoproc.kernels.KernelBuilder import KernelBuilder, REQUIRED_SPMS, region_layout, build_kernel
from IMTVectorCoproc.harness.Workload import WorkloadSpec, Workload
from IMTVectorCoproc.config import SPM_BASE, SPM_CAPACITY, N_SPM_FFT, N_SPM_MATMUL

BOUND = 1 << 20


def _reference_lcg(seed, count, bound):
    state, values = seed, []
    for _ in range(count):
        state = (state * LCG_A + LCG_C) % (1 << 64)
        values.append((state >> 32) % (2 * bound - 1) - (bound - 1))
    return values


class TestTestData:
    def test_matches_integer_reference(self):
        assert generate_test_data(12345, 50, BOUND).tolist() == _reference_lcg(12345, 50, BOUND)

    def test_deterministic(self):
        assert np.array_equal(generate_test_data(7, (8, 8)), generate_test_data(7, (8, 8)))
        assert not np.array_equal(generate_test_data(7, (8, 8)), generate_test_data(8, (8, 8)))

    def test_bounds(self):
        values = generate_test_data(3, 10000)
        assert np.abs(values).max() < BOUND
        assert values.min() < 0 < values.max()
        assert not generate_test_data(3, 100, 1).any()

    def test_matrix(self):
        m = generate_matrix(1, 3, 5)
        assert m.data.shape == (3, 5)
        assert len(m.words()) == 15

    def test_filter_bound_keeps_sums_in_32_bits(self):
        for k in (3, 11):
            bound = conv_filter_bound(k)
            assert k * k * (BOUND - 1) * (bound - 1) < 1 << 31

    def test_kernel_inputs(self):
        conv = kernel_inputs("conv", dict(size=8, filter=5, pscale=2), 1)
        assert conv["input"].shape == (8, 8) and conv["filter"].shape == (5, 5)
        assert np.abs(conv["filter"]).max() < conv_filter_bound(5)
        fft = kernel_inputs("fft", dict(size=16), 1)
        assert fft["re"].shape == fft["im"].shape == (16,)
        with pytest.raises(ValueError):
            kernel_inputs("sort", dict(size=4), 1)


class TestConvOracle:
    def test_border_counts(self):
        out = oracle_conv2d(np.ones((4, 4), dtype=np.int64), np.ones((3, 3), dtype=np.int64))
        assert out[0, 0] == 4 and out[0, 1] == 6 and out[1, 1] == 9 and out[3, 3] == 4

    def test_identity_filter(self):
        x = generate_test_data(5, (8, 8))
        f = np.zeros((5, 5), dtype=np.int64)
        f[2, 2] = 1
        assert np.array_equal(oracle_conv2d(x, f), x)

    def test_no_flip(self):
        x = np.zeros((5, 5), dtype=np.int64)
        x[2, 2] = 1
        f = np.arange(9).reshape(3, 3)
        assert np.array_equal(oracle_conv2d(x, f)[1:4, 1:4], f[::-1, ::-1])

    def test_pscale(self):
        out = oracle_conv2d(np.full((4, 4), -3, dtype=np.int64), np.ones((3, 3), dtype=np.int64), pscale=2)
        assert out[1, 1] == -27 >> 2

    def test_wraps(self):
        x = np.full((4, 4), (1 << 31) - 1, dtype=np.int64)
        out = oracle_conv2d(x, np.ones((3, 3), dtype=np.int64))
        assert out[1, 1] == wrap32(9 * ((1 << 31) - 1))

    def test_bad_filter(self):
        with pytest.raises(ValueError):
            oracle_conv2d(np.ones((4, 4)), np.ones((4, 4)))


class TestMatmulOracle:
    def test_identity(self):
        a = generate_test_data(2, (8, 8))
        assert np.array_equal(oracle_matmul(a, np.eye(8, dtype=np.int64)), a)

    def test_against_numpy(self):
        a, b = generate_test_data(2, (6, 6), 1000), generate_test_data(3, (6, 6), 1000)
        assert np.array_equal(oracle_matmul(a, b), a @ b)

    def test_shapes(self):
        with pytest.raises(ValueError):
            oracle_matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestFftOracle:
    def test_bit_reverse(self):
        assert bit_reverse_indices(8).tolist() == [0, 4, 2, 6, 1, 5, 3, 7]
        with pytest.raises(ValueError):
            bit_reverse_indices(12)

    def test_twiddles(self):
        w_re, w_im = twiddles(8)
        assert w_re[0] == 1 << 30 and w_im[0] == 0
        assert w_re[2] == 0 and w_im[2] == -(1 << 30)
        assert w_re[1] == Q30.quantize(np.cos(np.pi / 4))

    def test_impulse(self):
        re = np.zeros(256, dtype=np.int64)
        re[0] = BOUND
        out_re, out_im = oracle_fft256(re, np.zeros(256, dtype=np.int64))
        assert (out_re == 4096).all() and (out_im == 0).all()

    def test_close_to_dft(self):
        re, im = generate_test_data(9, 256), generate_test_data(10, 256)
        out_re, out_im = oracle_fft(re, im)
        ref_re, ref_im = reference_dft(re, im)
        assert np.abs(out_re - ref_re).max() <= 512
        assert np.abs(out_im - ref_im).max() <= 512

    def test_size_check(self):
        with pytest.raises(ValueError):
            oracle_fft256(np.zeros(128), np.zeros(128))

    def test_op_count(self):
        assert op_count("fft", dict(size=256)) == 10 * 128 * 8
        assert op_count("matmul", dict(size=64)) == 2 * 64 ** 3
        assert op_count("conv", dict(size=32, filter=3)) == 2 * 9 * 32 * 32


class TestSpmPlan:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_slices_per_hart(self, scheme):
        plan = SpmPlan(CoprocConfig(scheme, D=8))
        assert plan.slice_bytes == 2720
        assert plan.hart_stride == 2720
        assert SpmPlan(CoprocConfig(scheme, D=1)).slice_bytes == 2728

    def test_first_fit(self):
        plan = SpmPlan(CoprocConfig(Scheme.SHARED))
        plan.allocate("a", 2000)
        b = plan.allocate("b", 2000)
        assert b.spm == 1
        assert plan.address("b") == SPM_BASE + SPM_CAPACITY

    def test_overflow_names_buffer(self):
        plan = SpmPlan(CoprocConfig(Scheme.SHARED, N=1))
        with pytest.raises(KernelBuildError, match="huge"):
            plan.allocate("huge", SPM_CAPACITY)

    def test_rows_never_straddle(self):
        plan = SpmPlan(CoprocConfig(Scheme.SHARED, N=3))
        segments = plan.allocate_rows("b", 64, 64)
        assert sum(s.size for s in segments) == 64 * 64
        assert all(s.size % 64 == 0 for s in segments)
        assert [s.spm for s in segments] == [0, 1]


class TestKernelBuilder:
    def test_layout(self):
        layout = region_layout(0x1000, [("a", 3), ("b", 5)], [("t", 4)])
        assert layout.stride == 64
        assert layout.address("b", 2) == 0x1000 + 128 + 12
        assert layout.address("t") == 0x1000 + 3 * 64

    @pytest.mark.parametrize("kind, params", [
        ("conv", dict(size=32, filter=11)),
        ("fft", dict(size=256)),
        ("matmul", dict(size=64)),
    ])
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_full_size_kernels_assemble(self, kind, params, scheme):
        kernels = KernelBuilder(CoprocConfig(scheme, D=8, N=4)).build(kind, params)
        assert kernels.entries == {0: f"{kind}_entry", 1: f"{kind}_entry", 2: f"{kind}_entry"}
        assert len(set(kernels.watch())) == 3

    @pytest.mark.parametrize("kind, params", [
        ("conv", dict(size=32, filter=3)),
        ("conv", dict(size=8, pscale=4)),
        ("fft", dict(size=256)),
        ("matmul", dict(size=64)),
    ])
    @pytest.mark.parametrize("d", [1, 2, 4, 8])
    def test_text_does_not_depend_on_scheme(self, kind, params, d):
        n = REQUIRED_SPMS[kind]
        sources = {KernelBuilder(CoprocConfig(scheme, D=d, N=n)).kernel_text(kind, params).source for scheme in Scheme}
        assert len(sources) == 1

    @pytest.mark.parametrize("scheme", list(Scheme))
    @pytest.mark.parametrize("d", [1, 2])
    def test_matmul_block_width(self, scheme, d):
        text = KernelBuilder(CoprocConfig(scheme, D=d, N=N_SPM_MATMUL)).kernel_text("matmul", dict(size=64))
        assert "li a2, 64" in text.source
        assert text.plan.buffers["b[0]"].size == 42 * 64
        assert text.plan.buffers["b[1]"].size == 22 * 64
        assert text.plan.buffers["a"].spm == 1

    def test_inner_loop_spreads_over_unit_classes(self):
        source = KernelBuilder(CoprocConfig(D=2)).kernel_text("conv", dict(size=32, filter=3)).source
        assert source.count("kvcp") == 9
        assert source.count("ksvmuls") == 9
        assert source.count("kaddv") == 8

    def test_fft_has_no_scalar_loads(self):
        source = KernelBuilder(CoprocConfig(N=N_SPM_FFT)).kernel_text("fft", dict(size=256)).source
        assert "lw " not in source
        assert "kdotpps" in source and "ksvaddrf" in source

    def test_build_kernel_for_some_harts(self):
        kernels = build_kernel("matmul", dict(size=8), CoprocConfig(Scheme.SHARED_MFU, N=3), instances=1, harts=[0, 2])
        assert sorted(kernels.entries) == [0, 2]
        assert kernels.program.labels["matmul_entry"] == 0

    def test_composite_has_one_text_per_kernel(self):
        assignment = {0: ("conv", dict(size=4)), 1: ("fft", dict(size=16)), 2: ("conv", dict(size=4))}
        kernels = KernelBuilder(CoprocConfig(Scheme.DEDICATED)).compose(assignment)
        assert kernels.entries[0] == kernels.entries[2] == "k0_conv_entry"
        assert kernels.entries[1] == "k1_fft_entry"
        assert kernels.done_address(1) >= kernels.kernels[0].layout.end

    @pytest.mark.parametrize("kind, params", [
        ("conv", dict(size=6)),
        ("conv", dict(size=8, filter=4)),
        ("fft", dict(size=12)),
        ("matmul", dict(size=6)),
        ("sort", dict()),
    ])
    def test_rejected(self, kind, params):
        with pytest.raises(KernelBuildError):
            KernelBuilder(CoprocConfig()).kernel_text(kind, params)


SMALL_WORKLOADS = [
    WorkloadSpec(kernel="conv", params=dict(size=4), instances=2),
    WorkloadSpec(kernel="conv", params=dict(size=8, filter=5), instances=1),
    WorkloadSpec(kernel="conv", params=dict(size=8, pscale=4), instances=1),
    WorkloadSpec(kernel="fft", params=dict(size=16), instances=2),
    WorkloadSpec(kernel="matmul", params=dict(size=8), instances=2),
]


class TestKernelsMatchOracles:
    @pytest.mark.parametrize("w", SMALL_WORKLOADS, ids=lambda w: w.name)
    @pytest.mark.parametrize("scheme", list(Scheme))
    @pytest.mark.parametrize("d", [1, 4])
    def test_small_kernels(self, w, scheme, d):
        cfg = CoprocConfig(scheme, D=d, N=w.required_spms)
        report = Workload(w, cfg, seed=11).run()
        assert report.verified
        assert report.instances[w.kernel] == w.instances
        assert report.averages[w.kernel] > 0

    def test_outputs_do_not_depend_on_scheme(self):
        w = WorkloadSpec(kernel="fft", params=dict(size=16), instances=1)
        outputs = []
        for scheme in Scheme:
            workload = Workload(w, CoprocConfig(scheme, N=4), seed=3)
            workload.run()
            outputs.append([workload.kernels.kernels[h].collect(workload.core.memory, h)["work"].tolist() for h in range(3)])
        assert outputs[0] == outputs[1] == outputs[2]

    def test_composite(self):
        assignment = {0: ("conv", dict(size=4)), 1: ("fft", dict(size=16)), 2: ("matmul", dict(size=8))}
        w = WorkloadSpec("composite", assignment=assignment, instances=1)
        report = Workload(w, CoprocConfig(Scheme.SHARED_MFU, D=2, N=w.required_spms)).run()
        assert sorted(report.averages) == ["conv", "fft", "matmul"]


FULL_SIZE_WORKLOADS = ["conv32", "conv32_f5", "conv32_f7", "conv32_f9", "conv32_f11", "fft256", "matmul64"]


@pytest.mark.slow
class TestFullSizeKernels:
    @pytest.mark.parametrize("name", FULL_SIZE_WORKLOADS)
    @pytest.mark.parametrize("scheme", list(Scheme))
    @pytest.mark.parametrize("d", [1, 8])
    def test_match_oracles(self, name, scheme, d):
        w = WorkloadSpec.parse(name, instances=1)
        report = Workload(w, CoprocConfig(scheme, D=d, N=w.required_spms), seed=21).run()
        assert report.verified
        assert report.instances[w.kernel] == 1
