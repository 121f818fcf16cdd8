import numpy as np
import numba as nb
from dataclasses import dataclass

"""
Bit-exact scalar references of the benchmark kernels. All arithmetic is 32-bit two's complement with 64-bit accumulation.
"""

TWIDDLE_FRAC_BITS = 30
FILTER_SIDES = (3, 5, 7, 9, 11)


@dataclass(frozen=True)
class FixedPointFormat:
    frac_bits: int
    total_bits: int = 32

    def __post_init__(self):
        if not 0 <= self.frac_bits <= 31:
            raise ValueError("frac_bits has to be in [0, 31]")

    def quantize(self, x):
        return np.round(np.asarray(x, dtype=np.float64) * (1 << self.frac_bits)).astype(np.int64)


Q30 = FixedPointFormat(TWIDDLE_FRAC_BITS)


def wrap32(values):
    """
    Low 32 bits of int64 values, as signed int64.
    """
    v = np.asarray(values, dtype=np.int64) & 0xFFFFFFFF
    return np.where(v >= 1 << 31, v - (1 << 32), v)


@nb.njit
def _conv2d(x, f, pscale):
    rows, cols = x.shape
    k = f.shape[0]
    half = k // 2
    out = np.zeros((rows, cols), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            acc = 0
            for i in range(k):
                rr = r + i - half
                if rr < 0 or rr >= rows:
                    continue
                for j in range(k):
                    cc = c + j - half
                    if cc < 0 or cc >= cols:
                        continue
                    acc += x[rr, cc] * f[i, j]
            out[r, c] = acc >> pscale
    return out


@nb.njit
def _matmul(a, b):
    n, m = a.shape
    p = b.shape[1]
    c = np.zeros((n, p), dtype=np.int64)
    for i in range(n):
        for j in range(p):
            acc = 0
            for k in range(m):
                acc += a[i, k] * b[k, j]
            c[i, j] = acc
    return c


def oracle_conv2d(x, f, pscale=0):
    """
    Zero-padded same-size 2D convolution (correlation orientation, no filter flip).
    :param: x (H, W) int array.
    :param: f (k, k) int array, k odd in 3..11.
    :param: pscale int arithmetic right shift applied to each 64-bit sum before truncation.
    """
    f = np.asarray(f, dtype=np.int64)
    k = f.shape[0]
    if f.shape != (k, k) or k not in FILTER_SIDES:
        raise ValueError(f"filter has to be odd square between 3x3 and 11x11, got {f.shape}")
    if not 0 <= pscale <= 31:
        raise ValueError("pscale has to be in [0, 31]")
    return wrap32(_conv2d(np.ascontiguousarray(x, dtype=np.int64), f, pscale))


def oracle_matmul(a, b):
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"shapes {a.shape} and {b.shape} do not multiply")
    return wrap32(_matmul(a, b))


def bit_reverse_indices(n):
    bits = int(n).bit_length() - 1
    if n < 2 or 1 << bits != n:
        raise ValueError("FFT size has to be a power of two")
    return np.array([int(f"{m:0{bits}b}"[::-1], 2) for m in range(n)], dtype=np.int64)


def twiddles(n):
    """
    W_k = exp(-2*pi*i*k/n) for k < n/2 in Q1.30.
    :return: (w_re, w_im) int64 arrays.
    """
    angle = 2 * np.pi * np.arange(n // 2) / n
    return Q30.quantize(np.cos(angle)), Q30.quantize(-np.sin(angle))


def oracle_fft(re, im):
    """
    Radix-2 decimation-in-time FFT on bit-reversed input. Per butterfly t = (b * W) >> 30 on the 64-bit sums of products,
    then a' = (a + t) >> 1 and b' = (a - t) >> 1 on the wrapped 32-bit sums. Total scaling 1/n.
    :return: (re, im) int64 arrays.
    """
    re = np.asarray(re, dtype=np.int64)
    im = np.asarray(im, dtype=np.int64)
    n = len(re)
    rev = bit_reverse_indices(n)
    x_re, x_im = re[rev].copy(), im[rev].copy()
    w_re, w_im = twiddles(n)
    h = 1
    while h < n:
        index = np.arange(n).reshape(-1, 2 * h)
        a, b = index[:, :h].ravel(), index[:, h:].ravel()
        k = np.tile(np.arange(h) * (n // 2 // h), n // (2 * h))
        t_re = wrap32((x_re[b] * w_re[k] - x_im[b] * w_im[k]) >> TWIDDLE_FRAC_BITS)
        t_im = wrap32((x_re[b] * w_im[k] + x_im[b] * w_re[k]) >> TWIDDLE_FRAC_BITS)
        a_re, a_im = x_re[a], x_im[a]
        x_re[a], x_im[a] = wrap32(a_re + t_re) >> 1, wrap32(a_im + t_im) >> 1
        x_re[b], x_im[b] = wrap32(a_re - t_re) >> 1, wrap32(a_im - t_im) >> 1
        h *= 2
    return x_re, x_im


def oracle_fft256(re, im):
    if len(re) != 256 or len(im) != 256:
        raise ValueError("oracle_fft256 takes 256 samples")
    return oracle_fft(re, im)


def reference_dft(re, im):
    """
    Double-precision DFT scaled by 1/n, for accuracy checks of the fixed-point FFT.
    """
    x = np.asarray(re, dtype=np.float64) + 1j * np.asarray(im, dtype=np.float64)
    spectrum = np.fft.fft(x) / len(x)
    return spectrum.real, spectrum.imag


def op_count(kind, params):
    """
    Algorithmic multiplies plus adds of one kernel instance.
    """
    n = params["size"]
    if kind == "conv":
        return 2 * params["filter"] ** 2 * n * n
    if kind == "matmul":
        return 2 * n ** 3
    if kind == "fft":
        return 10 * (n // 2) * (n.bit_length() - 1)
    raise ValueError(f"Unknown kernel: {kind}")


def oracle(kind, params, inputs):
    """
    :return: dict output name -> int64 array, for the inputs made by TestData.kernel_inputs.
    """
    if kind == "conv":
        return dict(output=oracle_conv2d(inputs["input"], inputs["filter"], params.get("pscale", 0)))
    if kind == "matmul":
        return dict(c=oracle_matmul(inputs["a"], inputs["b"]))
    if kind == "fft":
        out_re, out_im = oracle_fft(inputs["re"], inputs["im"])
        return dict(work=np.stack([out_re, out_im], axis=1).ravel())
    raise ValueError(f"Unknown kernel: {kind}")
