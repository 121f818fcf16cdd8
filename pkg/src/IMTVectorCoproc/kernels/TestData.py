import numpy as np
import numba as nb
from dataclasses import dataclass
from IMTVectorCoproc.config import DATA_BOUND

"""
Deterministic kernel inputs. 64-bit linear congruential generator:
state = state * 6364136223846793005 + 1442695040888963407 (mod 2^64),
value = ((state >> 32) mod (2*bound - 1)) - (bound - 1), so |value| < bound.
"""

LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
MASK64 = (1 << 64) - 1


@nb.njit
def _lcg_draws(seed, count, bound):
    out = np.empty(count, dtype=np.int64)
    state = seed
    a = np.uint64(LCG_A)
    c = np.uint64(LCG_C)
    span = np.uint64(2 * bound - 1)
    for n in range(count):
        state = state * a + c
        out[n] = np.int64((state >> np.uint64(32)) % span) - (bound - 1)
    return out


@dataclass
class MatrixSpec:
    rows: int
    cols: int
    data: np.ndarray  # (rows, cols) int64, values fit 32 bits

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64).reshape(self.rows, self.cols)

    def words(self):
        return self.data.ravel()


def generate_test_data(seed, shape, bound=DATA_BOUND):
    """
    :param: seed int 64-bit seed.
    :param: shape int or tuple of the returned array.
    :param: bound int exclusive magnitude bound of the values.
    :return: int64 array of the given shape.
    """
    if bound < 1:
        raise ValueError("bound has to be positive")
    count = int(np.prod(shape))
    return _lcg_draws(np.uint64(seed & MASK64), count, bound).reshape(shape)


def generate_matrix(seed, rows, cols, bound=DATA_BOUND):
    return MatrixSpec(rows, cols, generate_test_data(seed, (rows, cols), bound))


def conv_filter_bound(k, bound=DATA_BOUND):
    """
    Largest filter magnitude for which a k x k window over inputs below bound never leaves 32 bits.
    Used by the post-scaled convolution variant.
    """
    return max(2, ((1 << 31) - 1) // (k * k * (bound - 1)) + 1)


def kernel_inputs(kind, params, seed):
    """
    :param: kind str conv, fft or matmul.
    :param: params dict kernel parameters (see KernelBuilder).
    :param: seed int data seed of one hart.
    :return: dict input name -> int64 array.
    """
    if kind == "conv":
        n, k = params["size"], params["filter"]
        filter_bound = conv_filter_bound(k) if params.get("pscale", 0) else DATA_BOUND
        return dict(
            input=generate_test_data(seed, (n, n)),
            filter=generate_test_data(seed ^ 0xF117E5, (k, k), filter_bound),
        )
    if kind == "matmul":
        n = params["size"]
        return dict(a=generate_test_data(seed, (n, n)), b=generate_test_data(seed ^ 0xB, (n, n)))
    if kind == "fft":
        n = params["size"]
        samples = generate_test_data(seed, (n, 2))
        return dict(re=samples[:, 0].copy(), im=samples[:, 1].copy())
    raise ValueError(f"Unknown kernel: {kind}")
