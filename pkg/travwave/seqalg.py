"""
奇正弦级数的序列代数

只存储 k ≥ 1 的系数，a_{-k} = -a_k 与 a_0 = 0 由结构保证。
卷积按直接求和计算，标量路径用扩展精度累加。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import SpectrumMismatchError, TruncationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class OddSpectrum:
    """截断的奇实序列 (a_k), k = 1..K"""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def K(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, K: int) -> "OddSpectrum":
        return cls(np.zeros(K))

    def __getitem__(self, k: int) -> float:
        """按波数取值，k 从 1 开始"""
        if k == 0 or abs(k) > self.K:
            return 0.0
        return float(np.sign(k) * self.coeffs[abs(k) - 1])

    def __neg__(self) -> "OddSpectrum":
        return OddSpectrum(-self.coeffs)

    def scaled(self, factor: float) -> "OddSpectrum":
        return OddSpectrum(factor * self.coeffs)

    def resized(self, K: int) -> "OddSpectrum":
        """截断或补零到长度 K"""
        out = np.zeros(K)
        n = min(K, self.K)
        out[:n] = self.coeffs[:n]
        return OddSpectrum(out)

    def full(self) -> np.ndarray:
        """整格表示，下标 k + K 对应 a_k"""
        return odd_extension(self.coeffs)


def basis_e(m: int, K: int, norm: str = "unit") -> OddSpectrum:
    """单位序列 e^m：norm="unit" 时 e_m = 1，norm="sqrt2" 时 e_m = 1/√2"""
    if not 1 <= m <= K:
        raise TruncationError(f"mode {m} outside 1..{K}")
    scale = {"unit": 1.0, "sqrt2": 1.0 / np.sqrt(2.0)}.get(norm)
    if scale is None:
        raise ValueError(f"unknown normalization '{norm}'")
    coeffs = np.zeros(K)
    coeffs[m - 1] = scale
    return OddSpectrum(coeffs)


def odd_extension(coeffs: np.ndarray) -> np.ndarray:
    """(..., K) -> (..., 2K+1)，中心为 a_0 = 0"""
    coeffs = np.asarray(coeffs)
    zero = np.zeros(coeffs.shape[:-1] + (1,), dtype=coeffs.dtype)
    return np.concatenate([-coeffs[..., ::-1], zero, coeffs], axis=-1)


def _convolve_last(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """沿最后一维的直接求和卷积，前导维逐点广播"""
    n, m = x.shape[-1], y.shape[-1]
    lead = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    out = np.zeros(lead + (n + m - 1,), dtype=np.result_type(x, y))
    for j in range(m):
        out[..., j:j + n] += x * y[..., j:j + 1]
    return out


def _check_out_len(K: int, out_len: Optional[int]) -> int:
    if out_len is None:
        return 3 * K
    if out_len > 3 * K:
        raise TruncationError(f"truncation exceeds support: out_len={out_len} > 3K={3 * K}")
    if out_len < 1:
        raise TruncationError(f"out_len must be positive, got {out_len}")
    return out_len


def conv3_coeffs(coeffs: np.ndarray, out_len: Optional[int] = None,
                 extended: bool = False) -> np.ndarray:
    """(a∗a∗a)_k, k = 1..out_len，支持 (..., K) 批量输入"""
    coeffs = np.asarray(coeffs, dtype=float)
    K = coeffs.shape[-1]
    out_len = _check_out_len(K, out_len)
    if extended:
        coeffs = coeffs.astype(np.longdouble)
    full = odd_extension(coeffs)
    cube = _convolve_last(_convolve_last(full, full), full)
    return cube[..., 3 * K + 1:3 * K + 1 + out_len].astype(float)


def conv3(a: OddSpectrum, out_len: Optional[int] = None) -> OddSpectrum:
    """三重卷积 a∗a∗a 在全支撑 -K..K 上精确求和后截断"""
    return OddSpectrum(conv3_coeffs(a.coeffs, out_len, extended=True))


def conv3_dir(a: OddSpectrum, h: OddSpectrum, out_len: Optional[int] = None) -> OddSpectrum:
    """三次项沿 h 的方向导数 3(a∗a∗h)"""
    if a.K != h.K:
        raise SpectrumMismatchError(f"K mismatch: {a.K} != {h.K}")
    out_len = _check_out_len(a.K, out_len)
    fa = odd_extension(a.coeffs.astype(np.longdouble))
    fh = odd_extension(h.coeffs.astype(np.longdouble))
    full = _convolve_last(_convolve_last(fa, fa), fh)
    K = a.K
    return OddSpectrum(3.0 * full[3 * K + 1:3 * K + 1 + out_len].astype(float))


def cubic_matrix(coeffs: np.ndarray, out_len: Optional[int] = None) -> np.ndarray:
    """线性化三次算子 M_kj = 3[(a∗a)_{k-j} - (a∗a)_{k+j}]

    (..., K) 输入得到 (..., out_len, K)，满足 conv3_dir(a, h) = M @ h。
    """
    coeffs = np.asarray(coeffs, dtype=float)
    K = coeffs.shape[-1]
    out_len = _check_out_len(K, out_len)
    full = odd_extension(coeffs)
    square = _convolve_last(full, full)
    padded = np.zeros(coeffs.shape[:-1] + (8 * K + 1,))
    padded[..., 2 * K:6 * K + 1] = square
    k = np.arange(1, out_len + 1)[:, None]
    j = np.arange(1, K + 1)[None, :]
    return 3.0 * (padded[..., 4 * K + k - j] - padded[..., 4 * K + k + j])


def conv2_full(a: OddSpectrum, b: OddSpectrum) -> np.ndarray:
    """两个奇序列的整格卷积 a∗b，下标中心为 a.K + b.K"""
    return _convolve_last(a.full(), b.full())


def full_hs_norm(seq: np.ndarray, s: float) -> float:
    """中心对齐的整格序列的 h^s 范数"""
    seq = np.asarray(seq, dtype=float)
    k = np.arange(seq.size) - seq.size // 2
    return float(np.sqrt(np.sum((1.0 + np.abs(k)) ** (2 * s) * seq ** 2)))


def full_l1_norm(seq: np.ndarray) -> float:
    return float(np.sum(np.abs(seq)))


def hs_norm(a: OddSpectrum, s: float) -> float:
    """‖a‖_{h^s}，整格求和即半格加倍"""
    k = np.arange(1, a.K + 1)
    return float(np.sqrt(np.sum(2.0 * (1.0 + k) ** (2 * s) * a.coeffs ** 2)))


def l1_norm(a: OddSpectrum) -> float:
    return float(2.0 * np.sum(np.abs(a.coeffs)))


def sine_series(coeffs: np.ndarray, x: ArrayLike) -> ArrayLike:
    """Σ_k c_k sin(kx)，x 可为数组"""
    coeffs = np.asarray(coeffs, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    k = np.arange(1, coeffs.size + 1)
    values = np.sin(np.multiply.outer(x_arr, k)) @ coeffs
    return float(values) if x_arr.ndim == 0 else values


def sine_eval(a: OddSpectrum, x: ArrayLike) -> ArrayLike:
    return sine_series(a.coeffs, x)


def sine_eval_dxx(a: OddSpectrum, x: ArrayLike) -> ArrayLike:
    """∂x² Σ a_k sin(kx)"""
    k = np.arange(1, a.K + 1)
    return sine_series(-(k ** 2) * a.coeffs, x)
