"""
L^k_λ = -d²/dy² + k²(1 - λV₀ - V₁) 的有限差分离散

均匀网格 y_j = -y_max + jh，两端 Dirichlet 截断，未知量为 2n_y - 1 个内点。
δ 势作为 y = 0 节点上的对角项 -k²α/h。界面 ±b 必须落在节点上，
分段系数取节点左右单侧值的平均。
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, eigh_tridiagonal, solve_banded

from .core import (Case, EigenConvergenceError, GridError, PotentialSpec,
                   SingularOperatorError, SolverConfig, check_lambda,
                   require_valid, sample_average)

logger = logging.getLogger(__name__)

# 界面是否在网格上的相对容差
GRID_TOL = 1e-9
# projected_solve 的后向误差容差
SOLVE_TOL = 1e-12
REFINEMENT_STEPS = 2


def grid_nodes(cfg: SolverConfig) -> np.ndarray:
    """全部节点（含两端），整数倍 h 保证关于 0 精确对称"""
    return cfg.h * np.arange(-cfg.n_y, cfg.n_y + 1)


def interior_nodes(cfg: SolverConfig) -> np.ndarray:
    return grid_nodes(cfg)[1:-1]


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """对称三对角矩阵 T，次对角线恒为 -1/h²"""
    k: int
    lam: float
    h: float
    y: np.ndarray
    diagonal: np.ndarray
    off_diagonal: float
    delta_node: int
    v0: np.ndarray

    @property
    def size(self) -> int:
        return self.diagonal.size

    def off_diagonal_array(self) -> np.ndarray:
        return np.full(self.size - 1, self.off_diagonal)

    def banded(self) -> np.ndarray:
        """solve_banded 的 (1, 1) 带状存储"""
        ab = np.zeros((3, self.size))
        ab[0, 1:] = self.off_diagonal
        ab[1] = self.diagonal
        ab[2, :-1] = self.off_diagonal
        return ab


def _check_interface(spec: PotentialSpec, cfg: SolverConfig) -> None:
    if spec.case is not Case.P2:
        return
    ratio = spec.b / cfg.h
    if abs(ratio - round(ratio)) > GRID_TOL * max(1.0, ratio):
        raise GridError(f"interface off-grid: b/h = {ratio:.12g} is not an integer")


def build_operator(spec: PotentialSpec, k: int, lam: float, cfg: SolverConfig) -> DiscreteOperator:
    """组装 L^k_λ 的离散矩阵"""
    require_valid(spec, cfg, bifurcation=False)
    check_lambda(lam)
    _check_interface(spec, cfg)

    h = cfg.h
    y = interior_nodes(cfg)
    v0 = sample_average(spec.v0, y, h)
    w = sample_average(spec.w, y, h)
    diagonal = 2.0 / h ** 2 + k ** 2 * (1.0 - lam * v0 - w)
    delta_node = cfg.n_y - 1
    diagonal[delta_node] -= k ** 2 * spec.alpha / h
    return DiscreteOperator(k=int(k), lam=float(lam), h=h, y=y, diagonal=diagonal,
                            off_diagonal=-1.0 / h ** 2, delta_node=delta_node, v0=v0)


def apply_operator(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    """T u，u 可为 (..., N)"""
    u = np.asarray(u, dtype=float)
    out = op.diagonal * u
    out[..., 1:] += op.off_diagonal * u[..., :-1]
    out[..., :-1] += op.off_diagonal * u[..., 1:]
    return out


def to_sparse(op: DiscreteOperator) -> sp.csr_matrix:
    off = op.off_diagonal_array()
    return sp.diags([off, op.diagonal, off], [-1, 0, 1], format="csr")


def sturm_count(op: DiscreteOperator, x: float) -> int:
    """T - x 的 LDLᵀ 分解中负主元个数，即小于 x 的特征值个数"""
    e2 = op.off_diagonal ** 2
    tiny = np.finfo(float).tiny
    count = 0
    pivot = 1.0
    for j, a in enumerate(op.diagonal):
        pivot = (a - x) - (e2 / pivot if j else 0.0)
        if pivot == 0.0:
            pivot = -tiny
        if pivot < 0.0:
            count += 1
    return count


def _normalize(op: DiscreteOperator, vec: np.ndarray) -> np.ndarray:
    vec = vec / math.sqrt(op.h * float(vec @ vec))
    pivot = vec[op.delta_node]
    if abs(pivot) <= 1e-300:
        pivot = vec[np.argmax(np.abs(vec))]
    return vec if pivot > 0 else -vec


def smallest_eigs(op: DiscreteOperator, m: int = 1) -> List[Tuple[float, np.ndarray]]:
    """绝对值最小的 m 个特征对

    先用 Sturm 计数定位 0 附近的特征值下标，再以二分法加逆迭代
    (stebz + stein) 求该下标窗口内的特征对。特征向量满足 h·Σu² = 1，
    且在 δ 节点处为正。
    """
    n = op.size
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in 1..{n}, got {m}")
    below = sturm_count(op, 0.0)
    lo, hi = max(0, below - m), min(n - 1, below + m - 1)
    try:
        values, vectors = eigh_tridiagonal(op.diagonal, op.off_diagonal_array(),
                                           select="i", select_range=(lo, hi),
                                           lapack_driver="stebz")
    except LinAlgError as e:
        raise EigenConvergenceError(
            f"tridiagonal eigen-solve failed for k={op.k}, λ={op.lam}: {e} "
            f"(size {n}, index window {lo}..{hi}, {below} eigenvalues below 0)"
        ) from e

    order = np.argsort(np.abs(values), kind="stable")[:m]
    return [(float(values[i]), _normalize(op, vectors[:, i])) for i in order]


def _check_solution(u: np.ndarray, residual: np.ndarray, scale: float, k: int) -> None:
    if not np.all(np.isfinite(u)):
        raise SingularOperatorError(f"operator singular: run kernel_scan (k={k}, non-finite solution)")
    if np.max(np.abs(residual)) > SOLVE_TOL * scale:
        raise SingularOperatorError(
            f"operator singular: run kernel_scan (k={k}, residual {np.max(np.abs(residual)):.3e})"
        )


def projected_solve(op: DiscreteOperator, k_star_flag: bool,
                    phi_star: Optional[np.ndarray], rhs: np.ndarray) -> np.ndarray:
    """求解 (T + flag·P)u = rhs，P = h⟨·, φ*⟩φ*

    三对角分解加 Sherman-Morrison 秩一修正，再做两步迭代精化。
    残差按后向误差判定：‖r‖∞ ≤ 1e-12·(‖T‖∞‖u‖∞ + ‖rhs‖∞)。
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (op.size,):
        raise ValueError(f"rhs must have shape ({op.size},), got {rhs.shape}")
    h = op.h
    ab = op.banded()
    if k_star_flag:
        if phi_star is None:
            raise ValueError("phi_star is required when k_star_flag is set")
        phi = np.asarray(phi_star, dtype=float)
    else:
        phi = None

    def apply(u):
        out = apply_operator(op, u)
        if phi is not None:
            out += h * float(phi @ u) * phi
        return out

    def solve(r):
        if phi is None:
            return solve_banded((1, 1), ab, r)
        both = solve_banded((1, 1), ab, np.column_stack([r, phi]))
        y, z = both[:, 0], both[:, 1]
        return y - z * (h * float(phi @ y)) / (1.0 + h * float(phi @ z))

    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            u = solve(rhs)
            for _ in range(REFINEMENT_STEPS):
                u = u + solve(rhs - apply(u))
    except (LinAlgError, FloatingPointError, ZeroDivisionError) as e:
        raise SingularOperatorError(f"operator singular: run kernel_scan (k={op.k}): {e}") from e

    norm_t = 4.0 / h ** 2 + float(np.max(np.abs(op.diagonal)))
    scale = norm_t * float(np.max(np.abs(u), initial=0.0)) + float(np.max(np.abs(rhs), initial=0.0))
    _check_solution(u, rhs - apply(u), scale, op.k)
    return u
