"""
色散系数 A^k_λ = 2φ'_k(0₊;λ) + k²α、分岔点构造与唯一性扫描
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import (BETA_UNIT_TOL, BifurcationPoint, Case, PotentialSpec, RegimeError,
                   SolverConfig, check_lambda, require_valid)
from .modes import (P1, P2_SUB, P2_SUPER, P2_UNIT, classify, phi_l2, phi_prime0,
                    psi_prime0, regime, resonant_width)
from .utils import run_parallel

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-12


def a_coeff(spec: PotentialSpec, k: int, lam):
    """A^k_λ，λ 可为数组"""
    value = 2.0 * np.asarray(phi_prime0(spec, k, lam)) + k ** 2 * spec.alpha
    return float(value) if value.ndim == 0 else value


def alpha_star(case, k_star: int, lambda_star: float,
               beta: Optional[float] = None, b: Optional[float] = None) -> float:
    """使 A^{k*}_{λ*} = 0 的 δ 势强度 α"""
    check_lambda(lambda_star)
    if k_star < 1:
        raise RegimeError(f"k_star must be at least 1, got {k_star}")
    r = math.sqrt(1.0 - lambda_star)
    kind = classify(case, beta)
    if kind in (P1, P2_SUPER):
        # β > 1 时宽度固定为 π/√(β-1)
        return 2.0 * r / k_star
    if kind == P2_UNIT:
        if b is None or b <= 0:
            raise RegimeError("b must be positive for P2")
        return 2.0 * r / (k_star * (1.0 + r * k_star * b))
    if b is None or b <= 0:
        raise RegimeError("b must be positive for P2")
    s = math.sqrt(1.0 - beta)
    t = math.tanh(k_star * s * b)
    return 2.0 * s / k_star * (s * t + r) / (s + r * t)


def bifurcation_point(spec: PotentialSpec, k_star: int, lambda_star: float) -> Tuple[BifurcationPoint, PotentialSpec]:
    """由 (k*, λ*) 确定 α，返回分岔点与补全的势"""
    alpha = alpha_star(spec.case, k_star, lambda_star, spec.beta, spec.b)
    resolved = spec.with_alpha(alpha)
    if regime(spec) == P2_SUPER:
        b = resonant_width(spec.beta)
        if spec.b is not None and abs(spec.b - b) > 1e-12 * b:
            logger.warning(f"β>1: b 由 {spec.b} 调整为 π/√(β-1) = {b:.12g}")
        resolved = replace(resolved, b=b)
    return BifurcationPoint(k_star=int(k_star), lambda_star=float(lambda_star), alpha=alpha), resolved


def essential_edge(spec: PotentialSpec, k: int, lam: float) -> float:
    """本质谱下端 k²(1-λ)"""
    check_lambda(lam)
    return k ** 2 * (1.0 - lam)


@dataclass
class DispersionScan:
    """A^k_λ 在 (k, λ) 网格上的取值与零点"""
    k_values: np.ndarray
    lambda_grid: np.ndarray
    residuals: np.ndarray
    zeros: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return len(self.zeros) == 1


def _roots_for_k(spec: PotentialSpec, k: int, grid: np.ndarray) -> Tuple[np.ndarray, List[Tuple[int, float]]]:
    values = np.asarray(a_coeff(spec, k, grid), dtype=float)
    zeros = []

    def f(lam):
        return a_coeff(spec, k, lam)

    for j in range(grid.size - 1):
        lo, hi = values[j], values[j + 1]
        if lo == 0.0:
            zeros.append((k, float(grid[j])))
        elif lo * hi < 0.0:
            root = brentq(f, grid[j], grid[j + 1], xtol=1e-15,
                          rtol=4 * np.finfo(float).eps, maxiter=200)
            if abs(f(root)) > ROOT_TOL:
                logger.warning(f"k={k} 根 λ={root:.15g} 抛光后 |A|={abs(f(root)):.3e}")
            zeros.append((k, float(root)))
    if values[-1] == 0.0:
        zeros.append((k, float(grid[-1])))
    return values, zeros


def kernel_scan(spec: PotentialSpec,
                k_max: int,
                lambda_interval: Tuple[float, float],
                n_lambda: int = 2048,
                k_min: int = 1,
                max_workers: int = 4) -> DispersionScan:
    """在 k ≤ k_max、λ ∈ lambda_interval 上寻找 A^k_λ 的全部零点"""
    require_valid(spec, bifurcation=False)
    lam_lo, lam_hi = lambda_interval
    check_lambda(lam_hi)
    grid = np.linspace(lam_lo, lam_hi, n_lambda)
    k_values = np.arange(k_min, k_max + 1)
    results = run_parallel(lambda k: _roots_for_k(spec, int(k), grid), list(k_values), max_workers)
    residuals = np.vstack([values for values, _ in results]) if results else np.zeros((0, n_lambda))
    zeros = sorted(z for _, found in results for z in found)
    logger.info(f"色散扫描完成: k∈[{k_min},{k_max}], {n_lambda} 个 λ 采样, 零点 {len(zeros)} 个")
    return DispersionScan(k_values=k_values, lambda_grid=grid, residuals=residuals, zeros=zeros)


def uniqueness_window(spec: PotentialSpec, bp: BifurcationPoint,
                      k_max: int = 40, max_half_width: float = 0.5,
                      n_lambda: int = 2048) -> Tuple[float, float]:
    """λ* 周围只含一个零点的最大对称窗口（经验值，不声称最大）"""
    lam_star = bp.lambda_star
    hi = min(lam_star + max_half_width, 1.0 - 1e-9)
    scan = kernel_scan(spec, k_max, (lam_star - max_half_width, hi), n_lambda)
    half = max_half_width
    for k, lam in scan.zeros:
        if k == bp.k_star and abs(lam - lam_star) <= 1e-8:
            continue
        half = min(half, abs(lam - lam_star))
    return lam_star - half, min(lam_star + half, 1.0)


def shifted_eigencondition(spec: PotentialSpec, k: int, lam: float, mu: float) -> float:
    """移位本征条件的残差，根 μ 对应 L^k_λ 的本征值 k²μ"""
    lam_t = lam + mu
    if not lam_t < 1.0:
        raise RegimeError(f"lambda + mu = {lam_t} outside parameter regime")
    r = math.sqrt(1.0 - lam_t)
    if spec.case is Case.P1:
        return k * spec.alpha / (2.0 * r) - 1.0
    beta_t = spec.beta + mu
    if not beta_t < 1.0 or abs(beta_t - 1.0) <= BETA_UNIT_TOL:
        raise RegimeError(f"beta + mu = {beta_t} outside parameter regime")
    s = math.sqrt(1.0 - beta_t)
    t = math.tanh(k * s * spec.b)
    return k * spec.alpha / (2.0 * s) - (s * t + r) / (s + r * t)


def eigencondition_roots(spec: PotentialSpec, k: int, lam: float,
                         mu_window: Optional[Tuple[float, float]] = None,
                         n_mu: int = 4096) -> List[float]:
    """扫描移位条件，返回 L^k_λ 在本质谱下方的本征值 k²μ（升序）"""
    edge = 1.0 - lam
    if spec.case is Case.P2:
        edge = min(edge, 1.0 - spec.beta)
    if mu_window is None:
        mu_window = (edge - (k * spec.alpha) ** 2 - 1.0, edge - 1e-9 * max(1.0, abs(edge)))
    grid = np.linspace(mu_window[0], mu_window[1], n_mu)

    def f(mu):
        return shifted_eigencondition(spec, k, lam, mu)

    values = np.array([f(mu) for mu in grid])
    roots = []
    for j in range(n_mu - 1):
        if values[j] == 0.0:
            roots.append(grid[j])
        elif values[j] * values[j + 1] < 0.0:
            roots.append(brentq(f, grid[j], grid[j + 1], xtol=1e-15, maxiter=200))
    return sorted(k ** 2 * mu for mu in roots)


@dataclass
class HypothesisReport:
    """可在运行时检查的分岔假设"""
    a_residual: float
    a_tolerance: float
    coefficient_floor: Optional[float]
    unique_kernel: bool
    kernel_zeros: List[Tuple[int, float]]
    max_mode_norm: float
    max_slope_ratio: float
    slope_bound: Optional[float]
    asymptotic_constant: float
    transversality: float

    @property
    def passed(self) -> bool:
        checks = [
            self.a_residual <= self.a_tolerance,
            self.unique_kernel,
            math.isfinite(self.max_mode_norm),
            self.transversality > 0.0,
        ]
        if self.coefficient_floor is not None:
            checks.append(self.coefficient_floor > 0.0)
        if self.slope_bound is not None:
            checks.append(self.max_slope_ratio <= self.slope_bound * (1.0 + 1e-12))
        return all(checks)

    def to_dict(self) -> dict:
        return {
            "a_residual": self.a_residual,
            "a_tolerance": self.a_tolerance,
            "coefficient_floor": self.coefficient_floor,
            "unique_kernel": self.unique_kernel,
            "kernel_zeros": [[k, lam] for k, lam in self.kernel_zeros],
            "max_mode_norm": self.max_mode_norm,
            "max_slope_ratio": self.max_slope_ratio,
            "slope_bound": self.slope_bound,
            "asymptotic_constant": self.asymptotic_constant,
            "transversality": self.transversality,
            "passed": self.passed,
        }


def check_hypotheses(spec: PotentialSpec, bp: BifurcationPoint,
                     cfg: Optional[SolverConfig] = None,
                     k_max: int = 64, n_lambda: int = 2048) -> HypothesisReport:
    """系数下界、单核、模态范数一致有界、导数线性增长、渐近常数与横截条件"""
    require_valid(spec, cfg, k_star=bp.k_star, lambda_star=bp.lambda_star)
    lam = bp.lambda_star
    kind = regime(spec)
    ks = np.arange(1, k_max + 1)

    floor = None
    bound = None
    if kind == P1:
        floor, bound = 1.0 - lam, math.sqrt(1.0 - lam)
    elif kind == P2_SUB:
        floor = min(1.0 - lam, 1.0 - spec.beta)
        bound = math.sqrt(max(1.0 - lam, 1.0 - spec.beta))

    half = min(0.05, 0.5 * (1.0 - lam))
    scan = kernel_scan(spec, k_max, (lam - half, lam + half), n_lambda)
    unique = scan.certified and scan.zeros[0][0] == bp.k_star

    norms = np.array([phi_l2(spec, int(k), lam) for k in ks])
    slopes = np.array([abs(phi_prime0(spec, int(k), lam)) / k for k in ks])
    asym = np.array([abs(a_coeff(spec, int(k), lam) - spec.alpha * k ** 2) / k ** 1.5 for k in ks])

    report = HypothesisReport(
        a_residual=abs(a_coeff(spec, bp.k_star, lam)),
        a_tolerance=ROOT_TOL * max(1.0, bp.k_star ** 2 * spec.alpha),
        coefficient_floor=floor,
        unique_kernel=unique,
        kernel_zeros=scan.zeros,
        max_mode_norm=float(norms.max()),
        max_slope_ratio=float(slopes.max()),
        slope_bound=bound,
        asymptotic_constant=float(asym.max()),
        transversality=float(psi_prime0(spec, bp.k_star, lam)),
    )
    logger.info(f"假设检查: passed={report.passed}, 唯一核={unique}")
    return report
