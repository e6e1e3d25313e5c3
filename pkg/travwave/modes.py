"""
闭式模态函数 φ_k(y;λ)

φ_k 是 -φ'' + k²(1 - λV₀ - W)φ = 0 在 (0,∞) 上衰减且 φ_k(0) = 1 的解。
P1 为单一指数；P2 按 β<1、β=1、β>1 分为双曲、线性、三角内段，外段均为指数。
双曲函数通过带缩放的指数计算，k√(1-β)b 很大时也不会溢出。
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .core import BETA_UNIT_TOL, Case, PotentialSpec, RegimeError, check_lambda, require_valid

logger = logging.getLogger(__name__)

P1 = "P1"
P2_SUB = "P2-sub"      # β < 1
P2_UNIT = "P2-unit"    # β = 1
P2_SUPER = "P2-super"  # β > 1


def classify(case: Case, beta: Optional[float]) -> str:
    if Case(case) is Case.P1:
        return P1
    if abs(beta - 1.0) <= BETA_UNIT_TOL:
        return P2_UNIT
    return P2_SUB if beta < 1.0 else P2_SUPER


def regime(spec: PotentialSpec) -> str:
    return classify(spec.case, spec.beta)


def resonant_width(beta: float) -> float:
    """β > 1 时的宽度 b = π/√(β-1)"""
    if not beta > 1.0:
        raise RegimeError(f"resonant width needs beta > 1, got {beta}")
    return math.pi / math.sqrt(beta - 1.0)


@lru_cache(maxsize=None)
def _warn_off_resonance(beta: float, b: float) -> None:
    logger.warning(
        f"β={beta} > 1 且 b={b} ≠ π/√(β-1)={resonant_width(beta):.12g}，"
        f"唯一性未获保证，追踪分支前请先运行 kernel_scan"
    )


def _check_regime(kind: str, requested: Optional[str]) -> None:
    if requested is not None and requested != kind:
        raise RegimeError(f"{requested} formulas requested for a {kind} potential")


class _Pieces:
    """按 λ 向量化的分段系数"""

    def __init__(self, kind: str, k: int, lam, beta: Optional[float], b: Optional[float]):
        self.kind = kind
        self.k = k
        self.b = b
        self.r = np.sqrt(1.0 - np.asarray(lam, dtype=float))
        self.kappa_out = k * self.r
        if kind == P1:
            self.kappa_in = None
            self.phi_b = np.ones_like(self.r)
            return
        if kind == P2_SUB:
            s = math.sqrt(1.0 - beta)
            self.s = s
            self.kappa_in = k * s
            x = self.kappa_in * b
            self.x = x
            e2 = math.exp(-2.0 * x)
            t = (1.0 - e2) / (1.0 + e2)
            self.e2 = e2
            self.c1 = -(s * t + self.r) / (s + self.r * t)
            # 1 + c1 = p_scaled · e^{-2x}
            self.p_scaled = (s - self.r) / (s + self.r * t) * 2.0 / (1.0 + e2)
            self.q = 1.0 - self.c1
            self.phi_b = 0.5 * math.exp(-x) * (self.p_scaled + self.q)
        elif kind == P2_SUPER:
            s = math.sqrt(beta - 1.0)
            self.s = s
            self.kappa_in = k * s
            x = self.kappa_in * b
            self.x = x
            denom = s * math.cos(x) + self.r * math.sin(x)
            if np.any(np.abs(denom) <= 1e-14 * (s + self.r)):
                raise RegimeError("decaying solution vanishes at y=0; mode normalization impossible")
            self.c1 = (s * math.sin(x) - self.r * math.cos(x)) / denom
            self.phi_b = s / denom
        else:
            self.kappa_in = 0.0
            self.c1 = -self.r * k / (k * b * self.r + 1.0)
            self.phi_b = 1.0 / (k * b * self.r + 1.0)

    def phi_prime0(self):
        if self.kind == P1:
            return -self.kappa_out
        if self.kind == P2_UNIT:
            return self.c1
        return self.kappa_in * self.c1

    def inner_sq_integral(self):
        """∫_0^b φ² dy"""
        b = self.b
        if self.kind == P2_SUB:
            kap, x, e2 = self.kappa_in, self.x, self.e2
            P, q = self.p_scaled, self.q
            e4 = math.exp(-4.0 * x)
            return 0.25 * (P ** 2 * (e2 - e4) / (2.0 * kap)
                           + 2.0 * P * q * b * e2
                           + q ** 2 * (1.0 - e2) / (2.0 * kap))
        if self.kind == P2_SUPER:
            kap, x, c = self.kappa_in, self.x, self.c1
            sin2, cos2 = math.sin(2.0 * x), math.cos(2.0 * x)
            return (0.5 * b + sin2 / (4.0 * kap)
                    + c * (1.0 - cos2) / (2.0 * kap)
                    + c ** 2 * (0.5 * b - sin2 / (4.0 * kap)))
        c = self.c1
        return b + c * b ** 2 + c ** 2 * b ** 3 / 3.0

    def outer_sq_integral(self):
        """∫_b^∞ φ² dy"""
        return self.phi_b ** 2 / (2.0 * self.kappa_out)


def _pieces(spec: PotentialSpec, k: int, lam, regime_name: Optional[str] = None) -> _Pieces:
    require_valid(spec, bifurcation=False)
    check_lambda(lam)
    if k < 1:
        raise RegimeError(f"wavenumber k must be at least 1, got {k}")
    kind = regime(spec)
    _check_regime(kind, regime_name)
    if kind == P2_SUPER and abs(spec.b - resonant_width(spec.beta)) > 1e-12 * spec.b:
        _warn_off_resonance(spec.beta, spec.b)
    return _Pieces(kind, int(k), lam, spec.beta, spec.b)


def _scalar(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class ModeFunction:
    """φ_k(·;λ) 的分段表示，c0 = 1"""
    case: str
    k: int
    lam: float
    kappa_out: float
    kappa_in: Optional[float] = None
    b: Optional[float] = None
    c1: Optional[float] = None
    phi_b: float = 1.0
    p_scaled: Optional[float] = None
    q: Optional[float] = None

    @property
    def c2(self) -> float:
        """外段系数 φ = c2·e^{-κ_out y}，大参数时可能为 inf"""
        if self.b is None:
            return 1.0
        with np.errstate(over="ignore"):
            return float(self.phi_b * np.exp(self.kappa_out * self.b))

    def _inner(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        kap = self.kappa_in
        if self.case == P2_SUB:
            x = kap * self.b
            grow = self.p_scaled * np.exp(kap * y - 2.0 * x)
            decay = self.q * np.exp(-kap * y)
            return 0.5 * (grow + decay), 0.5 * kap * (grow - decay)
        if self.case == P2_SUPER:
            c, s = np.cos(kap * y), np.sin(kap * y)
            return c + self.c1 * s, kap * (-s + self.c1 * c)
        return 1.0 + self.c1 * y, np.full_like(y, self.c1)

    def evaluate(self, y) -> Tuple[np.ndarray, np.ndarray]:
        """返回 (φ(|y|), sign(y)·φ'(|y|))，y = 0 处取右侧导数"""
        y = np.asarray(y, dtype=float)
        ay = np.abs(y)
        if self.case == P1:
            phi = np.exp(-self.kappa_out * ay)
            dphi = -self.kappa_out * phi
        else:
            inside = ay <= self.b
            phi = np.empty_like(ay)
            dphi = np.empty_like(ay)
            in_phi, in_dphi = self._inner(ay[inside])
            phi[inside], dphi[inside] = in_phi, in_dphi
            out_phi = self.phi_b * np.exp(-self.kappa_out * (ay[~inside] - self.b))
            phi[~inside] = out_phi
            dphi[~inside] = -self.kappa_out * out_phi
        sign = np.where(y < 0, -1.0, 1.0)
        return phi, sign * dphi

    def __call__(self, y):
        return _scalar(self.evaluate(y)[0])

    def derivative(self, y):
        return _scalar(self.evaluate(y)[1])


def build_mode(spec: PotentialSpec, k: int, lam: float, regime_name: Optional[str] = None) -> ModeFunction:
    """构造 φ_k(·;λ)

    regime_name 可显式要求某一段公式（如 "P2-sub"），与 β 不符时报错。
    """
    pieces = _pieces(spec, k, float(lam), regime_name)
    kind = pieces.kind
    common = dict(case=kind, k=int(k), lam=float(lam), kappa_out=float(pieces.kappa_out))
    if kind == P1:
        return ModeFunction(**common)
    extra = dict(kappa_in=float(pieces.kappa_in), b=float(spec.b),
                 c1=float(pieces.c1), phi_b=float(pieces.phi_b))
    if kind == P2_SUB:
        extra.update(p_scaled=float(pieces.p_scaled), q=float(pieces.q))
    return ModeFunction(**common, **extra)


def phi_prime0(spec: PotentialSpec, k: int, lam):
    """φ'_k(0₊;λ)，λ 可为数组"""
    return _scalar(_pieces(spec, k, lam).phi_prime0())


def phi_l2_squared(spec: PotentialSpec, k: int, lam):
    """‖φ_k‖²_{L²(0,∞)}"""
    pieces = _pieces(spec, k, lam)
    if pieces.kind == P1:
        return _scalar(1.0 / (2.0 * pieces.kappa_out))
    return _scalar(pieces.inner_sq_integral() + pieces.outer_sq_integral())


def phi_l2(spec: PotentialSpec, k: int, lam):
    """‖φ_k‖_{L²(0,∞)}，分段原函数闭式，无数值积分"""
    return _scalar(np.sqrt(phi_l2_squared(spec, k, lam)))


def v0_mass(spec: PotentialSpec, k: int, lam):
    """∫_0^∞ V₀ φ_k² dy"""
    pieces = _pieces(spec, k, lam)
    if pieces.kind == P1:
        return _scalar(1.0 / (2.0 * pieces.kappa_out))
    return _scalar(pieces.outer_sq_integral())


def psi_prime0(spec: PotentialSpec, k: int, lam):
    """ψ'_k(0;λ) = k² ∫_0^∞ V₀ φ_k² dy = dφ'_k(0₊;λ)/dλ"""
    return _scalar(k ** 2 * np.asarray(v0_mass(spec, k, lam)))


def mode_samples(spec: PotentialSpec, k: int, lam: float, y) -> Tuple[np.ndarray, np.ndarray]:
    """偶延拓的 (φ, φ') 采样"""
    return build_mode(spec, k, lam).evaluate(y)


def normalized_kernel(spec: PotentialSpec, k: int, lam: float, y) -> np.ndarray:
    """φ* = φ_k(|y|)/‖φ_k‖_{L²(ℝ)}"""
    norm = math.sqrt(2.0 * phi_l2_squared(spec, k, lam))
    return build_mode(spec, k, lam).evaluate(y)[0] / norm
