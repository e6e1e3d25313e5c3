"""
核心数据类型、异常层次与输入校验

所有求解模块共享这里的不可变类型。校验函数 validate 只返回诊断列表，
各求解入口通过 require_valid 拒绝无效输入。
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# β 与 1 的比较容差
BETA_UNIT_TOL = 1e-12


class Case(str, Enum):
    """背景势类型"""
    P1 = "P1"
    P2 = "P2"


class GammaMode(str, Enum):
    """非线性系数 Γ 的形式"""
    REGULAR = "RegularGamma"
    DISTRIBUTIONAL = "DistributionalGamma"


class TravWaveError(Exception):
    """所有求解器异常的基类"""


class ValidationError(TravWaveError, ValueError):
    """输入不满足类型不变量"""

    def __init__(self, diagnostics: Sequence[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class ConfigError(TravWaveError):
    """配置文件无法读取或含有未知键"""


class RegimeError(TravWaveError, ValueError):
    """参数超出闭式公式适用范围"""


class TruncationError(TravWaveError, ValueError):
    """截断长度超出卷积支撑"""


class SpectrumMismatchError(TravWaveError, ValueError):
    """两个序列的截断长度不一致"""


class GridError(TravWaveError, ValueError):
    """网格与界面或计算域不相容"""


class SingularOperatorError(TravWaveError):
    """离散算子奇异"""


class EigenConvergenceError(TravWaveError):
    """三对角特征值计算失败"""


class FoldError(TravWaveError):
    """扩展 Newton 系统奇异"""


class CertificationError(TravWaveError):
    """分岔点在扫描窗口内不唯一"""


class InsufficientDataError(TravWaveError, ValueError):
    """拟合所需的分支点不足"""


class NewtonDivergence(TravWaveError):
    """Newton 迭代未收敛，保留最后迭代值与残差历史"""

    def __init__(self, message: str, last_iterate: np.ndarray, history: Sequence[float]):
        self.last_iterate = np.array(last_iterate, copy=True)
        self.history = list(history)
        super().__init__(f"{message} (残差历史: {', '.join(f'{r:.3e}' for r in self.history)})")


GammaInterval = Tuple[float, float, float]


@dataclass(frozen=True)
class PotentialSpec:
    """系数数据 V(λ,y) = λV₀ + W + αδ₀ 与非线性系数 Γ"""
    case: Case
    alpha: float
    beta: Optional[float] = None
    b: Optional[float] = None
    gamma: float = 0.0
    gamma_profile: Tuple[GammaInterval, ...] = ()
    mode: GammaMode = GammaMode.DISTRIBUTIONAL

    def __post_init__(self):
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "mode", GammaMode(self.mode))
        object.__setattr__(
            self, "gamma_profile",
            tuple((float(lo), float(hi), float(v)) for lo, hi, v in self.gamma_profile),
        )

    @property
    def is_regular(self) -> bool:
        return self.mode is GammaMode.REGULAR

    def with_alpha(self, alpha: float) -> "PotentialSpec":
        return replace(self, alpha=float(alpha))

    def v0(self, y) -> np.ndarray:
        """背景 V₀(y)：P1 为 1，P2 为 𝟙_{|y|≥b}"""
        y = np.asarray(y, dtype=float)
        if self.case is Case.P1:
            return np.ones_like(y)
        return (np.abs(y) >= self.b).astype(float)

    def w(self, y) -> np.ndarray:
        """台阶 W(y)：P1 为 0，P2 为 β𝟙_{|y|<b}"""
        y = np.asarray(y, dtype=float)
        if self.case is Case.P1:
            return np.zeros_like(y)
        return self.beta * (np.abs(y) < self.b)

    def gamma_at(self, y) -> np.ndarray:
        """正则 Γ(y)，分段常数表"""
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for lo, hi, value in self.gamma_profile:
            out = out + value * ((y >= lo) & (y < hi))
        return out

    def breakpoints(self) -> List[float]:
        points = []
        if self.case is Case.P2 and self.b is not None:
            points.extend([-self.b, self.b])
        for lo, hi, _ in self.gamma_profile:
            points.extend([lo, hi])
        return sorted(set(points))

    def digest(self) -> str:
        """规范 JSON 的 sha256，用于结果溯源"""
        payload = asdict(self)
        payload["case"] = self.case.value
        payload["mode"] = self.mode.value
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SolverConfig:
    """数值参数"""
    K: int = 12
    s: float = 2.5
    y_max: float = 40.0
    n_y: int = 4000
    tol_newton: float = 1e-12
    max_newton_iters: int = 20
    eps_max: float = 0.1
    n_branch: int = 32
    linear_solver: str = "direct"
    max_workers: int = 4

    @property
    def h(self) -> float:
        return self.y_max / self.n_y


@dataclass(frozen=True)
class BifurcationPoint:
    k_star: int
    lambda_star: float
    alpha: float


def sample_average(func, y, h: float) -> np.ndarray:
    """在节点取左右单侧值的平均，界面落在节点上时不抹平"""
    y = np.asarray(y, dtype=float)
    return 0.5 * (func(y - 0.25 * h) + func(y + 0.25 * h))


def _profile_diagnostics(profile: Sequence[GammaInterval]) -> List[str]:
    diagnostics = []
    for lo, hi, value in profile:
        if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(value)):
            diagnostics.append(f"Γ interval ({lo}, {hi}) is not finite")
        elif not lo < hi:
            diagnostics.append(f"Γ interval ({lo}, {hi}) is empty")
    ordered = sorted(profile)
    for (lo1, hi1, _), (lo2, hi2, _) in zip(ordered, ordered[1:]):
        if lo2 < hi1:
            diagnostics.append("overlapping Γ intervals")
            break
    return diagnostics


def validate(spec: PotentialSpec,
             cfg: Optional[SolverConfig] = None,
             *,
             k_star: Optional[int] = None,
             lambda_star: Optional[float] = None,
             bifurcation: bool = True) -> List[str]:
    """返回所有违反的不变量，合法输入返回空列表"""
    diagnostics: List[str] = []

    if not math.isfinite(spec.alpha) or spec.alpha < 0:
        diagnostics.append("alpha must be nonnegative")
    elif bifurcation and spec.alpha <= 0:
        diagnostics.append("alpha must be positive")

    if spec.case is Case.P1:
        if spec.beta is not None or spec.b is not None:
            diagnostics.append("beta and b are unused for P1 and must be absent")
    else:
        if spec.beta is None or not math.isfinite(spec.beta):
            diagnostics.append("beta is required for P2")
        if spec.b is None or not math.isfinite(spec.b) or spec.b <= 0:
            diagnostics.append("b must be positive for P2")

    if spec.is_regular:
        if not spec.gamma_profile:
            diagnostics.append("gamma_profile is required for RegularGamma")
        diagnostics.extend(_profile_diagnostics(spec.gamma_profile))
    else:
        if spec.gamma_profile:
            diagnostics.append("gamma_profile must be absent for DistributionalGamma")
        if not math.isfinite(spec.gamma):
            diagnostics.append("gamma must be finite")

    if cfg is not None:
        if cfg.K < 1:
            diagnostics.append("K must be at least 1")
        if cfg.s < 2.5:
            diagnostics.append("s must be at least 5/2")
        if not cfg.y_max > 0:
            diagnostics.append("y_max must be positive")
        if cfg.n_y < 2:
            diagnostics.append("n_y must be at least 2")
        if not cfg.tol_newton > 0:
            diagnostics.append("tol_newton must be positive")
        if cfg.max_newton_iters < 1:
            diagnostics.append("max_newton_iters must be at least 1")
        if not cfg.eps_max > 0:
            diagnostics.append("eps_max must be positive")
        if cfg.n_branch < 1:
            diagnostics.append("n_branch must be at least 1")
        if cfg.linear_solver not in ("direct", "gmres"):
            diagnostics.append(f"unknown linear_solver '{cfg.linear_solver}'")
        if spec.case is Case.P2 and spec.b is not None and cfg.y_max <= spec.b:
            diagnostics.append("y_max must exceed b")
        if k_star is not None and cfg.K < 3 * k_star:
            diagnostics.append("K must be at least 3·k_star")

    if k_star is not None and k_star < 1:
        diagnostics.append("k_star must be at least 1")
    if lambda_star is not None:
        if not lambda_star < 1:
            diagnostics.append("lambda_star outside parameter regime")
        elif cfg is not None and k_star is not None and k_star >= 1:
            if cfg.y_max * k_star * math.sqrt(1.0 - lambda_star) < 20.0:
                diagnostics.append("y_max too small to resolve the decay")

    return diagnostics


def require_valid(spec: PotentialSpec, cfg: Optional[SolverConfig] = None, **kwargs) -> None:
    diagnostics = validate(spec, cfg, **kwargs)
    if diagnostics:
        logger.error(f"输入校验失败: {diagnostics}")
        raise ValidationError(diagnostics)


def check_lambda(lam) -> None:
    """λ < 1 是所有闭式公式的前提"""
    if np.any(~(np.asarray(lam, dtype=float) < 1.0)):
        raise RegimeError(f"lambda = {lam} outside parameter regime (lambda < 1)")
