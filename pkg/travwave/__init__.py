"""
拟线性波动方程的行波分岔求解器

对 -Φ_yy - (1 - λV₀ - V₁)Φ_xx + Γ(Φ³)_xx = 0 计算分岔点、追踪从 (0, λ*)
分出的行波分支，并通过测量分支曲率比较 λ̈(0) 的各个闭式候选值。
"""

from .branch import (Branch, BranchPoint, CurvatureReport, measure_curvature,
                     regular_trace, trace, trace_and_measure)
from .core import (BifurcationPoint, Case, GammaMode, PotentialSpec,
                   SolverConfig, TravWaveError, validate)
from .dispersion import a_coeff, alpha_star, bifurcation_point, kernel_scan

__version__ = "1.0.0"
__all__ = [
    "Branch", "BranchPoint", "CurvatureReport", "measure_curvature",
    "regular_trace", "trace", "trace_and_measure",
    "BifurcationPoint", "Case", "GammaMode", "PotentialSpec", "SolverConfig",
    "TravWaveError", "validate",
    "a_coeff", "alpha_star", "bifurcation_point", "kernel_scan",
]
