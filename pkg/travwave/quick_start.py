"""
快速开始示例 - 最简单的使用方式
"""

import logging
import os
import sys

# 添加模块路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from travwave import (Case, PotentialSpec, SolverConfig, bifurcation_point,
                      trace_and_measure)
from travwave.performance import get_convergence_monitor


def main():
    """主函数"""
    logging.basicConfig(level=logging.INFO)
    print("🚀 行波分岔求解器 - 快速开始")
    print("=" * 40)

    print("1. 由 (k*, λ*) = (1, 0) 确定 δ 势强度...")
    bp, spec = bifurcation_point(PotentialSpec(case=Case.P1, alpha=1.0, gamma=1.0), 1, 0.0)
    print(f"   α = {bp.alpha}")

    print("2. 追踪分布型 Γ = δ₀ 的分支...")
    cfg = SolverConfig(K=12, eps_max=0.1, n_branch=32)
    branch, report = trace_and_measure(spec, bp, cfg)
    print(f"   {len(branch)} 个分支点, partial={branch.partial}")

    print("3. 曲率测量...")
    print(f"   λ̈(0) ≈ {report.measured:.10f}")
    for label, value in report.candidates:
        mark = "✅" if label == report.best_match else "  "
        print(f"   {mark} {label}: {value:.10f}")

    stats = get_convergence_monitor().get_stats()
    print(f"4. Newton 平均迭代次数 {stats['avg_iterations']:.2f}，"
          f"最大二次收敛常数 {stats['max_quadratic_constant']}")


if __name__ == "__main__":
    main()
