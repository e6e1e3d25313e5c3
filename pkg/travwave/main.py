"""
行波分岔求解器 - 命令行入口

子命令:
    travwave --config run.yaml bifpoint          计算 α 并检查分岔假设
    travwave --config run.yaml modes --k 1 2     输出模态函数采样
    travwave --config run.yaml spectrum          A^k_λ 零点扫描（--discrete 输出离散特征值）
    travwave --config run.yaml trace             追踪分支并测量曲率
    travwave --config run.yaml verify --branch out/branch.csv
    travwave --config run.yaml field --branch out/branch.csv --index 0

退出码: 0 成功, 2 输入/配置错误, 3 求解失败, 4 校验未通过, 5 曲率无唯一匹配, 6 读写错误
"""

import argparse
import csv
import logging
import os
import sys
from enum import IntEnum
from typing import List, Optional

import numpy as np

from .branch import lambda_ddot_candidates, measure_curvature, trace_and_measure
from .config import RunConfig, get_config, load_config_from_file, parse_run_config
from .core import (BifurcationPoint, CertificationError, ConfigError,
                   EigenConvergenceError, FoldError, GridError,
                   InsufficientDataError, NewtonDivergence, RegimeError,
                   SingularOperatorError, SpectrumMismatchError,
                   TruncationError, ValidationError)
from .dispersion import bifurcation_point, check_hypotheses, kernel_scan, uniqueness_window
from .fieldio import (GridSpec, default_grid, read_branch_csv, reconstruct,
                      verify_branch, write_branch_csv, write_field_csv,
                      write_json)
from .modes import mode_samples
from .schrod import build_operator, smallest_eigs
from .utils import format_float, run_parallel

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    VALIDATION = 2
    SOLVER = 3
    VERIFICATION = 4
    CURVATURE = 5
    IO = 6


_ERROR_CODES = [
    ((ValidationError, ConfigError), ExitCode.VALIDATION),
    ((InsufficientDataError,), ExitCode.CURVATURE),
    ((NewtonDivergence, FoldError, SingularOperatorError, EigenConvergenceError,
      CertificationError, RegimeError, GridError, TruncationError,
      SpectrumMismatchError), ExitCode.SOLVER),
    ((OSError,), ExitCode.IO),
]


def _run_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    return parse_run_config(load_config_from_file(args.config))


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _bifurcation(run: RunConfig):
    bp, spec = bifurcation_point(run.spec, run.k_star, run.lambda_star)
    if abs(bp.alpha - spec.alpha) > 1e-12 * max(1.0, bp.alpha):
        # 显式给定的 α 优先
        spec = run.spec
        bp = BifurcationPoint(k_star=run.k_star, lambda_star=run.lambda_star, alpha=run.spec.alpha)
    return bp, spec


def cmd_bifpoint(args) -> int:
    run = _run_config(args)
    bp, spec = _bifurcation(run)
    n_lambda = get_config().LAMBDA_SAMPLES
    report = check_hypotheses(spec, bp, run.solver, n_lambda=n_lambda)
    lo, hi = uniqueness_window(spec, bp, n_lambda=n_lambda)
    result = {
        "alpha": bp.alpha,
        "k_star": bp.k_star,
        "lambda_star": bp.lambda_star,
        "spec_digest": spec.digest(),
        "hypotheses": report.to_dict(),
        "uniqueness_window": [lo, hi],
    }
    path = _out_path(args, "bifpoint.json")
    write_json(result, path)
    print(f"α = {format_float(bp.alpha)}, 唯一性窗口 [{format_float(lo)}, {format_float(hi)}], "
          f"假设检查{'通过' if report.passed else '未通过'} -> {path}")
    return ExitCode.OK if report.passed else ExitCode.VERIFICATION


def cmd_modes(args) -> int:
    run = _run_config(args)
    _, spec = _bifurcation(run)
    lam = run.lambda_star if args.lam is None else args.lam
    y = np.linspace(-args.y_max, args.y_max, 2 * args.n + 1)
    columns = [column for k in args.k for column in mode_samples(spec, k, lam, y)]

    path = _out_path(args, "modes.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["y"] + [name for k in args.k for name in (f"phi_{k}", f"phi_prime_{k}")])
        for j, yj in enumerate(y):
            writer.writerow([format_float(yj)] + [format_float(col[j]) for col in columns])
    print(f"模态采样已写入 {path}")
    return ExitCode.OK


def cmd_spectrum(args) -> int:
    run = _run_config(args)
    bp, spec = _bifurcation(run)
    lo = run.lambda_star - args.half_width if args.lambda_min is None else args.lambda_min
    hi = run.lambda_star + args.half_width if args.lambda_max is None else args.lambda_max
    k_max = args.k_max or run.solver.K

    if args.discrete:
        cfg = run.solver

        def eigs(k):
            op = build_operator(spec, k, bp.lambda_star, cfg)
            return [value for value, _ in smallest_eigs(op, args.m)]

        k_values = list(range(1, k_max + 1))
        rows = run_parallel(eigs, k_values, cfg.max_workers)
        path = _out_path(args, "spectrum_discrete.csv")
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["k", "lambda"] + [f"eig_{i}" for i in range(1, args.m + 1)])
            for k, values in zip(k_values, rows):
                writer.writerow([str(k), format_float(bp.lambda_star)] + [format_float(v) for v in values])
        print(f"离散特征值已写入 {path}")
        return ExitCode.OK

    n_lambda = args.n_lambda or get_config().LAMBDA_SAMPLES
    scan = kernel_scan(spec, k_max, (lo, hi), n_lambda, max_workers=run.solver.max_workers)
    matrix_path = _out_path(args, "spectrum_matrix.csv")
    with open(matrix_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["k"] + [format_float(lam) for lam in scan.lambda_grid])
        for k, row in zip(scan.k_values, scan.residuals):
            writer.writerow([str(k)] + [format_float(v) for v in row])
    path = _out_path(args, "spectrum.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["k", "lambda"])
        for k, lam in scan.zeros:
            writer.writerow([str(k), format_float(lam)])
    print(f"找到 {len(scan.zeros)} 个零点 -> {path}，A^k_λ 矩阵 -> {matrix_path}")
    return ExitCode.OK


def cmd_trace(args) -> int:
    run = _run_config(args)
    bp, spec = _bifurcation(run)
    branch, report = trace_and_measure(spec, bp, run.solver)
    write_branch_csv(branch, _out_path(args, "branch.csv"))
    summary = report.to_dict()
    summary.update({"partial": branch.partial, "failures": branch.failures,
                    "n_points": len(branch), "spec_digest": spec.digest()})
    write_json(summary, _out_path(args, "curvature.json"))
    print(f"分支 {len(branch)} 个点, λ̈(0) ≈ {format_float(report.measured)}, 匹配 {report.best_match}")
    if branch.partial:
        return ExitCode.SOLVER
    return ExitCode.OK if report.matched else ExitCode.CURVATURE


def _load_branch(args, run: RunConfig):
    branch = read_branch_csv(args.branch, run.k_star, run.lambda_star)
    if not len(branch):
        raise InsufficientDataError(f"{args.branch} contains no branch points")
    return branch


def cmd_verify(args) -> int:
    run = _run_config(args)
    bp, spec = _bifurcation(run)
    branch = _load_branch(args, run)
    report = verify_branch(branch, spec, run.solver, seed=args.seed)
    result = report.to_dict()
    try:
        result["curvature"] = measure_curvature(branch, lambda_ddot_candidates(spec, bp)).to_dict()
    except InsufficientDataError as e:
        result["curvature"] = {"error": str(e)}
    write_json(result, _out_path(args, "verify.json"))
    print(f"校验{'通过' if report.passed else '未通过'}: 最大残差 {report.max_residual:.3e}, "
          f"内部 {report.max_interior:.3e}, 边界 {report.max_boundary:.3e}")
    return ExitCode.OK if report.passed else ExitCode.VERIFICATION


def cmd_field(args) -> int:
    run = _run_config(args)
    _, spec = _bifurcation(run)
    branch = _load_branch(args, run)
    point = branch[args.index]
    base = default_grid(run.solver, branch.setting)
    grid = GridSpec(n_x=args.n_x or base.n_x, n_y=base.n_y, y_max=base.y_max)
    field_grid = reconstruct(point, spec, grid, run.solver)
    path = _out_path(args, f"field_{args.index:03d}.csv")
    write_field_csv(field_grid, path)
    print(f"场已写入 {path}")
    return ExitCode.OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="travwave", description="拟线性波动方程行波分岔求解器")
    parser.add_argument("--config", help="YAML/JSON 运行配置")
    parser.add_argument("--out", default=".", help="输出目录")
    parser.add_argument("--seed", type=int, default=None, help="随机性质检验的种子（不影响求解器）")
    parser.add_argument("--log-level", default=None, help="日志级别")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("bifpoint", help="计算分岔点 α 与假设检查").set_defaults(func=cmd_bifpoint)

    p = sub.add_parser("modes", help="输出模态函数 φ_k")
    p.add_argument("--k", type=int, nargs="+", default=[1])
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--y-max", type=float, default=10.0)
    p.add_argument("--n", type=int, default=200)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("spectrum", help="色散系数零点扫描")
    p.add_argument("--discrete", action="store_true", help="输出离散算子绝对值最小的特征值")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--lambda-min", type=float, default=None)
    p.add_argument("--lambda-max", type=float, default=None)
    p.add_argument("--half-width", type=float, default=0.2)
    p.add_argument("--n-lambda", type=int, default=None)
    p.set_defaults(func=cmd_spectrum)

    sub.add_parser("trace", help="追踪分支并测量曲率").set_defaults(func=cmd_trace)

    p = sub.add_parser("verify", help="重新校验分支文件")
    p.add_argument("--branch", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("field", help="重构场 Φ(x,y)")
    p.add_argument("--branch", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--n-x", type=int, default=None)
    p.set_defaults(func=cmd_field)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, (args.log_level or get_config().LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    if args.seed is not None:
        logger.info(f"随机种子: {args.seed}")

    try:
        return int(args.func(args))
    except Exception as e:
        for classes, code in _ERROR_CODES:
            if isinstance(e, classes):
                logger.error(f"{args.command} 失败: {e}")
                print(f"错误: {e}", file=sys.stderr)
                return int(code)
        raise


if __name__ == "__main__":
    sys.exit(main())
