"""
场重构 Φ(x,y) = Σ u_k(y) sin(kx)、弱形式残差校验与文件读写

分支文件为 CSV（eps, lambda, residual, iters, a_1..a_K）；正则情形每个点的
模态网格另存为 <stem>_point_XXX.csv 并由 mode_file 列引用。场文件为 CSV 矩阵，
首行为 x 节点，首列为 y 节点。报告为键有序的 JSON。浮点数统一写 17 位有效数字。
"""

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .branch import (DISTRIBUTIONAL, REGULAR, Branch, BranchPoint, g_residual,
                     regular_residual, truncation_residual)
from .core import GridError, PotentialSpec, SolverConfig
from .modes import build_mode, phi_prime0
from .seqalg import OddSpectrum, conv3_coeffs, sine_series
from .utils import format_float, make_rng, random_spectrum, run_parallel

logger = logging.getLogger(__name__)

GAUSS_POINTS = 10
INTERIOR_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """场网格：x_j = 2πj/n_x，y_j = jh (|j| ≤ n_y)，h = y_max/n_y"""
    n_x: int = 64
    n_y: int = 400
    y_max: float = 20.0

    @property
    def h(self) -> float:
        return self.y_max / self.n_y

    def x_nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_x) / self.n_x

    def y_nodes(self) -> np.ndarray:
        return self.h * np.arange(-self.n_y, self.n_y + 1)


def default_grid(cfg: SolverConfig, setting: str) -> GridSpec:
    """正则情形必须与求解网格一致"""
    if setting == REGULAR:
        return GridSpec(n_x=64, n_y=cfg.n_y, y_max=cfg.y_max)
    y_max = min(cfg.y_max, 20.0)
    return GridSpec(n_x=64, n_y=int(round(40 * y_max)), y_max=y_max)


@dataclass
class FieldGrid:
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray
    lam: float
    meta: Dict = field(default_factory=dict)
    coeffs: Optional[np.ndarray] = None
    mode_values: Optional[np.ndarray] = None
    setting: str = DISTRIBUTIONAL


def reconstruct(point: BranchPoint, spec: PotentialSpec, grid: GridSpec,
                cfg: Optional[SolverConfig] = None) -> FieldGrid:
    """分布型用闭式模态合成；正则型把网格模态线性插值到场网格"""
    y = grid.y_nodes()
    x = grid.x_nodes()
    if cfg is not None and grid.y_max > cfg.y_max * (1.0 + 1e-12):
        raise GridError(f"field grid y_max={grid.y_max} outside the solver domain [-{cfg.y_max}, {cfg.y_max}]")

    if point.mode_grid is None:
        coeffs = point.a.coeffs
        mode_values = np.vstack([coeffs[k - 1] * build_mode(spec, k, point.lam).evaluate(y)[0]
                                 for k in range(1, point.a.K + 1)])
    else:
        if cfg is None:
            raise GridError("solver grid (cfg) is required to reconstruct a regular branch point")
        coeffs = None
        full_y = cfg.h * np.arange(-cfg.n_y, cfg.n_y + 1)
        padded = np.pad(point.mode_grid, ((0, 0), (1, 1)))
        mode_values = np.vstack([np.interp(y, full_y, row) for row in padded])

    K = mode_values.shape[0]
    sines = np.sin(np.multiply.outer(x, np.arange(1, K + 1)))
    values = sines @ mode_values
    meta = {
        "spec_digest": spec.digest(),
        "eps": point.eps,
        "lambda": point.lam,
        "setting": point.setting,
        "n_x": grid.n_x,
        "n_y": grid.n_y,
        "y_max": grid.y_max,
    }
    return FieldGrid(x_nodes=x, y_nodes=y, values=values, lam=point.lam, meta=meta,
                     coeffs=coeffs, mode_values=mode_values, setting=point.setting)


def _interior_distributional(field_grid: FieldGrid, spec: PotentialSpec, lam: float) -> float:
    """sin(mx)⊗hat_j 检验函数的弱形式，排除 y=0 与两端的 hat"""
    y = field_grid.y_nodes
    h = y[1] - y[0]
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(GAUSS_POINTS)

    # 把单元在界面 ±b 处切开，每个子单元只与左右两个 hat 相交
    cuts = [y]
    if spec.b is not None:
        cuts.append([p for p in (-spec.b, spec.b) if y[0] < p < y[-1]])
    breaks = np.unique(np.concatenate(cuts))
    lo, hi = breaks[:-1], breaks[1:]
    owner = np.clip(np.searchsorted(y, lo, side="right") - 1, 0, y.size - 2)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    qy = mid[:, None] + half[:, None] * gl_nodes[None, :]
    qw = half[:, None] * gl_weights[None, :]
    coeff = 1.0 - lam * spec.v0(qy) - spec.w(qy)
    right_hat = (qy - y[owner][:, None]) / h
    left_hat = 1.0 - right_hat

    worst = 0.0
    for m in range(1, field_grid.coeffs.size + 1):
        a_m = field_grid.coeffs[m - 1]
        if a_m == 0.0:
            continue
        mode = build_mode(spec, m, lam)
        phi_nodes = mode.evaluate(y)[0]
        phi_q = mode.evaluate(qy)[0]
        weak = np.zeros(y.size)
        slope = np.diff(phi_nodes) / h
        weak[1:] += slope
        weak[:-1] -= slope
        np.add.at(weak, owner, m ** 2 * np.sum(qw * coeff * phi_q * left_hat, axis=1))
        np.add.at(weak, owner + 1, m ** 2 * np.sum(qw * coeff * phi_q * right_hat, axis=1))
        keep = np.ones(y.size, dtype=bool)
        keep[[0, y.size - 1, int(np.argmin(np.abs(y)))]] = False
        worst = max(worst, float(np.max(np.abs(math.pi * a_m * weak[keep]), initial=0.0)))
    return worst


def _boundary_distributional(field_grid: FieldGrid, spec: PotentialSpec, lam: float) -> float:
    """跳跃条件 Φ_y(x,0₊) - Φ_y(x,0₋) = ∂x²(αΦ + γΦ³)(x,0) 在 x 网格上的最大残差"""
    a = field_grid.coeffs
    K = a.size
    k = np.arange(1, K + 1)
    x = field_grid.x_nodes
    slopes = np.array([phi_prime0(spec, int(kk), lam) for kk in k])
    jump = sine_series(2.0 * a * slopes, x)
    k3 = np.arange(1, 3 * K + 1)
    cubic = conv3_coeffs(a, 3 * K, extended=True)
    rhs = sine_series(-spec.alpha * k ** 2 * a, x) + sine_series(0.25 * spec.gamma * k3 ** 2 * cubic, x)
    return float(np.max(np.abs(jump - rhs), initial=0.0))


def weak_residual(field_grid: FieldGrid, spec: PotentialSpec, lam: float) -> Tuple[float, float]:
    """(interior, boundary)

    分布型：内部检验函数不含 y=0 节点，闭式模态使其只剩舍入误差；
    边界项为 y=0 处的跳跃条件。正则型：节点集中求积，内部项等于
    π·h·(差分残差)，界面项由 y=0 处的 hat 承担，边界分量记为 0。
    """
    if field_grid.setting == REGULAR:
        y = field_grid.y_nodes
        n = (y.size - 1) // 2
        y_max = float(field_grid.meta.get("y_max", y[-1]))
        cfg = SolverConfig(K=field_grid.mode_values.shape[0], y_max=y_max, n_y=n)
        inner = field_grid.mode_values[:, 1:-1]
        residual = regular_residual(inner, lam, spec, cfg)
        return float(math.pi * cfg.h * np.max(np.abs(residual), initial=0.0)), 0.0
    if field_grid.coeffs is None or not np.any(field_grid.coeffs):
        return 0.0, 0.0
    return (_interior_distributional(field_grid, spec, lam),
            _boundary_distributional(field_grid, spec, lam))


# ---------------------------------------------------------------------------
# 文件读写

def write_json(data: Dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, sort_keys=True, indent=2, ensure_ascii=False)
        f.write("\n")
    logger.info(f"已写入 {path}")


def read_json(path: str) -> Dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _mode_file(path: str, index: int) -> str:
    stem, _ = os.path.splitext(path)
    return f"{stem}_point_{index:03d}.csv"


def write_branch_csv(branch: Branch, path: str) -> None:
    """分支 CSV；正则情形另写每个点的模态文件"""
    K = branch[0].K if len(branch) else 0
    regular = branch.setting == REGULAR
    header = ["eps", "lambda", "residual", "iters"]
    header += ["mode_file"] if regular else [f"a_{k}" for k in range(1, K + 1)]

    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for i, p in enumerate(branch):
            row = [format_float(p.eps), format_float(p.lam), format_float(p.residual_norm), str(p.newton_iters)]
            if regular:
                mode_path = _mode_file(path, i)
                _write_mode_grid(mode_path, branch.y_nodes, p.mode_grid)
                row.append(os.path.basename(mode_path))
            else:
                row += [format_float(v) for v in p.a.coeffs]
            writer.writerow(row)
    logger.info(f"分支文件已写入 {path} ({len(branch)} 个点)")


def _write_mode_grid(path: str, y: np.ndarray, mode_grid: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["y"] + [f"u_{k}" for k in range(1, mode_grid.shape[0] + 1)])
        for j, yj in enumerate(y):
            writer.writerow([format_float(yj)] + [format_float(v) for v in mode_grid[:, j]])


def _read_mode_grid(path: str) -> Tuple[np.ndarray, np.ndarray]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))[1:]
    data = np.array([[float(v) for v in row] for row in rows])
    return data[:, 0], data[:, 1:].T.copy()


def read_branch_csv(path: str, k_star: int = 1, lambda_star: float = math.nan) -> Branch:
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)

    if header[:4] != ["eps", "lambda", "residual", "iters"]:
        raise ValueError(f"{path}: unexpected branch header {header[:4]}")
    regular = len(header) > 4 and header[4] == "mode_file"
    base = os.path.dirname(path)
    points: List[BranchPoint] = []
    y_nodes = None
    for row in rows:
        eps, lam, res, iters = float(row[0]), float(row[1]), float(row[2]), int(row[3])
        if regular:
            y_nodes, grid = _read_mode_grid(os.path.join(base, row[4]))
            points.append(BranchPoint(eps=eps, lam=lam, mode_grid=grid, residual_norm=res, newton_iters=iters))
        else:
            a = OddSpectrum([float(v) for v in row[4:]])
            points.append(BranchPoint(eps=eps, lam=lam, a=a, residual_norm=res, newton_iters=iters))
    return Branch(points=points, setting=REGULAR if regular else DISTRIBUTIONAL,
                  k_star=k_star, lambda_star=lambda_star, y_nodes=y_nodes)


def write_field_csv(field_grid: FieldGrid, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["y\\x"] + [format_float(x) for x in field_grid.x_nodes])
        for j, yj in enumerate(field_grid.y_nodes):
            writer.writerow([format_float(yj)] + [format_float(v) for v in field_grid.values[:, j]])
    logger.info(f"场文件已写入 {path}")


def read_field_csv(path: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (x_nodes, y_nodes, values)，values 形状为 (n_x, n_y)"""
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    x = np.array([float(v) for v in rows[0][1:]])
    body = np.array([[float(v) for v in row] for row in rows[1:]])
    return x, body[:, 0], body[:, 1:].T.copy()


# ---------------------------------------------------------------------------
# 校验

@dataclass
class VerificationReport:
    passed: bool
    rows: List[Dict]
    max_residual: float
    max_interior: float
    max_boundary: float
    algebra_check: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "max_residual": self.max_residual,
            "max_interior": self.max_interior,
            "max_boundary": self.max_boundary,
            "algebra_check": self.algebra_check,
            "points": self.rows,
        }


def point_residual(point: BranchPoint, spec: PotentialSpec, cfg: SolverConfig) -> float:
    """与求解器相同的残差范数"""
    if point.mode_grid is None:
        return float(np.linalg.norm(g_residual(point.a, point.lam, spec).coeffs))
    R = regular_residual(point.mode_grid, point.lam, spec, cfg)
    return math.sqrt(cfg.h * float(np.sum(R ** 2)))


def cube_identity_error(K: int, seed: Optional[int], samples: int = 100, n_x: int = 256) -> float:
    """随机谱上 (Σa_k sin kx)³ 与 -¼Σ(a∗a∗a)_k sin kx 的最大相对偏差"""
    rng = make_rng(seed)
    x = 2.0 * np.pi * np.arange(n_x) / n_x
    worst = 0.0
    for _ in range(samples):
        a = random_spectrum(K, rng, decay=2.0)
        direct = sine_series(a, x) ** 3
        series = sine_series(-0.25 * conv3_coeffs(a, 3 * K), x)
        scale = 1.0 + (2.0 * np.sum(np.abs(a))) ** 3
        worst = max(worst, float(np.max(np.abs(direct - series))) / scale)
    return worst


def verify_branch(branch: Branch, spec: PotentialSpec, cfg: SolverConfig,
                  grid: Optional[GridSpec] = None, seed: Optional[int] = None) -> VerificationReport:
    """重算每个点的残差与弱形式残差，全部在容差内才算通过"""
    grid = grid or default_grid(cfg, branch.setting)
    tol = 10.0 * cfg.tol_newton
    interior_tol = INTERIOR_TOL if branch.setting == DISTRIBUTIONAL else tol

    def check(point: BranchPoint) -> Dict:
        residual = point_residual(point, spec, cfg)
        field_grid = reconstruct(point, spec, grid, cfg)
        interior, boundary = weak_residual(field_grid, spec, point.lam)
        row = {
            "eps": point.eps,
            "lambda": point.lam,
            "residual": residual,
            "interior": interior,
            "boundary": boundary,
            "passed": residual <= tol and interior <= interior_tol and boundary <= tol,
        }
        if point.a is not None:
            row["truncation"] = float(np.linalg.norm(truncation_residual(point.a, point.lam, spec)))
        return row

    rows = run_parallel(check, list(branch), cfg.max_workers)
    algebra = cube_identity_error(branch[0].K, seed) if len(branch) else None
    report = VerificationReport(
        passed=bool(rows) and all(r["passed"] for r in rows) and (algebra is None or algebra <= 1e-12),
        rows=rows,
        max_residual=max((r["residual"] for r in rows), default=0.0),
        max_interior=max((r["interior"] for r in rows), default=0.0),
        max_boundary=max((r["boundary"] for r in rows), default=0.0),
        algebra_check=algebra,
    )
    logger.info(f"分支校验: passed={report.passed}, 最大残差 {report.max_residual:.3e}")
    return report
