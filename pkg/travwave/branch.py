"""
非线性求解与分支延拓

分布型 Γ = γδ₀：未知量为模态系数 (a_1..a_K) 与 λ，方程为
    r_k = A^k_λ a_k - (γk²/4)(a∗a∗a)_k = 0。
正则型 Γ(y)：未知量为各模态在网格上的取值 u_k(y_j) 与 λ，方程为
    (T_k u_k)_j + ¼k²Γ(y_j)(u(y_j)∗u(y_j)∗u(y_j))_k = 0。
两种情形都加一条振幅约束，用带 Armijo 回溯的 Newton 法求解扩展系统。
"""

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.linalg import LinAlgError, LinAlgWarning, solve
from scipy.sparse.linalg import LinearOperator, MatrixRankWarning, gmres, spsolve

from .core import (BifurcationPoint, Case, CertificationError, FoldError,
                   InsufficientDataError, NewtonDivergence, PotentialSpec,
                   SolverConfig, check_lambda, require_valid, sample_average)
from .dispersion import a_coeff, kernel_scan
from .modes import build_mode, phi_l2_squared, psi_prime0, v0_mass
from .performance import get_convergence_monitor
from .schrod import (DiscreteOperator, apply_operator, build_operator,
                     interior_nodes, projected_solve, smallest_eigs, to_sparse)
from .seqalg import OddSpectrum, basis_e, conv3, conv3_coeffs, cubic_matrix
from .utils import measure_solver_performance

logger = logging.getLogger(__name__)

ARMIJO_FACTOR = 0.5
ARMIJO_MAX_HALVINGS = 20
ARMIJO_SLOPE = 1e-4
CERTIFY_TOL = 1e-8
FIT_EPS_MAX = 0.1
MIN_FIT_POINTS = 8
MAX_AMBIGUOUS_RETRIES = 3

DISTRIBUTIONAL = "distributional"
REGULAR = "regular"


@dataclass
class BranchPoint:
    """分支上的一个点 (Φ(ε), λ(ε))"""
    eps: float
    lam: float
    a: Optional[OddSpectrum] = None
    mode_grid: Optional[np.ndarray] = None
    residual_norm: float = 0.0
    newton_iters: int = 0
    history: Tuple[float, ...] = ()
    truncation: float = 0.0

    @property
    def setting(self) -> str:
        return REGULAR if self.mode_grid is not None else DISTRIBUTIONAL

    @property
    def K(self) -> int:
        return self.mode_grid.shape[0] if self.mode_grid is not None else self.a.K


@dataclass
class Branch:
    """一条追踪得到的分支，两个半支按 ε 升序合并"""
    points: List[BranchPoint]
    setting: str
    k_star: int
    lambda_star: float
    partial: bool = False
    failures: List[str] = field(default_factory=list)
    candidates: List[Tuple[str, float]] = field(default_factory=list)
    y_nodes: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, index):
        return self.points[index]

    @property
    def eps(self) -> np.ndarray:
        return np.array([p.eps for p in self.points])

    @property
    def lam(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])


@dataclass
class CurvatureReport:
    """λ(ε) = λ₀ + ½cε² 的拟合结果与候选常数比较"""
    measured: float
    intercept: float
    fit_residual: float
    candidates: List[Tuple[str, float]]
    best_match: str
    relative_gap: float
    tolerance: float
    n_points: int
    gaps: List[Tuple[str, float]] = field(default_factory=list)

    @property
    def matched(self) -> bool:
        return self.best_match not in ("none", "ambiguous")

    def to_dict(self) -> dict:
        return {
            "measured": self.measured,
            "intercept": self.intercept,
            "fit_residual": self.fit_residual,
            "candidates": [[label, value] for label, value in self.candidates],
            "gaps": [[label, gap] for label, gap in self.gaps],
            "best_match": self.best_match,
            "rejected": [label for label, _ in self.candidates if label != self.best_match],
            "relative_gap": self.relative_gap,
            "tolerance": self.tolerance,
            "n_points": self.n_points,
        }


# ---------------------------------------------------------------------------
# 分布型 Γ

def _a_values(spec: PotentialSpec, K: int, lam: float) -> np.ndarray:
    return np.array([a_coeff(spec, k, lam) for k in range(1, K + 1)])


def _require_distributional(spec: PotentialSpec, cfg: Optional[SolverConfig] = None) -> None:
    if spec.is_regular:
        raise ValueError("coefficient residual requires a DistributionalGamma spec")
    require_valid(spec, cfg, bifurcation=False)


def g_residual(a: OddSpectrum, lam: float, spec: PotentialSpec) -> OddSpectrum:
    """r_k = A^k_λ a_k - (γk²/4)(a∗a∗a)_k，k = 1..K"""
    _require_distributional(spec)
    check_lambda(lam)
    k = np.arange(1, a.K + 1)
    cubic = conv3(a, a.K).coeffs
    return OddSpectrum(_a_values(spec, a.K, lam) * a.coeffs - 0.25 * spec.gamma * k ** 2 * cubic)


def g_jacobian(a: OddSpectrum, lam: float, spec: PotentialSpec) -> Tuple[np.ndarray, np.ndarray]:
    """(∂r/∂a, ∂r/∂λ)，∂A^k_λ/∂λ = 2ψ'_k(0;λ)"""
    _require_distributional(spec)
    check_lambda(lam)
    K = a.K
    k = np.arange(1, K + 1)
    jac = np.diag(_a_values(spec, K, lam)) - 0.25 * spec.gamma * (k ** 2)[:, None] * cubic_matrix(a.coeffs, K)
    dlam = np.array([2.0 * psi_prime0(spec, int(kk), lam) for kk in k]) * a.coeffs
    return jac, dlam


def truncation_residual(a: OddSpectrum, lam: float, spec: PotentialSpec) -> np.ndarray:
    """截断丢弃的三次项 -(γk²/4)(a∗a∗a)_k，k = K+1..3K"""
    _require_distributional(spec)
    check_lambda(lam)
    K = a.K
    k = np.arange(K + 1, 3 * K + 1)
    full = conv3_coeffs(a.coeffs, 3 * K, extended=True)
    return -0.25 * spec.gamma * k ** 2 * full[K:]


def _damped_newton(residual: Callable[[np.ndarray], np.ndarray],
                   step: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   x0: np.ndarray, tol: float, max_iters: int, label: str,
                   norm: Callable[[np.ndarray], float] = np.linalg.norm) -> Tuple[np.ndarray, List[float]]:
    """Newton 迭代，步长按 Armijo 规则减半；λ ≥ 1 的试探点残差记为 inf"""
    monitor = get_convergence_monitor()
    start = time.time()
    x = np.array(x0, dtype=float)
    F = residual(x)
    r = norm(F)
    history = [r]
    for iteration in range(max_iters):
        if r <= tol:
            break
        dx = step(x, F)
        t = 1.0
        for _ in range(ARMIJO_MAX_HALVINGS + 1):
            trial = x + t * dx
            F_trial = residual(trial) if trial[-1] < 1.0 else None
            r_trial = norm(F_trial) if F_trial is not None else math.inf
            if r_trial <= (1.0 - ARMIJO_SLOPE * t) * r:
                break
            t *= ARMIJO_FACTOR
        else:
            monitor.record_solve(label, history, time.time() - start, converged=False)
            raise NewtonDivergence(f"{label}: line search failed", x, history)
        x, F, r = trial, F_trial, r_trial
        history.append(r)
        logger.debug(f"{label}: 第 {iteration + 1} 步 |F| = {r:.3e} (步长 {t:g})")

    converged = r <= tol
    monitor.record_solve(label, history, time.time() - start, converged=converged)
    if not converged:
        raise NewtonDivergence(f"{label}: no convergence in {max_iters} iterations", x, history)
    return x, history


def _dense_step(jacobian: Callable[[np.ndarray], np.ndarray]) -> Callable:
    def step(x, F):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", LinAlgWarning)
                return -solve(jacobian(x), F)
        except (LinAlgError, LinAlgWarning) as e:
            raise FoldError(f"fold or symmetry-degenerate point (λ = {x[-1]:.15g}): {e}") from e
    return step


def _infer_k_star(seed: BranchPoint) -> int:
    coeffs = np.abs(seed.a.coeffs)
    if not np.any(coeffs):
        raise ValueError("k_star is required for a zero seed")
    return int(np.argmax(coeffs)) + 1


def corrector(seed: BranchPoint, eps_target: float, spec: PotentialSpec, cfg: SolverConfig,
              k_star: Optional[int] = None) -> BranchPoint:
    """在约束 a_{k*} = ε 下从 seed 出发求解 g_residual = 0"""
    _require_distributional(spec, cfg)
    K = seed.a.K
    if eps_target == 0.0:
        return BranchPoint(eps=0.0, lam=seed.lam, a=OddSpectrum.zeros(K))
    if k_star is None:
        k_star = _infer_k_star(seed)
    idx = k_star - 1

    def residual(x):
        a = OddSpectrum(x[:-1])
        return np.append(g_residual(a, x[-1], spec).coeffs, x[idx] - eps_target)

    def jacobian(x):
        jac, dlam = g_jacobian(OddSpectrum(x[:-1]), x[-1], spec)
        ext = np.zeros((K + 1, K + 1))
        ext[:K, :K] = jac
        ext[:K, K] = dlam
        ext[K, idx] = 1.0
        return ext

    x0 = np.append(seed.a.coeffs, seed.lam)
    x, history = _damped_newton(residual, _dense_step(jacobian), x0,
                                cfg.tol_newton, cfg.max_newton_iters,
                                label=f"{DISTRIBUTIONAL} ε={eps_target:.6g}")
    a = OddSpectrum(x[:-1])
    res = float(np.linalg.norm(g_residual(a, x[-1], spec).coeffs))
    return BranchPoint(
        eps=float(eps_target), lam=float(x[-1]), a=a,
        residual_norm=res, newton_iters=len(history) - 1, history=tuple(history),
        truncation=float(np.linalg.norm(truncation_residual(a, x[-1], spec))),
    )


# ---------------------------------------------------------------------------
# 曲率候选

def _quartic_integral(spec: PotentialSpec, k: int, lam: float) -> float:
    """∫ Γ φ_k(|y|)⁴ dy，φ_k(0) = 1"""
    mode = build_mode(spec, k, lam)
    total = 0.0
    for lo, hi, value in spec.gamma_profile:
        if value == 0.0:
            continue
        if spec.case is Case.P1:
            kap = mode.kappa_out

            def primitive(y):
                return math.copysign(1.0 - math.exp(-4.0 * kap * abs(y)), y) / (4.0 * kap)

            total += value * (primitive(hi) - primitive(lo))
        else:
            points = [p for p in (-spec.b, 0.0, spec.b) if lo < p < hi]
            integral, _ = quad(lambda y: mode(y) ** 4, lo, hi, points=points or None,
                               epsabs=1e-14, epsrel=1e-12, limit=200)
            total += value * integral
    return total


def quartic_ratio(spec: PotentialSpec, k: int, lam: float) -> float:
    """R = ∫Γ(φ*)⁴ / ∫V₀(φ*)²，φ* 在 L²(ℝ) 中归一"""
    norm_sq = 2.0 * phi_l2_squared(spec, k, lam)
    return _quartic_integral(spec, k, lam) / (norm_sq * 2.0 * v0_mass(spec, k, lam))


def lambda_ddot_candidates(spec: PotentialSpec, bp: BifurcationPoint) -> List[Tuple[str, float]]:
    """λ̈(0) 的各个闭式候选值，第一个用于预测步"""
    k, lam = bp.k_star, bp.lambda_star
    if spec.is_regular:
        R = quartic_ratio(spec, k, lam)
        return [("quartic_ratio", -1.5 * R), ("quartic_ratio_pi", -1.5 * math.pi * R)]

    gamma = spec.gamma
    half = v0_mass(spec, k, lam)
    candidates = [
        ("half_line_mass", -3.0 * gamma / (4.0 * half)),
        ("full_line_mass", -3.0 * gamma / (4.0 * 2.0 * half)),
    ]
    if spec.case is Case.P1:
        candidates.append(("decay_rate", -gamma * k * math.sqrt(1.0 - lam)))
    return candidates


# ---------------------------------------------------------------------------
# 分支追踪

def certify(spec: PotentialSpec, bp: BifurcationPoint, cfg: SolverConfig) -> None:
    """在 k ≤ K 与 λ* 邻域内确认 A^k_λ 只有 (k*, λ*) 一个零点"""
    half = min(0.05, 0.5 * (1.0 - bp.lambda_star))
    scan = kernel_scan(spec, cfg.K, (bp.lambda_star - half, bp.lambda_star + half),
                       max_workers=cfg.max_workers)
    if not scan.certified:
        raise CertificationError(f"bifurcation point not unique on the scan window: zeros {scan.zeros}")
    k, lam = scan.zeros[0]
    if k != bp.k_star or abs(lam - bp.lambda_star) > CERTIFY_TOL:
        raise CertificationError(f"scan found ({k}, {lam:.15g}), expected ({bp.k_star}, {bp.lambda_star})")


def _eps_grid(cfg: SolverConfig) -> np.ndarray:
    return cfg.eps_max * np.arange(1, cfg.n_branch + 1) / cfg.n_branch


def _march(solve_point: Callable[[BranchPoint, float], BranchPoint],
           first_seed: Callable[[float], BranchPoint],
           eps_values: np.ndarray, lambda_star: float,
           failures: List[str]) -> Tuple[List[BranchPoint], bool]:
    """沿一个半支推进，失败时截断并记录"""
    points: List[BranchPoint] = []
    for eps in eps_values:
        if points:
            prev = points[-1]
            ratio = eps / prev.eps
            seed = _scaled_seed(prev, ratio, lambda_star)
        else:
            seed = first_seed(eps)
        try:
            points.append(solve_point(seed, eps))
        except (NewtonDivergence, FoldError) as e:
            logger.warning(f"半支在 ε={eps:.6g} 处中止: {e}")
            failures.append(f"eps={eps:.17g}: {e}")
            return points, True
    return points, False


def _scaled_seed(prev: BranchPoint, ratio: float, lambda_star: float) -> BranchPoint:
    lam = lambda_star + (prev.lam - lambda_star) * ratio ** 2
    if prev.a is not None:
        return BranchPoint(eps=prev.eps * ratio, lam=lam, a=prev.a.scaled(ratio))
    return BranchPoint(eps=prev.eps * ratio, lam=lam, mode_grid=ratio * prev.mode_grid)


def _collect(halves: Sequence[Tuple[List[BranchPoint], bool]]) -> Tuple[List[BranchPoint], bool]:
    points = sorted((p for pts, _ in halves for p in pts), key=lambda p: p.eps)
    return points, any(partial for _, partial in halves)


@measure_solver_performance
def trace(spec: PotentialSpec, bp: BifurcationPoint, cfg: SolverConfig) -> Branch:
    """在 ε ∈ [-eps_max, eps_max] 上追踪分支（不含 ε = 0）"""
    if spec.is_regular:
        return regular_trace(spec, bp, cfg)
    require_valid(spec, cfg, k_star=bp.k_star, lambda_star=bp.lambda_star)
    certify(spec, bp, cfg)

    candidates = lambda_ddot_candidates(spec, bp)
    c1 = candidates[0][1]
    e_star = basis_e(bp.k_star, cfg.K)

    def first_seed(eps):
        return BranchPoint(eps=eps, lam=bp.lambda_star + 0.5 * c1 * eps ** 2, a=e_star.scaled(eps))

    def solve_point(seed, eps):
        return corrector(seed, eps, spec, cfg, k_star=bp.k_star)

    failures: List[str] = []
    eps_values = _eps_grid(cfg)
    halves = [_march(solve_point, first_seed, sign * eps_values, bp.lambda_star, failures)
              for sign in (1.0, -1.0)]
    points, partial = _collect(halves)
    logger.info(f"分布型分支追踪完成: {len(points)} 个点, partial={partial}")
    return Branch(points=points, setting=DISTRIBUTIONAL, k_star=bp.k_star,
                  lambda_star=bp.lambda_star, partial=partial, failures=failures,
                  candidates=candidates)


# ---------------------------------------------------------------------------
# 正则型 Γ

def _operators(spec: PotentialSpec, lam: float, cfg: SolverConfig) -> List[DiscreteOperator]:
    return [build_operator(spec, k, lam, cfg) for k in range(1, cfg.K + 1)]


def _gamma_samples(spec: PotentialSpec, cfg: SolverConfig) -> np.ndarray:
    return sample_average(spec.gamma_at, interior_nodes(cfg), cfg.h)


def regular_residual(mode_grid: np.ndarray, lam: float, spec: PotentialSpec,
                     cfg: SolverConfig) -> np.ndarray:
    """(T_k u_k)_j + ¼k²Γ(y_j)(u(y_j)∗u(y_j)∗u(y_j))_k，形状同 mode_grid"""
    U = np.asarray(mode_grid, dtype=float)
    K = U.shape[0]
    ops = [build_operator(spec, k, lam, cfg) for k in range(1, K + 1)]
    linear = np.vstack([apply_operator(op, u) for op, u in zip(ops, U)])
    cubic = conv3_coeffs(U.T, K).T
    k = np.arange(1, K + 1)[:, None]
    return linear + 0.25 * k ** 2 * _gamma_samples(spec, cfg)[None, :] * cubic


def _regular_jacobian(U: np.ndarray, ops: List[DiscreteOperator], gamma: np.ndarray,
                      phi_star: np.ndarray, k_star: int, h: float) -> sp.csr_matrix:
    K, N = U.shape
    M = cubic_matrix(U.T, K)
    blocks = [[None] * (K + 1) for _ in range(K + 1)]
    for i in range(K):
        scale = 0.25 * (i + 1) ** 2 * gamma
        for j in range(K):
            coupling = sp.diags(scale * M[:, i, j])
            blocks[i][j] = to_sparse(ops[i]) + coupling if i == j else coupling
        blocks[i][K] = sp.csr_matrix((-(i + 1) ** 2 * ops[i].v0 * U[i])[:, None])
    row = np.zeros((1, K * N))
    row[0, (k_star - 1) * N:k_star * N] = h * phi_star
    for j in range(K):
        blocks[K][j] = sp.csr_matrix(row[:, j * N:(j + 1) * N])
    blocks[K][K] = sp.csr_matrix((1, 1))
    return sp.bmat(blocks, format="csc")


def _block_preconditioner(ops: List[DiscreteOperator], phi_star: np.ndarray, k_star: int) -> LinearOperator:
    K, N = len(ops), ops[0].size

    def apply(v):
        v = np.asarray(v, dtype=float).reshape(-1)
        out = np.empty_like(v)
        for i, op in enumerate(ops):
            out[i * N:(i + 1) * N] = projected_solve(op, i + 1 == k_star, phi_star, v[i * N:(i + 1) * N])
        out[-1] = v[-1]
        return out

    return LinearOperator((K * N + 1, K * N + 1), matvec=apply)


def _sparse_solve(jac: sp.csc_matrix, rhs: np.ndarray, cfg: SolverConfig,
                  precond: Callable[[], LinearOperator]) -> np.ndarray:
    if cfg.linear_solver == "gmres":
        sol, info = gmres(jac, rhs, rtol=1e-13, atol=0.0, restart=50, maxiter=20, M=precond())
        if info == 0:
            return sol
        logger.warning(f"GMRES 未收敛 (info={info})，改用直接法")
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        return spsolve(jac, rhs)


def regular_trace(spec: PotentialSpec, bp: BifurcationPoint, cfg: SolverConfig) -> Branch:
    """正则 Γ 的分支，约束 h·Σφ*(y_j)u_{k*}(y_j) = ε"""
    if not spec.is_regular:
        raise ValueError("regular_trace requires a RegularGamma spec")
    require_valid(spec, cfg, k_star=bp.k_star, lambda_star=bp.lambda_star)
    certify(spec, bp, cfg)

    k_star, K, h = bp.k_star, cfg.K, cfg.h
    mu0, phi_star = smallest_eigs(build_operator(spec, k_star, bp.lambda_star, cfg), 1)[0]
    logger.info(f"离散核向量: k*={k_star}, 最小特征值 {mu0:.3e}")
    N = phi_star.size
    gamma = _gamma_samples(spec, cfg)
    candidates = lambda_ddot_candidates(spec, bp)
    c1 = candidates[0][1]

    def norm(F):
        return math.sqrt(h * float(F[:-1] @ F[:-1]) + F[-1] ** 2)

    def solve_point(seed: BranchPoint, eps: float) -> BranchPoint:
        def residual(x):
            U = x[:-1].reshape(K, N)
            R = regular_residual(U, x[-1], spec, cfg)
            return np.append(R.reshape(-1), h * float(phi_star @ U[k_star - 1]) - eps)

        def step(x, F):
            U = x[:-1].reshape(K, N)
            ops = _operators(spec, x[-1], cfg)
            jac = _regular_jacobian(U, ops, gamma, phi_star, k_star, h)
            try:
                dx = _sparse_solve(jac, -F, cfg, lambda: _block_preconditioner(ops, phi_star, k_star))
            except (RuntimeError, MatrixRankWarning) as e:
                raise FoldError(f"fold or symmetry-degenerate point (λ = {x[-1]:.15g}): {e}") from e
            if not np.all(np.isfinite(dx)):
                raise FoldError(f"fold or symmetry-degenerate point (λ = {x[-1]:.15g})")
            return dx

        x0 = np.append(seed.mode_grid.reshape(-1), seed.lam)
        x, history = _damped_newton(residual, step, x0, cfg.tol_newton, cfg.max_newton_iters,
                                    label=f"{REGULAR} ε={eps:.6g}", norm=norm)
        U = x[:-1].reshape(K, N)
        R = regular_residual(U, x[-1], spec, cfg)
        return BranchPoint(eps=float(eps), lam=float(x[-1]), mode_grid=U,
                           residual_norm=math.sqrt(h * float(np.sum(R ** 2))),
                           newton_iters=len(history) - 1, history=tuple(history))

    def first_seed(eps):
        U = np.zeros((K, N))
        U[k_star - 1] = eps * phi_star
        return BranchPoint(eps=eps, lam=bp.lambda_star + 0.5 * c1 * eps ** 2, mode_grid=U)

    failures: List[str] = []
    eps_values = _eps_grid(cfg)
    halves = [_march(solve_point, first_seed, sign * eps_values, bp.lambda_star, failures)
              for sign in (1.0, -1.0)]
    points, partial = _collect(halves)
    logger.info(f"正则型分支追踪完成: {len(points)} 个点, partial={partial}")
    return Branch(points=points, setting=REGULAR, k_star=k_star, lambda_star=bp.lambda_star,
                  partial=partial, failures=failures, candidates=candidates,
                  y_nodes=interior_nodes(cfg))


# ---------------------------------------------------------------------------
# 曲率测量

def _relative_gap(measured: float, value: float) -> float:
    if value == 0.0:
        return 0.0 if measured == 0.0 else math.inf
    return abs(measured - value) / abs(value)


def measure_curvature(branch, candidates: Optional[Sequence[Tuple[str, float]]] = None,
                      tolerance: Optional[float] = None) -> CurvatureReport:
    """用 |ε| 最小的一半数据拟合 λ = λ₀ + ½cε²，并与候选常数比较"""
    points = [p for p in branch if p.eps != 0.0 and abs(p.eps) <= FIT_EPS_MAX]
    if len(points) < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"curvature fit needs at least {MIN_FIT_POINTS} points with |eps| <= {FIT_EPS_MAX}, got {len(points)}"
        )
    if candidates is None:
        candidates = getattr(branch, "candidates", [])
    if tolerance is None:
        tolerance = 0.05 if getattr(branch, "setting", DISTRIBUTIONAL) == REGULAR else 0.02

    points.sort(key=lambda p: abs(p.eps))
    used = points[:max(len(points) // 2, 4)]
    eps = np.array([abs(p.eps) for p in used])
    lam = np.array([p.lam for p in used])
    design = np.column_stack([np.ones_like(eps), 0.5 * eps ** 2])
    (intercept, c), *_ = np.linalg.lstsq(design, lam, rcond=None)
    resid = lam - design @ np.array([intercept, c])
    model = np.linalg.norm(0.5 * c * eps ** 2)
    fit_residual = float(np.linalg.norm(resid) / model) if model > 0 else float(np.linalg.norm(resid))

    gaps = [(label, _relative_gap(c, value)) for label, value in candidates]
    matches = [label for label, gap in gaps if gap <= tolerance]
    if len(matches) == 1:
        best = matches[0]
    elif matches:
        best = "ambiguous"
    else:
        best = "none"
    relative_gap = min((gap for _, gap in gaps), default=math.inf)

    report = CurvatureReport(measured=float(c), intercept=float(intercept), fit_residual=fit_residual,
                             candidates=list(candidates), best_match=best, relative_gap=relative_gap,
                             tolerance=tolerance, n_points=len(used), gaps=gaps)
    logger.info(f"曲率拟合: c = {c:.10g}, 最佳匹配 {best}, 相对差 {relative_gap:.3e}")
    return report


def trace_and_measure(spec: PotentialSpec, bp: BifurcationPoint,
                      cfg: SolverConfig) -> Tuple[Branch, CurvatureReport]:
    """结果为 "ambiguous" 时将 eps_max 减半重追，最多三次"""
    branch = trace(spec, bp, cfg)
    report = measure_curvature(branch)
    retries = 0
    while report.best_match == "ambiguous" and retries < MAX_AMBIGUOUS_RETRIES:
        retries += 1
        cfg = replace(cfg, eps_max=0.5 * cfg.eps_max)
        logger.warning(f"曲率匹配不唯一，eps_max 减半为 {cfg.eps_max:g} 重新追踪")
        branch = trace(spec, bp, cfg)
        report = measure_curvature(branch)
    return branch, report
