"""
分支追踪与曲率测量测试
"""

import itertools
import math
import unittest
from dataclasses import replace

import numpy as np
from scipy.integrate import trapezoid

from .core import (BifurcationPoint, Case, CertificationError, FoldError, GammaMode,
                   InsufficientDataError, NewtonDivergence, PotentialSpec, SolverConfig,
                   ValidationError, sample_average)
from .branch import (REGULAR, Branch, BranchPoint, corrector, g_jacobian, g_residual,
                     lambda_ddot_candidates, measure_curvature, quartic_ratio,
                     regular_residual, regular_trace, trace, trace_and_measure,
                     truncation_residual)
from .modes import build_mode, phi_l2_squared, v0_mass
from .performance import get_convergence_monitor
from .schrod import apply_operator, build_operator, interior_nodes, smallest_eigs
from .seqalg import OddSpectrum, basis_e, hs_norm
from .utils import make_rng, random_spectrum

P1_SPEC = PotentialSpec(case=Case.P1, alpha=2.0, gamma=1.0)
P1_BP = BifurcationPoint(k_star=1, lambda_star=0.0, alpha=2.0)


def brute_residual(coeffs, lam, spec):
    """逐项求和的分布型残差"""
    K = len(coeffs)

    def a(k):
        if k == 0 or abs(k) > K:
            return 0.0
        return math.copysign(coeffs[abs(k) - 1], k)

    out = []
    for k in range(1, K + 1):
        cube = sum(a(j1) * a(j2) * a(k - j1 - j2)
                   for j1, j2 in itertools.product(range(-K, K + 1), repeat=2))
        A = 2.0 * -k * math.sqrt(1.0 - lam) + k ** 2 * spec.alpha
        out.append(A * coeffs[k - 1] - 0.25 * spec.gamma * k ** 2 * cube)
    return np.array(out)


class TestDistributionalResidual(unittest.TestCase):
    """分布型残差与 Jacobian 测试"""

    def test_trivial_solution(self):
        """测试 a = 0 为平凡解"""
        r = g_residual(OddSpectrum.zeros(6), 0.3, P1_SPEC)
        self.assertEqual(np.max(np.abs(r.coeffs)), 0.0)

    def test_single_mode_residual(self):
        """测试 a = εe¹ 时 r₁ = ¾ε³，r₃ = -(9/4)ε³"""
        eps = 0.1
        r = g_residual(basis_e(1, 4).scaled(eps), 0.0, P1_SPEC)
        self.assertAlmostEqual(r[1], 0.75 * eps ** 3, places=15)
        self.assertAlmostEqual(r[3], -2.25 * eps ** 3, places=15)
        self.assertEqual(r[2], 0.0)
        self.assertEqual(r[4], 0.0)

    def test_matches_brute_force(self):
        """测试与逐项求和一致"""
        rng = make_rng(21)
        for _ in range(5):
            coeffs = random_spectrum(6, rng, scale=0.2, decay=1.0)
            lam = float(rng.uniform(-0.5, 0.5))
            np.testing.assert_allclose(g_residual(OddSpectrum(coeffs), lam, P1_SPEC).coeffs,
                                       brute_residual(coeffs, lam, P1_SPEC), rtol=0, atol=1e-13)

    def test_jacobian_matches_finite_differences(self):
        """测试 Jacobian 与中心差分一致"""
        rng = make_rng(22)
        a = OddSpectrum(random_spectrum(5, rng, scale=0.3))
        lam, step = 0.1, 1e-6
        jac, dlam = g_jacobian(a, lam, P1_SPEC)
        for j in range(5):
            e = np.zeros(5)
            e[j] = step
            plus = g_residual(OddSpectrum(a.coeffs + e), lam, P1_SPEC).coeffs
            minus = g_residual(OddSpectrum(a.coeffs - e), lam, P1_SPEC).coeffs
            np.testing.assert_allclose(jac[:, j], (plus - minus) / (2 * step), rtol=0, atol=1e-7)
        plus = g_residual(a, lam + step, P1_SPEC).coeffs
        minus = g_residual(a, lam - step, P1_SPEC).coeffs
        np.testing.assert_allclose(dlam, (plus - minus) / (2 * step), rtol=0, atol=1e-7)

    def test_jacobian_at_zero_is_diagonal(self):
        """测试 a = 0 时 Jacobian 为 diag(A^k_λ)"""
        jac, dlam = g_jacobian(OddSpectrum.zeros(4), 0.0, P1_SPEC)
        np.testing.assert_allclose(jac, np.diag([2.0 * k * k - 2.0 * k for k in range(1, 5)]), atol=1e-14)
        self.assertEqual(np.max(np.abs(dlam)), 0.0)

    def test_truncation_residual(self):
        """测试截断丢弃的高频项"""
        eps = 0.2
        tail = truncation_residual(OddSpectrum([eps]), 0.0, P1_SPEC)
        self.assertEqual(tail.shape, (2,))
        self.assertEqual(tail[0], 0.0)
        self.assertAlmostEqual(tail[1], -2.25 * eps ** 3, places=15)

    def test_rejects_regular_and_invalid_specs(self):
        """测试系数残差只接受合法的分布型 Γ"""
        regular = PotentialSpec(case=Case.P1, alpha=2.0, gamma=5.0, mode=GammaMode.REGULAR,
                                gamma_profile=((-1.0, 1.0, 1.0),))
        a = basis_e(1, 3).scaled(0.1)
        for func in (g_residual, g_jacobian, truncation_residual):
            with self.assertRaises(ValueError) as ctx:
                func(a, 0.0, regular)
            self.assertNotIsInstance(ctx.exception, ValidationError)
        seed = BranchPoint(eps=0.1, lam=0.0, a=a)
        with self.assertRaises(ValueError):
            corrector(seed, 0.1, regular, SolverConfig(K=3), k_star=1)

        invalid = PotentialSpec(case=Case.P1, alpha=-2.0, gamma=1.0)
        with self.assertRaises(ValidationError):
            g_residual(a, 0.0, invalid)
        with self.assertRaises(ValidationError):
            corrector(seed, 0.1, P1_SPEC, SolverConfig(K=3, n_y=1), k_star=1)


class TestCorrector(unittest.TestCase):
    """Newton 校正测试"""

    def setUp(self):
        self.cfg = SolverConfig(K=12)

    def test_small_amplitude(self):
        """测试小振幅时解接近 (εe¹, λ*)"""
        eps = 1e-4
        seed = BranchPoint(eps=eps, lam=0.0, a=basis_e(1, 12).scaled(eps))
        point = corrector(seed, eps, P1_SPEC, self.cfg, k_star=1)
        self.assertLess(abs(point.lam), 1e-6)
        self.assertAlmostEqual(point.a[1], eps, delta=1e-18)
        self.assertLess(np.max(np.abs(point.a.coeffs[1:])), eps ** 3)
        self.assertLessEqual(point.residual_norm, 1e-12)

    def test_zero_amplitude(self):
        """测试 ε = 0 返回平凡解"""
        seed = BranchPoint(eps=0.01, lam=0.0, a=basis_e(1, 12).scaled(0.01))
        point = corrector(seed, 0.0, P1_SPEC, self.cfg)
        self.assertEqual(point.eps, 0.0)
        self.assertEqual(np.max(np.abs(point.a.coeffs)), 0.0)

    def test_sign_symmetry(self):
        """测试 (a, λ) ↦ (-a, λ) 对称"""
        eps = 0.08
        seed = BranchPoint(eps=eps, lam=-0.75 * eps ** 2, a=basis_e(1, 12).scaled(eps))
        plus = corrector(seed, eps, P1_SPEC, self.cfg, k_star=1)
        minus = corrector(BranchPoint(eps=-eps, lam=seed.lam, a=-seed.a), -eps, P1_SPEC, self.cfg, k_star=1)
        self.assertAlmostEqual(plus.lam, minus.lam, places=14)
        np.testing.assert_allclose(minus.a.coeffs, -plus.a.coeffs, rtol=0, atol=1e-14)

    def test_newton_divergence(self):
        """测试迭代次数不足时保留历史"""
        seed = BranchPoint(eps=0.1, lam=0.5, a=basis_e(1, 12).scaled(0.1))
        with self.assertRaises(NewtonDivergence) as ctx:
            corrector(seed, 0.1, P1_SPEC, replace(self.cfg, max_newton_iters=1), k_star=1)
        self.assertGreaterEqual(len(ctx.exception.history), 1)
        self.assertEqual(ctx.exception.last_iterate.size, 13)

    def test_singular_extended_system(self):
        """测试零种子在分岔点处扩展系统奇异"""
        seed = BranchPoint(eps=0.0, lam=0.0, a=OddSpectrum.zeros(12))
        with self.assertRaises(FoldError):
            corrector(seed, 0.01, P1_SPEC, self.cfg, k_star=1)

    def test_zero_seed_requires_k_star(self):
        """测试零种子无法推断 k*"""
        seed = BranchPoint(eps=0.0, lam=0.0, a=OddSpectrum.zeros(12))
        with self.assertRaises(ValueError):
            corrector(seed, 0.01, P1_SPEC, self.cfg)


class TestDistributionalBranch(unittest.TestCase):
    """分布型分支测试"""

    @classmethod
    def setUpClass(cls):
        cls.cfg = SolverConfig(K=12, eps_max=0.1, n_branch=32)
        cls.branch, cls.report = trace_and_measure(P1_SPEC, P1_BP, cls.cfg)
        cls.positive = [p for p in cls.branch if p.eps > 0]
        cls.negative = [p for p in cls.branch if p.eps < 0]

    def test_complete_branch(self):
        """测试两个半支都完整"""
        self.assertEqual(len(self.branch), 64)
        self.assertFalse(self.branch.partial)
        self.assertEqual(self.branch.failures, [])
        self.assertTrue(np.all(np.diff(self.branch.eps) > 0))
        self.assertNotIn(0.0, list(self.branch.eps))

    def test_residuals_and_iterations(self):
        """测试每个点残差达到容差且 Newton 迭代次数有界"""
        for p in self.branch:
            self.assertLessEqual(p.residual_norm, 1e-12)
            self.assertLessEqual(p.newton_iters, 8)
            self.assertAlmostEqual(p.a[1], p.eps, delta=1e-15)

    def test_lambda_even_and_profile_odd(self):
        """测试 λ(-ε) = λ(ε)，a(-ε) = -a(ε)"""
        for p, q in zip(self.positive, reversed(self.negative)):
            self.assertEqual(p.eps, -q.eps)
            self.assertLessEqual(abs(p.lam - q.lam), 1e-10)
            self.assertLessEqual(np.max(np.abs(p.a.coeffs + q.a.coeffs)), 1e-10)

    def test_third_harmonic_scaling(self):
        """测试 a₃ ≈ 0.1875ε³，a₅ ≈ 0.088ε⁵"""
        small = self.positive[:8]
        ratios = np.array([p.a[3] / p.eps ** 3 for p in small])
        self.assertLessEqual(ratios.max() / ratios.min() - 1.0, 0.01)
        self.assertAlmostEqual(ratios[0] / 0.1875, 1.0, delta=0.02)
        fifth = small[-1].a[5] / small[-1].eps ** 5
        self.assertAlmostEqual(fifth / (0.5625 * 25.0 / 160.0), 1.0, delta=0.03)
        for p in self.branch:
            self.assertLessEqual(abs(p.a[2]), 1e-15)

    def test_spectral_tail(self):
        """测试 ε ≤ 0.05 时高次谐波相对 ε 可忽略"""
        for p in self.positive:
            if p.eps <= 0.05:
                tail = np.linalg.norm(p.a.coeffs[3:])
                self.assertLessEqual(tail / p.eps, 1e-6)
                self.assertLessEqual(p.truncation, 1e-12)

    def test_truncation_insensitive(self):
        """测试 K 加倍后解不变"""
        point = self.positive[-1]
        seed = BranchPoint(eps=point.eps, lam=point.lam, a=point.a.resized(24))
        doubled = corrector(seed, point.eps, P1_SPEC, replace(self.cfg, K=24), k_star=1)
        self.assertAlmostEqual(doubled.lam, point.lam, places=12)
        ratio = hs_norm(doubled.a, 2.5) / hs_norm(point.a, 2.5)
        self.assertLess(abs(ratio - 1.0), 1e-6)

    def test_curvature_matches_half_line_mass(self):
        """测试测得的 λ̈(0) 与 -3γ/(4∫₀^∞V₀φ²) 一致"""
        report = self.report
        self.assertEqual(report.best_match, "half_line_mass")
        self.assertTrue(report.matched)
        self.assertAlmostEqual(report.measured / -1.5, 1.0, delta=0.02)
        self.assertLess(abs(report.intercept), 1e-5)
        self.assertLess(report.fit_residual, 1e-3)
        self.assertIn("decay_rate", report.to_dict()["rejected"])

    def test_half_branches_give_same_curvature(self):
        """测试两个半支分别拟合结果一致"""
        c_plus = measure_curvature(self.positive, self.branch.candidates).measured
        c_minus = measure_curvature(self.negative, self.branch.candidates).measured
        self.assertAlmostEqual(c_plus, c_minus, delta=1e-8)

    def test_monitor_records_solves(self):
        """测试收敛监控记录了每次求解"""
        stats = get_convergence_monitor().get_stats()
        self.assertGreaterEqual(stats["total_solves"], 64)
        self.assertLessEqual(stats["avg_iterations"], 8)


class TestCandidatesAndFit(unittest.TestCase):
    """候选常数与拟合测试"""

    def test_distributional_candidates(self):
        """测试 P1、γ = 1 的三个候选值"""
        values = dict(lambda_ddot_candidates(P1_SPEC, P1_BP))
        self.assertAlmostEqual(values["half_line_mass"], -1.5, places=14)
        self.assertAlmostEqual(values["full_line_mass"], -0.75, places=14)
        self.assertAlmostEqual(values["decay_rate"], -1.0, places=14)

    def test_zero_gamma_candidates(self):
        """测试 γ = 0 时候选值全为零"""
        spec = replace(P1_SPEC, gamma=0.0)
        self.assertTrue(all(value == 0.0 for _, value in lambda_ddot_candidates(spec, P1_BP)))

    def test_regular_candidates(self):
        """测试 Γ = 𝟙_{|y|<1} 时 R = (1 - e^{-4})/2"""
        spec = PotentialSpec(case=Case.P1, alpha=2.0, gamma_profile=((-1.0, 1.0, 1.0),),
                             mode=GammaMode.REGULAR)
        R = (1.0 - math.exp(-4.0)) / 2.0
        self.assertAlmostEqual(quartic_ratio(spec, 1, 0.0), R, places=14)
        values = dict(lambda_ddot_candidates(spec, P1_BP))
        self.assertAlmostEqual(values["quartic_ratio"], -1.5 * R, places=14)
        self.assertAlmostEqual(values["quartic_ratio_pi"], -1.5 * math.pi * R, places=14)

    def test_p2_quartic_ratio_uses_quadrature(self):
        """测试 P2 的四次积分与直接积分一致"""
        spec = PotentialSpec(case=Case.P2, alpha=1.0, beta=0.5, b=1.0,
                             gamma_profile=((-2.0, 2.0, 1.5),), mode=GammaMode.REGULAR)
        y = np.linspace(-2.0, 2.0, 400001)
        mode = build_mode(spec, 1, 0.1)
        direct = 1.5 * trapezoid(mode.evaluate(y)[0] ** 4, y)
        expected = direct / (2.0 * phi_l2_squared(spec, 1, 0.1) * 2.0 * v0_mass(spec, 1, 0.1))
        self.assertAlmostEqual(quartic_ratio(spec, 1, 0.1) / expected, 1.0, places=6)

    def _synthetic(self, c, lam0=0.3, n=10):
        eps = 0.005 * np.arange(1, n + 1)
        points = [BranchPoint(eps=float(s * e), lam=lam0 + 0.5 * c * e ** 2) for e in eps for s in (1, -1)]
        return Branch(points=sorted(points, key=lambda p: p.eps), setting="distributional",
                      k_star=1, lambda_star=lam0)

    def test_exact_quadratic_fit(self):
        """测试精确二次数据"""
        report = measure_curvature(self._synthetic(-0.7), [("x", -0.7), ("y", -1.5)])
        self.assertAlmostEqual(report.measured, -0.7, places=9)
        self.assertAlmostEqual(report.intercept, 0.3, places=12)
        self.assertEqual(report.best_match, "x")
        self.assertEqual(report.n_points, 10)

    def test_ambiguous_and_none(self):
        """测试多个匹配与无匹配"""
        branch = self._synthetic(-0.7)
        self.assertEqual(measure_curvature(branch, [("a", -0.7), ("b", -0.705)]).best_match, "ambiguous")
        report = measure_curvature(branch, [("x", -1.5)])
        self.assertEqual(report.best_match, "none")
        self.assertFalse(report.matched)

    def test_regular_tolerance(self):
        """测试正则分支使用 5% 容差"""
        branch = replace(self._synthetic(-0.7), setting=REGULAR)
        report = measure_curvature(branch, [("x", -0.73)])
        self.assertEqual(report.tolerance, 0.05)
        self.assertEqual(report.best_match, "x")

    def test_insufficient_data(self):
        """测试点数不足"""
        with self.assertRaises(InsufficientDataError):
            measure_curvature(self._synthetic(-0.7, n=3), [("x", -0.7)])
        far = [BranchPoint(eps=0.2 + 0.01 * j, lam=0.0) for j in range(20)]
        with self.assertRaises(InsufficientDataError):
            measure_curvature(far, [("x", -0.7)])

    def test_certification_failure(self):
        """测试 α 与 λ* 不匹配时拒绝追踪"""
        bp = BifurcationPoint(k_star=1, lambda_star=0.1, alpha=2.0)
        with self.assertRaises(CertificationError):
            trace(P1_SPEC, bp, SolverConfig(K=12, n_branch=4))


REGULAR_SPEC = PotentialSpec(case=Case.P1, alpha=2.0, gamma_profile=((-1.0, 1.0, 1.0),),
                             mode=GammaMode.REGULAR)
REGULAR_CFG = SolverConfig(K=3, y_max=20.0, n_y=1000, tol_newton=1e-9, eps_max=0.1,
                           n_branch=8, max_workers=1)


class TestRegularResidual(unittest.TestCase):
    """正则型残差测试"""

    def test_zero_profile(self):
        """测试零剖面残差为零"""
        N = interior_nodes(REGULAR_CFG).size
        R = regular_residual(np.zeros((3, N)), 0.0, REGULAR_SPEC, REGULAR_CFG)
        self.assertEqual(R.shape, (3, N))
        self.assertEqual(np.max(np.abs(R)), 0.0)

    def test_single_mode_profile(self):
        """测试单模态剖面：三次项分配到 k = 1 与 k = 3"""
        cfg = REGULAR_CFG
        y = interior_nodes(cfg)
        op = build_operator(REGULAR_SPEC, 1, 0.0, cfg)
        v = 0.3 * np.exp(-np.abs(y))
        U = np.zeros((3, y.size))
        U[0] = v
        gamma = sample_average(REGULAR_SPEC.gamma_at, y, cfg.h)
        R = regular_residual(U, 0.0, REGULAR_SPEC, cfg)
        np.testing.assert_allclose(R[0], apply_operator(op, v) - 0.75 * gamma * v ** 3, rtol=0, atol=1e-10)
        self.assertEqual(np.max(np.abs(R[1])), 0.0)
        np.testing.assert_allclose(R[2], 2.25 * gamma * v ** 3, rtol=0, atol=1e-14)


class TestRegularBranch(unittest.TestCase):
    """正则型分支测试"""

    @classmethod
    def setUpClass(cls):
        cls.branch = trace(REGULAR_SPEC, P1_BP, REGULAR_CFG)
        cls.by_eps = {round(p.eps, 12): p for p in cls.branch}

    def test_complete_branch(self):
        """测试分支完整且残差达到容差"""
        self.assertEqual(self.branch.setting, REGULAR)
        self.assertEqual(len(self.branch), 16)
        self.assertFalse(self.branch.partial)
        self.assertEqual(self.branch.y_nodes.size, 2 * REGULAR_CFG.n_y - 1)
        for p in self.branch:
            self.assertLessEqual(p.residual_norm, 1e-8)
            self.assertEqual(p.mode_grid.shape, (3, self.branch.y_nodes.size))

    def test_lambda_even(self):
        """测试 λ(-ε) = λ(ε)"""
        for j in range(1, 9):
            eps = round(0.0125 * j, 12)
            self.assertLessEqual(abs(self.by_eps[eps].lam - self.by_eps[-eps].lam), 1e-10)

    def test_curvature_matches_quartic_ratio(self):
        """测试测得的曲率与 -1.5R 一致"""
        report = measure_curvature(self.branch)
        self.assertEqual(report.best_match, "quartic_ratio")
        R = (1.0 - math.exp(-4.0)) / 2.0
        self.assertAlmostEqual(report.measured / (-1.5 * R), 1.0, delta=0.05)
        self.assertLess(report.measured, 0.0)

    def test_shape_converges_quadratically(self):
        """测试 u_{k*}/ε 随 ε 二阶收敛"""
        def shape(eps):
            return self.by_eps[eps].mode_grid[0] / eps

        coarse = np.max(np.abs(shape(0.1) - shape(0.05)))
        fine = np.max(np.abs(shape(0.05) - shape(0.025)))
        self.assertTrue(3.0 <= coarse / fine <= 5.0, msg=f"ratio {coarse / fine}")

    def test_shape_matches_closed_form_kernel(self):
        """测试 u_{k*}/ε 逼近 e^{-|y|}，误差随 h 减半至少减半"""
        def kernel_error(branch):
            by_eps = {round(p.eps, 12): p for p in branch}
            small, large = by_eps[0.0125].mode_grid[0] / 0.0125, by_eps[0.025].mode_grid[0] / 0.025
            # 消去 O(ε²) 项
            shape = (4.0 * small - large) / 3.0
            return float(np.max(np.abs(shape - np.exp(-np.abs(branch.y_nodes)))))

        fine = kernel_error(self.branch)
        coarse = kernel_error(regular_trace(REGULAR_SPEC, P1_BP,
                                            replace(REGULAR_CFG, n_y=500, eps_max=0.025, n_branch=2)))
        self.assertLessEqual(fine, 2e-4)
        self.assertGreaterEqual(coarse / fine, 1.8, msg=f"{coarse:.3e} / {fine:.3e}")

    def test_gmres_matches_direct(self):
        """测试 GMRES 与直接法给出同一分支"""
        cfg = replace(REGULAR_CFG, n_branch=2, linear_solver="gmres")
        branch = regular_trace(REGULAR_SPEC, P1_BP, cfg)
        self.assertEqual(len(branch), 4)
        for p in branch:
            self.assertAlmostEqual(p.lam, self.by_eps[round(p.eps, 12)].lam, delta=1e-6)

    def test_zero_gamma_keeps_lambda(self):
        """测试 Γ = 0 时 λ 沿分支不变"""
        spec = PotentialSpec(case=Case.P1, alpha=2.0, gamma_profile=((-1.0, 1.0, 0.0),),
                             mode=GammaMode.REGULAR)
        branch = regular_trace(spec, P1_BP, replace(REGULAR_CFG, n_branch=4))
        lam = branch.lam
        self.assertLessEqual(lam.max() - lam.min(), 1e-8)
        self.assertLessEqual(abs(lam[0]), 1e-3)
        mu0, _ = smallest_eigs(build_operator(spec, 1, 0.0, REGULAR_CFG))[0]
        self.assertGreater(mu0, 0.0)

    def test_requires_regular_spec(self):
        """测试分布型 Γ 不能走正则路径"""
        with self.assertRaises(ValueError):
            regular_trace(P1_SPEC, P1_BP, REGULAR_CFG)


if __name__ == "__main__":
    unittest.main()
