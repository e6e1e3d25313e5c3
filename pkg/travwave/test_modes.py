"""
模态函数测试
"""

import math
import unittest

import numpy as np
from scipy.integrate import quad, trapezoid

from .core import Case, PotentialSpec, RegimeError, ValidationError
from .modes import (P1, P2_SUB, P2_SUPER, P2_UNIT, build_mode, normalized_kernel,
                    phi_l2_squared, phi_prime0, psi_prime0, regime, resonant_width,
                    v0_mass)

SPECS = {
    P1: PotentialSpec(case=Case.P1, alpha=2.0),
    P2_SUB: PotentialSpec(case=Case.P2, alpha=1.0, beta=0.4, b=1.3),
    P2_UNIT: PotentialSpec(case=Case.P2, alpha=1.0, beta=1.0, b=0.8),
    P2_SUPER: PotentialSpec(case=Case.P2, alpha=1.0, beta=2.0, b=math.pi),
}


class TestModeFunctions(unittest.TestCase):
    """闭式模态函数测试"""

    def test_regime_classification(self):
        """测试按 β 分类"""
        for name, spec in SPECS.items():
            self.assertEqual(regime(spec), name)

    def test_normalization_and_decay(self):
        """测试 φ(0) = 1 且远处衰减"""
        for name, spec in SPECS.items():
            for k in (1, 2, 5):
                mode = build_mode(spec, k, 0.2)
                self.assertAlmostEqual(mode(0.0), 1.0, places=14, msg=name)
                self.assertLess(abs(mode(30.0)), 1e-8, msg=name)

    def test_p1_closed_form(self):
        """测试 P1 为 e^{-k√(1-λ)|y|}"""
        y = np.linspace(-5.0, 5.0, 101)
        phi, dphi = build_mode(SPECS[P1], 3, 0.36).evaluate(y)
        np.testing.assert_allclose(phi, np.exp(-3 * 0.8 * np.abs(y)), rtol=1e-14)
        self.assertAlmostEqual(phi_prime0(SPECS[P1], 3, 0.36), -2.4, places=14)
        self.assertLess(dphi[-1], 0.0)
        self.assertGreater(dphi[0], 0.0)

    def test_ode_residual(self):
        """测试分段满足 φ'' = k²(1 - λV₀ - W)φ"""
        lam, step = 0.3, 1e-3
        for name, spec in SPECS.items():
            for k in (1, 3):
                mode = build_mode(spec, k, lam)
                b = spec.b or 1.0
                for y in (0.3 * b, 0.7 * b, 1.5 * b, 2.5 * b):
                    second = (mode(y + step) - 2.0 * mode(y) + mode(y - step)) / step ** 2
                    coeff = k ** 2 * (1.0 - lam * float(spec.v0(y)) - float(spec.w(y)))
                    scale = max(abs(coeff * mode(y)), 1e-3 * abs(mode(y)), 1e-12)
                    self.assertLess(abs(second - coeff * mode(y)) / scale, 1e-4, msg=f"{name} k={k} y={y}")

    def test_c1_across_interface(self):
        """测试 φ 与 φ' 在 y = b 连续"""
        for name in (P2_SUB, P2_UNIT, P2_SUPER):
            spec = SPECS[name]
            mode = build_mode(spec, 2, 0.1)
            gap = 1e-9
            (left, right), (d_left, d_right) = mode.evaluate(np.array([spec.b - gap, spec.b + gap]))
            self.assertAlmostEqual(left, right, places=7, msg=name)
            self.assertAlmostEqual(d_left, d_right, places=7, msg=name)
            self.assertAlmostEqual(mode(spec.b), mode.phi_b, places=12, msg=name)

    def test_resonant_interface_values(self):
        """测试 β>1 时 φ(b) = (-1)^k，c1 = -√(1-λ)/√(β-1)"""
        spec = SPECS[P2_SUPER]
        lam = 0.19
        for k in (1, 2, 3):
            mode = build_mode(spec, k, lam)
            self.assertAlmostEqual(mode.phi_b, (-1.0) ** k, places=12)
            self.assertAlmostEqual(mode.c1, -0.9, places=12)

    def test_large_argument_no_overflow(self):
        """测试 k√(1-β)b 很大时数值有限"""
        spec = PotentialSpec(case=Case.P2, alpha=1.0, beta=0.5, b=10.0)
        mode = build_mode(spec, 200, 0.0)
        phi, dphi = mode.evaluate(np.linspace(0.0, 12.0, 50))
        self.assertTrue(np.all(np.isfinite(phi)))
        self.assertTrue(np.all(np.isfinite(dphi)))
        self.assertTrue(math.isfinite(phi_l2_squared(spec, 200, 0.0)))
        self.assertAlmostEqual(phi_prime0(spec, 200, 0.0), -200 * math.sqrt(0.5), places=8)

    def test_l2_norm_matches_quadrature(self):
        """测试闭式 L² 范数与数值积分一致"""
        for name, spec in SPECS.items():
            for k in (1, 2, 4):
                mode = build_mode(spec, k, 0.25)
                points = [spec.b] if spec.b else None
                inner, _ = quad(lambda y: mode(y) ** 2, 0.0, 40.0, points=points, limit=200,
                                epsabs=1e-14, epsrel=1e-13)
                self.assertAlmostEqual(phi_l2_squared(spec, k, 0.25) / inner, 1.0, places=9, msg=name)

    def test_psi_prime_is_lambda_derivative(self):
        """测试 ψ'(0) = ∂λ φ'(0₊)"""
        step = 1e-6
        for name, spec in SPECS.items():
            for k in (1, 3):
                lam = 0.2
                fd = (phi_prime0(spec, k, lam + step) - phi_prime0(spec, k, lam - step)) / (2 * step)
                self.assertAlmostEqual(psi_prime0(spec, k, lam) / fd, 1.0, places=6, msg=name)
                self.assertGreater(psi_prime0(spec, k, lam), 0.0)

    def test_vectorized_lambda(self):
        """测试 λ 为数组时逐点一致"""
        spec = SPECS[P2_SUB]
        lam = np.array([-0.5, 0.0, 0.5])
        values = phi_prime0(spec, 2, lam)
        for j, value in enumerate(values):
            self.assertAlmostEqual(value, phi_prime0(spec, 2, float(lam[j])), places=14)
        self.assertEqual(v0_mass(spec, 2, lam).shape, (3,))

    def test_normalized_kernel(self):
        """测试 φ* 在 ℝ 上 L² 范数为 1"""
        y = np.linspace(-40.0, 40.0, 160001)
        for name, spec in SPECS.items():
            values = normalized_kernel(spec, 1, 0.0, y)
            self.assertAlmostEqual(trapezoid(values ** 2, y), 1.0, places=4, msg=name)


class TestModeErrors(unittest.TestCase):
    """模态函数错误测试"""

    def test_lambda_outside_regime(self):
        """测试 λ ≥ 1 报错"""
        with self.assertRaises(RegimeError):
            build_mode(SPECS[P1], 1, 1.0)
        with self.assertRaises(RegimeError):
            phi_prime0(SPECS[P1], 1, np.array([0.0, 1.5]))

    def test_invalid_wavenumber(self):
        """测试 k < 1 报错"""
        with self.assertRaises(RegimeError):
            build_mode(SPECS[P1], 0, 0.0)

    def test_requested_regime_mismatch(self):
        """测试显式公式与 β 不符"""
        with self.assertRaises(RegimeError):
            build_mode(SPECS[P2_SUB], 1, 0.0, regime_name=P2_SUPER)
        self.assertEqual(build_mode(SPECS[P2_SUB], 1, 0.0, regime_name=P2_SUB).case, P2_SUB)

    def test_off_resonance_warning(self):
        """测试 β>1 而 b ≠ π/√(β-1) 时告警"""
        spec = PotentialSpec(case=Case.P2, alpha=1.0, beta=1.7, b=2.0)
        self.assertNotAlmostEqual(resonant_width(1.7), 2.0)
        with self.assertLogs("travwave.modes", level="WARNING"):
            build_mode(spec, 1, 0.0)

    def test_invalid_spec_rejected(self):
        """测试 validate 报错的势参数不会得到模态"""
        negative_width = PotentialSpec(case=Case.P2, alpha=1.0, beta=0.5, b=-1.0)
        with self.assertRaises(ValidationError) as ctx:
            build_mode(negative_width, 1, 0.0)
        self.assertIn("b must be positive for P2", ctx.exception.diagnostics)
        with self.assertRaises(ValidationError):
            phi_prime0(negative_width, 1, 0.0)

        missing_beta = PotentialSpec(case=Case.P2, alpha=1.0, b=1.0)
        with self.assertRaises(ValidationError) as ctx:
            phi_l2_squared(missing_beta, 1, 0.0)
        self.assertIn("beta is required for P2", ctx.exception.diagnostics)

    def test_resonant_width_requires_beta_above_one(self):
        """测试 β ≤ 1 时没有共振宽度"""
        with self.assertRaises(RegimeError):
            resonant_width(1.0)


if __name__ == "__main__":
    unittest.main()
