"""双曲函数模块测试"""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from unified_momentum.errors import DomainError, InvalidOrderError
from unified_momentum.hyperbolic import (
    HigherHyperbolicTable,
    cothc,
    cschc,
    cp_estimate_at,
    estimate_Cp,
    eval_sinh_p,
    get_table,
    higher_variants,
    hyperbolic_identity_residual,
    log_cosh,
    log_sinh,
    log_sinhc,
    sinhc,
    sinhc_p,
    tanhc,
)


class TestSinhcFamily:
    """sinhc / tanhc / cothc / cschc"""

    def test_removable_singularity(self):
        """x = 0 处四个函数都取 1"""
        for f in (sinhc, tanhc, cothc, cschc):
            assert f(0.0) == 1.0

    def test_matches_definition(self):
        """中等参数下与定义式一致"""
        for x in (1e-3, 0.5, 1.0, 7.0):
            assert sinhc(x) == pytest.approx(math.sinh(x) / x, rel=1e-14)
            assert tanhc(x) == pytest.approx(math.tanh(x) / x, rel=1e-14)
            assert cothc(x) == pytest.approx(x / math.tanh(x), rel=1e-14)
            assert cschc(x) == pytest.approx(x / math.sinh(x), rel=1e-14)

    def test_series_branch_continuity(self):
        """级数阈值两侧取值连续"""
        for f in (sinhc, tanhc, cothc, cschc):
            assert f(0.99e-4) == pytest.approx(f(1.01e-4), abs=1e-9)

    def test_even_functions(self):
        x = np.array([-3.0, -0.2, 0.2, 3.0])
        assert np.allclose(sinhc(x), sinhc(-x))
        assert np.allclose(cothc(x), cothc(-x))

    def test_large_arguments(self):
        """大参数下不溢出"""
        assert cothc(1000.0) == pytest.approx(1000.0)
        assert tanhc(1000.0) == pytest.approx(1e-3)
        assert 0.0 <= cschc(1000.0) < 1e-300
        assert math.isfinite(sinhc(600.0))

    def test_array_input(self):
        out = sinhc(np.array([0.0, 1.0]))
        assert isinstance(out, np.ndarray)
        assert out[1] == pytest.approx(math.sinh(1.0))

    def test_identity(self):
        """x·tanh x − cothc x + cschc x/cosh x = 0"""
        x = np.linspace(-20.0, 20.0, 2001)
        assert np.max(np.abs(hyperbolic_identity_residual(x))) <= 1e-12

    def test_reference_values(self):
        assert sinhc(1.0) == pytest.approx(1.1752011936, rel=1e-10)
        assert cothc(10.0) == pytest.approx(10.0 + 20.0 * math.exp(-20.0), rel=1e-14)
        assert tanhc(2.0) == pytest.approx(0.4820, abs=1e-4)

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            sinhc(math.nan)
        with pytest.raises(DomainError):
            cothc(np.array([1.0, math.nan]))


class TestLogForms:
    """对数形式"""

    def test_log_sinh(self):
        assert log_sinh(1.0) == pytest.approx(math.log(math.sinh(1.0)), rel=1e-14)
        assert log_sinh(1000.0) == pytest.approx(1000.0 - math.log(2.0))
        assert log_sinh(0.0) == -math.inf

    def test_log_cosh(self):
        assert log_cosh(0.0) == pytest.approx(0.0, abs=1e-16)
        assert log_cosh(-2.0) == pytest.approx(math.log(math.cosh(2.0)), rel=1e-14)

    def test_log_sinhc(self):
        assert log_sinhc(1e-6) == pytest.approx(1e-12 / 6.0, rel=1e-6)
        assert log_sinhc(3.0) == pytest.approx(math.log(math.sinh(3.0) / 3.0), rel=1e-13)

    def test_domain(self):
        with pytest.raises(DomainError):
            log_sinh(-1.0)


class TestHigherHyperbolic:
    """sinh_p 表格"""

    def test_sinh2_is_sinh(self):
        """p = 2 时 sinh_2 = sinh"""
        table = get_table(2)
        for t in np.linspace(0.0, 10.0, 101):
            s, c = eval_sinh_p(table, float(t))
            assert abs(s - math.sinh(t)) <= 1e-9 * max(1.0, math.sinh(t))
            assert c == pytest.approx(math.cosh(t), rel=1e-9)

    def test_matches_dop853_oracle(self):
        """p = 3 与 DOP853 细步长解一致"""
        sol = solve_ivp(lambda t, y: np.cbrt(1.0 + y ** 3), (0.0, 4.0), [0.0],
                        method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
        table = get_table(3)
        for t in (0.5, 1.0, 2.0, 4.0):
            ref = float(sol.sol(t)[0])
            assert eval_sinh_p(table, t)[0] == pytest.approx(ref, rel=1e-9)

    def test_pythagorean_identity(self):
        """cosh_p^p − sinh_p^p = 1"""
        table = get_table(3)
        for t in (0.3, 1.0, 2.0):
            s, c = eval_sinh_p(table, t)
            assert c ** 3 - s ** 3 == pytest.approx(1.0, rel=1e-10)

    def test_small_argument_series(self):
        """阈值以下用级数，sinhc_p ≈ 1 + t^p/(p(p+1))"""
        t = 1e-5
        assert sinhc_p(3, t) == pytest.approx(1.0 + t ** 3 / 12.0, rel=1e-15)
        v = higher_variants(3, 0.0)
        assert v["sinh_p"] == 0.0
        assert v["coth_p"] == math.inf

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_sinhc_p_nondecreasing(self, p):
        values = [sinhc_p(p, float(t)) for t in np.arange(0.0, 20.0 + 1e-9, 1e-2)]
        assert np.all(np.diff(values) >= -1e-12)

    def test_cothc_near_zero(self):
        assert 1.0 <= higher_variants(3, 1e-6)["cothc_p"] <= 1.0 + 1e-6

    def test_cp_estimate_increases(self):
        table = get_table(3)
        assert cp_estimate_at(table, 20.0) >= cp_estimate_at(table, 10.0) - 1e-6

    def test_table_extends(self):
        table = HigherHyperbolicTable(p=2, grid_step=1e-3)
        eval_sinh_p(table, 25.0)
        assert table.horizon >= 25.0

    def test_samples(self):
        """表格样本：t 递增、sinh_p(0) = 0、cosh_p^p − sinh_p^p = 1"""
        table = HigherHyperbolicTable(p=3, grid_step=1e-3)
        eval_sinh_p(table, 2.0)
        t, s, c = table.samples
        assert t[0] == 0.0 and s[0] == 0.0 and c[0] == 1.0
        assert np.all(np.diff(t) > 0)
        assert t[-1] == pytest.approx(table.horizon)
        assert np.allclose(c ** 3 - s ** 3, 1.0, rtol=0.0, atol=1e-12)

    def test_c2_estimate(self):
        """C_2 = 1/2"""
        assert estimate_Cp(2) == pytest.approx(0.5, abs=1e-4)

    def test_invalid_order(self):
        with pytest.raises(InvalidOrderError):
            HigherHyperbolicTable(p=1)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            eval_sinh_p(get_table(2), -1.0)
