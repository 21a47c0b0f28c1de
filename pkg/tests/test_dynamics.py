"""连续时间流测试"""

import numpy as np
import pytest

from unified_momentum.dynamics import (
    FlowId,
    collinear_defect,
    damping_coefficient,
    flow_spec,
    identity_time_map,
    integrate_flow,
    integrate_nag_g,
    lagrangian_entry,
    linear_time_map,
    nag_c_system,
    ode_residual,
    tensor_flow,
    tensor_time_map,
    unified_nag_system,
    verify_time_dilation,
)
from unified_momentum.errors import DomainError, InvalidOrderError, UnsupportedDiagnosticError
from unified_momentum.problems import make_quadratic


@pytest.fixture(scope="module")
def unified_traj(toy):
    return integrate_flow(unified_nag_system(1e-3), toy, np.ones(2), 40.0, dt=1e-3)


def _problem_start(request, name):
    """(目标, 起点)；逻辑回归从原坐标的 0 出发"""
    obj = request.getfixturevalue(name)
    x0 = -obj.data["shift"] if name == "logistic" else np.ones(2)
    return obj, x0


class TestIntegrator:
    """RK4 积分与奇异起点"""

    def test_harmonic_oscillator(self):
        """μ = 0 的 NAG-SC 系统在 f = x²/2 上的解是 cos t"""
        obj = make_quadratic(np.array([[1.0]]), name="x²/2")
        traj = integrate_flow(flow_spec(FlowId.NAG_SC_SYS, 0.0), obj, np.array([1.0]), 10.0, dt=1e-3)
        assert np.max(np.abs(traj.X[:, 0] - np.cos(traj.times))) <= 1e-6
        assert np.isnan(traj.energy).all()

    def test_first_node_is_origin(self, unified_traj):
        assert unified_traj.times[0] == 0.0
        assert np.array_equal(unified_traj.X[0], np.ones(2))
        assert unified_traj.metadata["start_offset"] == pytest.approx(1e-2)

    def test_start_offset_insensitive(self, toy):
        """起点偏移减半对 t = 1 处的状态影响可忽略"""
        spec = unified_nag_system(1e-3)
        a = integrate_flow(spec, toy, np.ones(2), 2.0, dt=1e-3, start_offset=1e-2)
        b = integrate_flow(spec, toy, np.ones(2), 2.0, dt=1e-3, start_offset=5e-3)
        assert np.max(np.abs(a.x_at(1.0) - b.x_at(1.0))) <= 1e-8

    def test_dense_output_z(self, unified_traj):
        i = 1000
        assert np.array_equal(unified_traj.z_at(float(unified_traj.times[i])), unified_traj.Z[i])
        mid = 0.5 * float(unified_traj.times[i] + unified_traj.times[i + 1])
        average = 0.5 * (unified_traj.Z[i] + unified_traj.Z[i + 1])
        assert np.max(np.abs(unified_traj.z_at(mid) - average)) <= 1e-6

    def test_dense_output_range(self, unified_traj):
        with pytest.raises(DomainError):
            unified_traj.x_at(41.0)

    def test_invalid_arguments(self, toy):
        spec = unified_nag_system(1e-3)
        with pytest.raises(DomainError):
            integrate_flow(spec, toy, np.ones(2), 1.0, dt=0.0)
        with pytest.raises(DomainError):
            integrate_flow(spec, toy, np.ones(2), 5e-3, dt=1e-3)

    def test_ode_residual(self, unified_traj, toy):
        assert ode_residual(unified_nag_system(1e-3), unified_traj, toy) <= 1e-4


class TestLyapunov:
    """连续能量与收敛界"""

    def test_unified_flow(self, unified_traj):
        assert unified_traj.energy_monotone()
        assert unified_traj.bound_violations() == 0

    def test_nag_c_flow(self, toy):
        traj = integrate_flow(nag_c_system(), toy, np.ones(2), 40.0)
        assert traj.energy_monotone()
        assert traj.bound_violations() == 0

    def test_nag_sc_flow(self, toy):
        traj = integrate_flow(flow_spec(FlowId.NAG_SC_SYS, toy.mu), toy, np.ones(2), 40.0)
        assert traj.energy_monotone()
        assert traj.bound_violations() == 0

    def test_original_nag_flow(self, toy):
        traj = integrate_flow(flow_spec(FlowId.ORIGINAL_NAG_FLOW, toy.mu, gamma0=1e-2), toy, np.ones(2), 20.0)
        assert traj.energy_monotone()
        assert traj.bound_violations() == 0

    def test_tensor_flow_p3(self, toy):
        """p = 3、μ = 0 的张量流"""
        traj = integrate_flow(tensor_flow(3, 1.0 / 48.0, 0.0), toy, np.ones(2), 10.0)
        assert traj.energy_monotone()
        assert traj.bound_violations() == 0


class TestCoefficients:
    """系数诊断与目录"""

    def test_damping_asymptote(self):
        """μ = 1 时 b(t) → 2√μ"""
        assert damping_coefficient(unified_nag_system(1.0), 200.0) == pytest.approx(2.0, abs=1e-12)

    def test_numeric_damping(self):
        """没有解析阻尼时用 τ + m − τ̇/τ，μ = 0 的统一 Lagrangian 给出 3/t"""
        spec = lagrangian_entry("UNIFIED_NAG", 0.0)
        assert damping_coefficient(spec, 2.0) == pytest.approx(1.5, rel=1e-7)

    def test_collinear(self):
        times = np.linspace(0.1, 50.0, 500)
        assert collinear_defect(unified_nag_system(1e-2), times) <= 1e-12
        assert collinear_defect(nag_c_system(), times) <= 1e-14

    def test_lagrangian_nag_c_matches_system(self, toy):
        a = integrate_flow(lagrangian_entry("NAG_C"), toy, np.ones(2), 5.0)
        b = integrate_flow(nag_c_system(), toy, np.ones(2), 5.0)
        assert np.max(np.abs(a.X - b.X)) <= 1e-10

    def test_catalogue_errors(self):
        with pytest.raises(DomainError):
            flow_spec(FlowId.ORIGINAL_NAG_FLOW, 1e-3)
        with pytest.raises(DomainError):
            flow_spec(FlowId.NAG_G, 1e-3)
        with pytest.raises(DomainError):
            flow_spec(FlowId.DILATED)
        with pytest.raises(DomainError):
            lagrangian_entry("ORIGINAL_NAG", 1e-2, gamma0=1e-3)
        with pytest.raises(InvalidOrderError):
            tensor_flow(1, 1.0, 0.0)

    def test_nag_sc_without_energy(self):
        spec = flow_spec(FlowId.NAG_SC_SYS, 0.0)
        with pytest.raises(UnsupportedDiagnosticError):
            spec.energy_scales(np.array([1.0]))


class TestTimeDilation:
    """时间伸缩"""

    def test_identity(self, toy):
        deviation = verify_time_dilation(unified_nag_system(1e-3), identity_time_map(), toy, np.ones(2), 5.0)
        assert deviation <= 1e-8

    def test_linear(self, toy):
        deviation = verify_time_dilation(unified_nag_system(1e-3), linear_time_map(2.0), toy, np.ones(2), 5.0)
        assert deviation <= 1e-5

    def test_tensor_p2_is_dilated_unified_flow(self, toy):
        """p = 2、C = 1 的张量流等于统一 NAG 系统在 T = 2t 下的伸缩"""
        deviation = verify_time_dilation(unified_nag_system(1e-3), tensor_time_map(1.0), toy, np.ones(2), 5.0,
                                         target=tensor_flow(2, 1.0, 1e-3))
        assert deviation <= 1e-5

    def test_invalid_map(self):
        with pytest.raises(DomainError):
            linear_time_map(0.0)


class TestNagG:
    """梯度范数最小化流"""

    @pytest.mark.parametrize("T", [5.0, 20.0])
    @pytest.mark.parametrize("problem", ["toy", "logistic"])
    def test_gradient_bound(self, request, problem, T):
        obj, x0 = _problem_start(request, problem)
        traj = integrate_nag_g(obj, x0, T)
        assert traj.metadata["grad_norm_sq"] <= traj.metadata["grad_bound"]
        assert traj.times[-1] == T
        assert np.array_equal(traj.dX[-1], np.zeros(2))

    @pytest.mark.parametrize("T", [5.0, 20.0])
    @pytest.mark.parametrize("problem", ["toy", "logistic"])
    def test_energy_nonincreasing(self, request, problem, T):
        """后验能量在终点前的全部节点上不增"""
        obj, x0 = _problem_start(request, problem)
        traj = integrate_nag_g(obj, x0, T)
        e = traj.energy[:-1]
        assert np.all(np.isfinite(e))
        assert np.all(np.diff(e) <= 1e-7 * max(1.0, abs(e[0])))

    def test_too_short(self, toy):
        with pytest.raises(DomainError):
            integrate_nag_g(toy, np.ones(2), 1e-2)


class TestTrajectoryWrite:
    """轨迹 CSV"""

    def test_rows_and_header(self, toy, tmp_path):
        traj = integrate_flow(unified_nag_system(1e-3), toy, np.ones(2), 1.0, dt=1e-2, start_offset=0.1)
        path = traj.write(tmp_path / "flow.csv")
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "t,x_1,x_2,z_1,z_2,f_gap,energy,bound"
        assert len(lines) == len(traj) + 1
        assert path.with_suffix(".json").exists()
