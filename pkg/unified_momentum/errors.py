"""异常定义 - 所有模块抛出的错误都继承自 UnifiedMomentumError"""

from typing import Any, Optional


class UnifiedMomentumError(Exception):
    """库异常基类，exit_code 供命令行映射退出码"""

    def __init__(self, message: str, error_type: str = "error", exit_code: int = 1):
        self.message = message
        self.error_type = error_type
        self.exit_code = exit_code
        super().__init__(self.message)


class DomainError(UnifiedMomentumError, ValueError):
    """参数不在定义域内（含 NaN 输入）"""

    def __init__(self, message: str):
        super().__init__(message, error_type="domain_error", exit_code=2)


class InvalidOrderError(DomainError):
    """高阶双曲函数或张量方法的阶数非法"""


class StepsizeTooLargeError(DomainError):
    """μs ≥ 1，系数公式不再有意义"""


class ConfigError(UnifiedMomentumError):
    """实验配置不合法"""

    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(message, error_type="config_error", exit_code=2)
        self.details = details


class DivergenceError(UnifiedMomentumError):
    """迭代或积分发散，partial 保存已得到的轨迹"""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message, error_type="divergence", exit_code=3)
        self.partial = partial


class ConsistencyError(UnifiedMomentumError):
    """数值上违背了算法前提（如 α_k 离开 (0,1)）"""

    def __init__(self, message: str):
        super().__init__(message, error_type="consistency_error")


class UnsupportedDiagnosticError(UnifiedMomentumError):
    """缺少极小点等信息，无法计算能量或界"""

    def __init__(self, message: str):
        super().__init__(message, error_type="unsupported_diagnostic")


class CapabilityError(UnifiedMomentumError):
    """目标函数缺少所需的高阶导数"""

    def __init__(self, message: str):
        super().__init__(message, error_type="capability_error")


class SubsolverError(UnifiedMomentumError):
    """子问题求解失败（无法括住根）"""

    def __init__(self, message: str):
        super().__init__(message, error_type="subsolver_error")


class ToleranceNotReachedError(UnifiedMomentumError):
    """在允许范围内未达到精度，best 为当前最好估计"""

    def __init__(self, message: str, best: Optional[float] = None):
        super().__init__(message, error_type="tolerance_not_reached")
        self.best = best
