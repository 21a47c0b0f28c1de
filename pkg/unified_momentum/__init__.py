"""统一 Nesterov 加速梯度框架：离散格式、连续时间模型、张量方法与微分核"""

from .errors import (
    CapabilityError,
    ConfigError,
    ConsistencyError,
    DivergenceError,
    DomainError,
    InvalidOrderError,
    StepsizeTooLargeError,
    SubsolverError,
    ToleranceNotReachedError,
    UnifiedMomentumError,
    UnsupportedDiagnosticError,
)

__version__ = "0.1.0"
