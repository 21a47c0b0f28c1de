"""运行时配置模块 - 使用Pydantic从环境变量（前缀 UM_）读取并校验"""

import os
from pathlib import Path

try:
    from pydantic.v1 import BaseSettings, Field, validator
except ImportError:
    from pydantic import BaseSettings, Field, validator

from .config import REPORTS_DIR, RUNS_DIR


class AppSettings(BaseSettings):
    """应用配置类"""

    # 并行配置
    threads: int = Field(default=os.cpu_count() or 1, description="并行执行的最大工作线程数")

    # 日志配置
    log_level: str = Field(default="INFO", description="日志级别")

    # 路径配置
    output_dir: Path = Field(default=RUNS_DIR, description="实验输出目录")
    reports_dir: Path = Field(default=REPORTS_DIR, description="校验报告目录")

    @validator("threads")
    def validate_threads(cls, v):
        """验证线程数"""
        if v < 1:
            raise ValueError("线程数必须至少为1")
        return v

    @validator("log_level")
    def validate_log_level(cls, v):
        """验证日志级别"""
        level = str(v).upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"未知日志级别: {v}")
        return level

    @validator("output_dir", "reports_dir")
    def validate_paths(cls, v):
        """验证路径配置"""
        if isinstance(v, str):
            v = Path(v)
        return v

    class Config:
        env_prefix = "UM_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False


# 全局配置实例
settings = AppSettings()


def get_settings() -> AppSettings:
    """获取应用配置"""
    return settings


def reload_settings() -> AppSettings:
    """重新加载配置（测试中修改环境变量后使用）"""
    global settings
    settings = AppSettings()
    return settings
