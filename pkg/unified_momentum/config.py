"""路径与配置加载工具。

负责：
- 定义工程路径（根、配置、数据、运行输出、报告）
- 确保上述数据目录存在
- 加载数值默认配置（YAML）
"""

from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

import yaml

BASE_DIR = Path(__file__).resolve().parent.parent
CONFIG_DIR = BASE_DIR / "config"
DATA_DIR = BASE_DIR / "data"
RUNS_DIR = DATA_DIR / "runs"
REPORTS_DIR = DATA_DIR / "reports"

# 确保数据相关目录存在
for p in (DATA_DIR, RUNS_DIR, REPORTS_DIR):
    p.mkdir(parents=True, exist_ok=True)


@lru_cache(maxsize=1)
def load_app_config() -> Dict[str, Any]:
    """加载数值配置 `config/app.yaml`。"""
    with open(CONFIG_DIR / "app.yaml", "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def section(name: str) -> Dict[str, Any]:
    """取配置中的一个分节，缺失时返回空字典。"""
    return dict(load_app_config().get(name) or {})
