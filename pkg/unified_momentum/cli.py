"""命令行入口：run / verify / kernel / matrix"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .errors import ConfigError, DivergenceError, UnifiedMomentumError
from .experiments import load_experiment_config, run_experiment
from .kernels import KernelId, matrix_by_origin, kernel_closed_form, write_kernel_grid
from .settings import get_settings
from .verify import InvariantVerifier

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1


def _configure_logging() -> None:
    logging.basicConfig(level=getattr(logging, get_settings().log_level, logging.INFO),
                        format='%(asctime)s - %(levelname)s - %(message)s')


def cmd_run(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    outcome = run_experiment(config, output_dir=args.output_dir)
    print(json.dumps({"output_dir": str(outcome.output_dir), "passed": outcome.passed}, ensure_ascii=False))
    return EXIT_OK if outcome.passed else EXIT_FAILED


def cmd_verify(args: argparse.Namespace) -> int:
    verifier = InvariantVerifier(reports_dir=args.reports_dir)
    report = verifier.run(args.suite)
    path = verifier.save_report(report)
    if report["failures"]:
        for name in report["failures"]:
            logger.error(f"未通过: {name}")
    print(json.dumps({"report": str(path), "passed": report["passed"], "failures": report["failures"]},
                     ensure_ascii=False))
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_kernel(args: argparse.Namespace) -> int:
    if args.id == KernelId.FROM_BC.value:
        raise ConfigError("FROM_BC 核没有命令行形式，请在代码中用 kernel_from_bc 构造")
    kernel = kernel_closed_form(args.id, mu=args.mu, T=args.T)
    path = write_kernel_grid(kernel, args.T, args.grid, args.out)
    logger.info(f"微分核网格已写出: {path}")
    return EXIT_OK


def cmd_matrix(args: argparse.Namespace) -> int:
    matrix = matrix_by_origin(args.origin, args.N, mu=args.mu, s=args.s)
    path = matrix.write(args.out)
    logger.info(f"差分矩阵已写出: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unified-momentum", description="统一 Nesterov 加速框架的实验与校验工具")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="按 JSON 配置运行实验")
    run.add_argument("config", type=Path, help="实验配置文件")
    run.add_argument("--output-dir", type=Path, default=None, help="覆盖配置中的输出目录")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="运行性质校验套件")
    verify.add_argument("suite", help="hyperbolic | discrete | tensor | dynamics | kernels | all")
    verify.add_argument("--reports-dir", type=Path, default=None, help="报告目录（缺省取 UM_REPORTS_DIR）")
    verify.set_defaults(func=cmd_verify)

    kernel = sub.add_parser("kernel", help="输出微分核网格 CSV")
    kernel.add_argument("--id", required=True, choices=[k.value for k in KernelId], help="核标识")
    kernel.add_argument("--grid", type=int, required=True, help="每个方向的网格点数")
    kernel.add_argument("--out", type=Path, required=True, help="输出 CSV")
    kernel.add_argument("--mu", type=float, default=0.0)
    kernel.add_argument("--T", type=float, default=10.0, help="网格区间 (0, T)，也是 OGM_G / UNIFIED_NAG_G 的终止时刻")
    kernel.set_defaults(func=cmd_kernel)

    matrix = sub.add_parser("matrix", help="输出差分矩阵 CSV")
    matrix.add_argument("--origin", required=True, choices=["OGM", "OGM_G", "NAG_C", "NAG_SC"])
    matrix.add_argument("--N", type=int, required=True, help="矩阵阶数")
    matrix.add_argument("--out", type=Path, required=True, help="输出 CSV")
    matrix.add_argument("--mu", type=float, default=0.0)
    matrix.add_argument("--s", type=float, default=1.0)
    matrix.set_defaults(func=cmd_matrix)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """执行命令并返回退出码：0 通过，1 检查失败，2 配置或参数错误，3 发散。"""
    args = build_parser().parse_args(argv)
    _configure_logging()
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"配置错误: {e.message}")
        for item in e.details or []:
            print(json.dumps(item, ensure_ascii=False, default=str), file=sys.stderr)
        return e.exit_code
    except DivergenceError as e:
        logger.error(f"发散: {e.message}")
        return e.exit_code
    except UnifiedMomentumError as e:
        logger.error(f"{e.error_type}: {e.message}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
