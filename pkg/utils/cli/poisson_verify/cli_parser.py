#!/usr/bin/env python3
"""
poisson_verify.py 命令行参数解析器
"""

import sys
from typing import Any, Dict, List, Optional, Tuple

import click

from utils.cli.base import BaseCLIParser


def _u64(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError(text)
    return value


class CLIParser(BaseCLIParser):
    """经验验证套件参数解析器"""

    OPTIONS = {
        **BaseCLIParser.OPTIONS,
        '--seed': ('seed', _u64),
        '--reps': ('reps', int),
        '--grid': ('grid', str),
        '--tol': ('tol', float),
        '--regime': ('regime', str),
        '--auto': ('auto', None),
    }

    def parse_args(self, argv: Optional[List[str]] = None) -> Tuple[str, Dict[str, Any]]:
        """
        解析命令行参数
        返回: ("verify", args)
        """
        argv = sys.argv[1:] if argv is None else list(argv)
        if not argv:
            CLIParser._show_help()
            sys.exit(0)
        args = self.parse_options(argv, CLIParser._show_help)
        if "seed" not in args:
            self.fail("缺少 --seed 参数（模型文件中的 seed 不作为默认值）")
        return "verify", args

    @staticmethod
    def _show_help():
        """显示帮助信息"""
        click.echo("""
用法: poisson_verify.py --model PATH --seed U64 [选项]

用再生模拟检验上界: h 上界、回访概率见证、占用时间不等式与 WCL 距离界。
每项检查的裕量 = 上界 - |估计| - 3·SE，全部非负时判定通过。

选项:
  --model PATH        模型文件（YAML，必需）
  --seed U64          随机种子（必需）
  --reps N            每个状态的复制次数（默认取配置 simulation.default_reps，至少 100）
  --grid a:b:step     状态网格（默认取配置 verify.default_grid）
  --tol FLOAT         WCL 距离界的误差容限
  --regime R          漂移区间 (light, moderate, polynomial)
  --auto              自动搜索证书参数
  --out PATH          报告输出路径（默认标准输出）
  --csv PATH          上界与估计曲线 CSV
  --log-level LEVEL   日志级别 (DEBUG, INFO, WARNING, ERROR, CRITICAL)
  -h, --help          显示帮助信息

退出码:
  0 全部通过, 2 输入错误, 3 不可行, 4 验证失败

示例:
  poisson_verify.py --model model_files/mm1_light.yaml --seed 20250601 --reps 100000
  poisson_verify.py --model model_files/map2_exp.yaml --seed 7 --csv verify.csv
""")
