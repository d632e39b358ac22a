#!/usr/bin/env python3
"""
poisson_bound.py 命令行参数解析器
"""

import sys
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import click

from utils.cli.base import BaseCLIParser


class TaskType(str, Enum):
    BOUND = "bound"
    WCL_DISTANCE = "wcl_distance"


class CLIParser(BaseCLIParser):
    """偏差上界 / WCL 距离界参数解析器"""

    OPTIONS = {
        **BaseCLIParser.OPTIONS,
        '--grid': ('grid', str),
        '--tol': ('tol', float),
        '--regime': ('regime', str),
        '--auto': ('auto', None),
    }

    def parse_args(self, argv: Optional[List[str]] = None) -> Tuple[str, Dict[str, Any]]:
        """
        解析命令行参数
        返回: (task, args)
        """
        argv = sys.argv[1:] if argv is None else list(argv)
        if not argv or argv[0] in ['-h', '--help']:
            CLIParser._show_help()
            sys.exit(0)

        task = argv[0]
        if task not in [t.value for t in TaskType]:
            self.fail(f"无效的任务类型 '{task}'，可用: {', '.join(t.value for t in TaskType)}")

        args = self.parse_options(argv[1:], lambda: CLIParser._show_task_help(task))
        if task == TaskType.BOUND.value and 'tol' in args:
            self.fail("--tol 只适用于 wcl_distance")
        if task == TaskType.WCL_DISTANCE.value and 'grid' in args:
            self.fail("--grid 只适用于 bound")
        return task, args

    @staticmethod
    def _show_help():
        """显示主帮助信息"""
        click.echo("""
用法: poisson_bound.py <task> --model PATH [选项]

Poisson 方程偏差上界工具

任务:
  bound          构造漂移证书并输出 |h^(g)| 的显式上界曲线
  wcl_distance   计算有限容量 M/GI/1-WCL 与无限队列平稳分布之间的距离上界

选项:
  --model PATH        模型文件（YAML，必需）
  --out PATH          报告输出路径（默认标准输出）
  --csv PATH          曲线 / 级数分项 CSV 输出路径
  --regime R          漂移区间 (light, moderate, polynomial)，覆盖模型文件
  --auto              自动搜索证书参数
  --grid a:b:step     bound 的状态网格（默认取配置 verify.default_grid）
  --tol FLOAT         wcl_distance 的误差容限（默认取配置 wcl.default_tol）
  --log-level LEVEL   日志级别 (DEBUG, INFO, WARNING, ERROR, CRITICAL)
  -h, --help          显示帮助信息

退出码:
  0 成功, 2 输入错误, 3 不可行, 4 验证失败

示例:
  poisson_bound.py bound --model model_files/mm1_light.yaml
  poisson_bound.py bound --model model_files/mg1_weibull.yaml --auto --csv curve.csv
  poisson_bound.py wcl_distance --model model_files/mm1_wcl_10.yaml --tol 1e-4
""")

    @staticmethod
    def _show_task_help(task: str):
        """显示特定任务的帮助信息"""
        task_helps = {
            TaskType.BOUND.value: """
用法: poisson_bound.py bound --model PATH [--out PATH] [--csv PATH] [--grid a:b:step]
                             [--regime R] [--auto] [--log-level LEVEL]

输出证书参数、见证 (T, ξ_T)、前因子与加性项，以及网格上的上界曲线。

示例:
  poisson_bound.py bound --model model_files/map2_exp.yaml --grid 0:5:0.25
""",
            TaskType.WCL_DISTANCE.value: """
用法: poisson_bound.py wcl_distance --model PATH [--out PATH] [--csv PATH] [--tol FLOAT]
                                    [--regime R] [--auto] [--log-level LEVEL]

输出距离上界、截断项数 m_used 以及截断误差与求积误差；--csv 写出级数分项。

示例:
  poisson_bound.py wcl_distance --model model_files/mm1_wcl_5.yaml --tol 1e-3
""",
        }
        click.echo(task_helps.get(task, "未知的任务类型"))
