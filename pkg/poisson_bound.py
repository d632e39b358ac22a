#!/usr/bin/env python3
"""
Poisson 方程偏差上界工具
  poisson_bound.py bound --model PATH [...]
  poisson_bound.py wcl_distance --model PATH [...]
"""

from poisson_bound.app import PoissonBoundApp

if __name__ == "__main__":
    # 从命令行参数创建实例并执行
    PoissonBoundApp.from_cli_args()
