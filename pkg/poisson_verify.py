#!/usr/bin/env python3
"""
再生模拟验证套件
  poisson_verify.py --model PATH --seed U64 [...]
"""

from poisson_bound.app import PoissonBoundApp

if __name__ == "__main__":
    PoissonBoundApp.from_cli_args()
