import sys
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Tuple

import click

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
REGIMES = ['light', 'moderate', 'polynomial']

# 解析错误按输入错误退出
EXIT_USAGE = 2


class BaseCLIParser(ABC):
    # flag -> (args 键, 取值类型)；类型为 None 表示开关
    OPTIONS: Dict[str, Tuple[str, Any]] = {
        '--model': ('model', str),
        '--out': ('out', str),
        '--csv': ('csv', str),
        '--log-level': ('log_level', str),
    }

    @abstractmethod
    def parse_args(self, argv: Optional[List[str]] = None) -> Tuple[str, Dict[str, Any]]:
        """Parse command line arguments into (task, args)"""
        pass

    @staticmethod
    def fail(message: str):
        click.echo(f"错误: {message}", err=True)
        sys.exit(EXIT_USAGE)

    def validate_choice(self, value: str, choices: List[str], param_name: str) -> bool:
        """Validate that a value is in a list of choices"""
        if value not in choices:
            click.echo(f"错误: {param_name} 的值必须是 {', '.join(choices)}", err=True)
            return False
        return True

    def validate_int_range(self, value: int, param_name: str,
                           min_val: Optional[int] = None,
                           max_val: Optional[int] = None) -> bool:
        """Validate that an integer is within a range"""
        if min_val is not None and value < min_val:
            click.echo(f"错误: {param_name} 必须 >= {min_val}", err=True)
            return False
        if max_val is not None and value > max_val:
            click.echo(f"错误: {param_name} 必须 <= {max_val}", err=True)
            return False
        return True

    def parse_options(self, argv: List[str], show_help) -> Dict[str, Any]:
        """逐个解析 --flag value 形式的选项"""
        args: Dict[str, Any] = {}
        i = 0
        while i < len(argv):
            arg = argv[i]
            if arg in ['-h', '--help']:
                show_help()
                sys.exit(0)
            if arg not in self.OPTIONS:
                self.fail(f"未知的参数 '{arg}'")
            key, kind = self.OPTIONS[arg]
            if kind is None:
                args[key] = True
                i += 1
                continue
            if i + 1 >= len(argv):
                self.fail(f"{arg} 需要一个值")
            raw = argv[i + 1]
            try:
                value = kind(raw)
            except ValueError:
                self.fail(f"{arg} 的值无效: {raw}")
            if key == 'log_level' and not self.validate_choice(value, LOG_LEVELS, arg):
                sys.exit(EXIT_USAGE)
            if key == 'regime' and not self.validate_choice(value, REGIMES, arg):
                sys.exit(EXIT_USAGE)
            if key == 'seed' and not self.validate_int_range(value, arg, 0, 2 ** 64 - 1):
                sys.exit(EXIT_USAGE)
            if key == 'reps' and not self.validate_int_range(value, arg, 100):
                sys.exit(EXIT_USAGE)
            if key == 'tol' and not value > 0:
                self.fail(f"{arg} 必须为正数")
            args[key] = value
            i += 2
        if not args.get('model'):
            self.fail("缺少 --model 参数")
        return args
