"""
Description: This module provides a common result class for verdict-style operations.

Changelog:
- 2025-03-10: Initial creation.
- 2025-05-12: Added error_code so failed verdicts map to CLI exit codes.
"""

from typing import Optional, Dict, Any


class Result:
    """通用结果类，用于统一判定类操作的返回格式"""

    def __init__(self, success: bool, data: Optional[Dict[str, Any]] = None,
                 error: Optional[str] = None, error_code: Optional[str] = None):
        """初始化结果对象

        Args:
            success: 是否成功
            data: 结果数据
            error: 错误信息
            error_code: 错误代码（错误类名）
        """
        self.success = success
        self.data = data or {}
        self.error = error
        self.error_code = error_code

    def __bool__(self) -> bool:
        return self.success

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式

        Returns:
            Dict[str, Any]: 包含 success、data 和 error 的字典
        """
        out = {
            "success": self.success,
            "data": self.data,
            "error": self.error,
        }
        if self.error_code:
            out["error_code"] = self.error_code
        return out

    @classmethod
    def success(cls, data: Optional[Dict[str, Any]] = None) -> 'Result':
        """创建成功结果"""
        return cls(success=True, data=data)

    @classmethod
    def error(cls, data: Optional[Dict[str, Any]] = None, error: str = None,
              error_code: Optional[str] = None) -> 'Result':
        """创建错误结果"""
        return cls(success=False, data=data, error=error, error_code=error_code)
