"""
异常定义模块
linmark 所有模块共用的异常层次
"""

from typing import Optional


class LinmarkError(Exception):
    """linmark 异常基类"""


# ---- 网络几何 ----

class NetworkValidationError(LinmarkError):
    """线性网络校验失败"""


class EmptyNetwork(NetworkValidationError):
    """顶点或线段为空"""


class DuplicateVertex(NetworkValidationError):
    """存在重合顶点"""


class DanglingIndex(NetworkValidationError):
    """线段引用了不存在的顶点"""


class ZeroLengthSegment(NetworkValidationError):
    """线段长度为零"""


class NonPositiveSpacing(LinmarkError):
    """网格间距必须为正"""


class NonPositiveRadius(LinmarkError):
    """半径必须为正"""


class NoBorder(LinmarkError):
    """网络没有度为1的端点"""


# ---- 点模式 ----

class PatternError(LinmarkError):
    """点模式相关错误"""


class NoTypes(PatternError):
    """点模式没有类型标签"""


class NoMarks(PatternError):
    """点模式没有实数标记"""


class TooFewPoints(PatternError):
    """点数不足"""


class EmptyComponent(PatternError):
    """指定类型的子模式为空"""


class SingleType(PatternError):
    """只有一种类型，混合常数为零"""


class InvalidMarks(PatternError):
    """标记取值不满足检验函数要求"""


# ---- 估计 ----

class EstimationError(LinmarkError):
    """估计过程错误"""


class UnsortedGrid(EstimationError):
    """距离网格必须严格递增且非负"""


class NonPositiveBandwidth(EstimationError):
    """带宽必须为正"""


class ZeroNormalizer(EstimationError):
    """检验函数的归一化常数为零"""


class UnsupportedCorrection(EstimationError):
    """边缘校正方式不适用于当前窗口"""


class MissingSuppliedValues(EstimationError):
    """supplied 模式下缺少强度值"""


# ---- 包络 ----

class EnvelopeError(LinmarkError):
    """包络计算错误"""


class InvalidRank(EnvelopeError):
    """秩与模拟次数不匹配"""


class GridMismatch(EnvelopeError):
    """模拟曲线与观测曲线的距离网格不一致"""


class SimulationFailure(EnvelopeError):
    """某次模拟失败"""

    def __init__(self, replicate: int, cause: Exception):
        super().__init__(f"第 {replicate} 次模拟失败: {cause}")
        self.replicate = replicate
        self.cause = cause


class GenerationFailed(LinmarkError):
    """网络生成在有限次重试后失败"""


# ---- 输入输出 ----

class IngestError(LinmarkError):
    """文件读取错误"""


class ParseError(IngestError):
    """文件解析错误"""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"第 {line} 行: {message}"
        super().__init__(message)
        self.line = line


class MissingColumn(IngestError):
    """缺少必需列"""


class ValidationError(IngestError):
    """读取的数据未通过校验"""


class ExportError(LinmarkError):
    """导出错误"""


class IoError(ExportError):
    """文件写入失败"""


class EmptyCurve(ExportError):
    """曲线没有距离网格"""


class ConfigError(LinmarkError):
    """配置错误"""
