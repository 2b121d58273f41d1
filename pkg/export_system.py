"""
结果导出系统
汇总曲线与包络的 CSV/JSON 输出与读回，以及模拟点模式、网络和距离矩阵的输出
"""

import json
import os
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

from core_data_structures import LinearNetwork, SummaryCurve
from envelope_system import EnvelopeResult
from exceptions import EmptyCurve, ExportError, IoError
from patterns import MarkedPattern


Curve = Union[SummaryCurve, EnvelopeResult]

CURVE_COLUMNS = ["r", "value", "theo"]
ENVELOPE_COLUMNS = ["lo", "hi", "mean"]


def _float_format(digits: int) -> str:
    return f"%.{digits}g"


def _json_value(value: Any) -> Any:
    """NaN/inf 写成 null，numpy 标量与数组转为内置类型"""
    if isinstance(value, np.ndarray):
        return [_json_value(item) for item in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_json_value(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _json_value(item) for key, item in value.items()}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def curve_frame(curve: Curve) -> pd.DataFrame:
    """曲线转为 r,value,theo[,lo,hi,mean] 表"""
    if len(curve.r) == 0:
        raise EmptyCurve(f"曲线 {curve.label!r} 的距离网格为空")
    if isinstance(curve, EnvelopeResult):
        return pd.DataFrame({"r": curve.r, "value": curve.observed, "theo": curve.theo,
                             "lo": curve.lo, "hi": curve.hi, "mean": curve.mean},
                            columns=CURVE_COLUMNS + ENVELOPE_COLUMNS)
    return pd.DataFrame({"r": curve.r, "value": curve.values, "theo": curve.theo},
                        columns=CURVE_COLUMNS)


def curve_document(curve: Curve) -> Dict[str, Any]:
    """曲线转为 JSON 对象，字段与 CSV 列一致"""
    if len(curve.r) == 0:
        raise EmptyCurve(f"曲线 {curve.label!r} 的距离网格为空")
    document: Dict[str, Any] = {"label": curve.label, "r": curve.r, "theo": curve.theo,
                                "metadata": curve.metadata}
    if isinstance(curve, EnvelopeResult):
        document.update(kind="envelope", value=curve.observed, lo=curve.lo, hi=curve.hi,
                        mean=curve.mean, n_sim=curve.n_sim, rank=curve.rank,
                        exceed_fraction=curve.exceed_fraction)
    else:
        document.update(kind="curve", value=curve.values)
        if curve.n_pairs is not None:
            document["n_pairs"] = curve.n_pairs
    return _json_value(document)


class BaseExporter(ABC):
    """导出器基类"""

    extension = ""

    def __init__(self, float_digits: int = 17):
        self.float_digits = float_digits

    @abstractmethod
    def export(self, curve: Curve, filename: str) -> None:
        pass


class CSVExporter(BaseExporter):
    """CSV：缺失值写为空单元格，浮点数保留 17 位有效数字"""

    extension = "csv"

    def export(self, curve: Curve, filename: str) -> None:
        frame = curve_frame(curve)
        try:
            frame.to_csv(filename, index=False, na_rep="",
                         float_format=_float_format(self.float_digits), lineterminator="\n")
        except OSError as error:
            raise IoError(f"无法写入 {filename}: {error}")


class JSONExporter(BaseExporter):
    """JSON：缺失值写为 null，键排序保证输出确定"""

    extension = "json"

    def export(self, curve: Curve, filename: str) -> None:
        document = curve_document(curve)
        try:
            with open(filename, "w", encoding="utf-8") as f:
                json.dump(document, f, indent=2, ensure_ascii=False, sort_keys=True,
                          allow_nan=False)
                f.write("\n")
        except OSError as error:
            raise IoError(f"无法写入 {filename}: {error}")


class ExportManager:
    """导出管理器：按格式名分派导出器"""

    def __init__(self, float_digits: int = 17):
        self.exporters: Dict[str, BaseExporter] = {
            "csv": CSVExporter(float_digits),
            "json": JSONExporter(float_digits),
        }

    def get_available_formats(self) -> List[str]:
        return list(self.exporters.keys())

    def export(self, curve: Curve, filename: str, format_type: str = "csv") -> None:
        exporter = self.exporters.get(format_type.lower())
        if exporter is None:
            raise ExportError(f"不支持的导出格式: {format_type}")
        exporter.export(curve, filename)
        logger.debug(f"已写出 {curve.label or '曲线'} → {filename}")

    def export_multiple(self, curves: Dict[str, Curve], output_dir: str,
                        format_type: str = "csv") -> List[str]:
        """按名称批量导出到目录，返回按名称排序的文件路径"""
        try:
            os.makedirs(output_dir, exist_ok=True)
        except OSError as error:
            raise IoError(f"无法创建输出目录 {output_dir}: {error}")
        extension = self.exporters[format_type.lower()].extension
        paths = []
        for name in sorted(curves):
            path = os.path.join(output_dir, f"{name}.{extension}")
            self.export(curves[name], path, format_type)
            paths.append(path)
        return paths


def write_curve(curve: Curve, path: str, format_type: Optional[str] = None,
                float_digits: int = 17) -> None:
    """写出曲线或包络；未给格式时按扩展名判断"""
    if format_type is None:
        format_type = "json" if str(path).lower().endswith(".json") else "csv"
    ExportManager(float_digits).export(curve, path, format_type)


def _array(values) -> np.ndarray:
    return np.array([np.nan if value is None else value for value in values], dtype=float)


def read_curve(path: str) -> Curve:
    """
    读回 write_curve 的输出

    含 lo/hi/mean 列的文件读为 EnvelopeResult；CSV 不保存 n_sim 与 rank，读回后为 0
    """
    try:
        if str(path).lower().endswith(".json"):
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
            return _curve_from_document(document)
        frame = pd.read_csv(path, float_precision="round_trip")
    except OSError as error:
        raise IoError(f"无法读取 {path}: {error}")

    missing = [column for column in CURVE_COLUMNS if column not in frame.columns]
    if missing:
        raise ExportError(f"{path} 缺少列: {missing}")
    if frame.empty:
        raise EmptyCurve(f"{path} 中没有数据行")
    columns = {name: frame[name].to_numpy(dtype=float) for name in frame.columns}
    label = os.path.splitext(os.path.basename(path))[0]
    if all(name in columns for name in ENVELOPE_COLUMNS):
        return _envelope(columns["r"], columns["value"], columns["theo"], columns["lo"],
                         columns["hi"], columns["mean"], label)
    return SummaryCurve(r=columns["r"], values=columns["value"], theo=columns["theo"], label=label)


def _envelope(r, observed, theo, lo, hi, mean, label, n_sim=0, rank=0,
              exceed_fraction=None, metadata=None) -> EnvelopeResult:
    valid = np.isfinite(lo) & np.isfinite(hi)
    result = EnvelopeResult(r=r, observed=observed, lo=lo, hi=hi, mean=mean, theo=theo,
                            n_sim=n_sim, rank=rank, exceed_fraction=0.0, label=label,
                            valid=valid, metadata=dict(metadata or {}))
    if exceed_fraction is not None:
        result.exceed_fraction = float(exceed_fraction)
    else:
        evaluable = valid & np.isfinite(observed)
        if evaluable.any():
            result.exceed_fraction = float(result.outside()[evaluable].mean())
    return result


def _curve_from_document(document: Dict[str, Any]) -> Curve:
    if not document.get("r"):
        raise EmptyCurve("JSON 曲线的距离网格为空")
    r, theo, value = _array(document["r"]), _array(document["theo"]), _array(document["value"])
    label = document.get("label", "")
    if document.get("kind") == "envelope":
        return _envelope(r, value, theo, _array(document["lo"]), _array(document["hi"]),
                         _array(document["mean"]), label, int(document.get("n_sim", 0)),
                         int(document.get("rank", 0)), document.get("exceed_fraction"),
                         document.get("metadata"))
    n_pairs = document.get("n_pairs")
    return SummaryCurve(r=r, values=value, theo=theo, label=label,
                        n_pairs=None if n_pairs is None else np.asarray(n_pairs),
                        metadata=document.get("metadata") or {})


def pattern_frame(pattern: MarkedPattern) -> pd.DataFrame:
    """点模式转为 x,y[,type][,mark1[,mark2]][,segment,offset] 表"""
    data: Dict[str, Any] = {"x": pattern.coords[:, 0], "y": pattern.coords[:, 1]}
    if pattern.types is not None:
        data["type"] = [pattern.type_labels[t - 1] for t in pattern.types]
    if pattern.marks is not None:
        marks = pattern.marks.reshape(pattern.n, -1)
        for column in range(marks.shape[1]):
            data[f"mark{column + 1}"] = marks[:, column]
    if pattern.is_network:
        data["segment"] = pattern.segments
        data["offset"] = pattern.offsets
    return pd.DataFrame(data)


def write_pattern(pattern: MarkedPattern, path: str, float_digits: int = 17) -> None:
    try:
        pattern_frame(pattern).to_csv(path, index=False, float_format=_float_format(float_digits),
                                      lineterminator="\n")
    except OSError as error:
        raise IoError(f"无法写入 {path}: {error}")


def write_network(network: LinearNetwork, path: str, float_digits: int = 17) -> None:
    """网络写为每行一条线段的 x1,y1,x2,y2 表"""
    start = network.vertices[network.segments[:, 0]]
    end = network.vertices[network.segments[:, 1]]
    frame = pd.DataFrame({"x1": start[:, 0], "y1": start[:, 1], "x2": end[:, 0], "y2": end[:, 1]})
    try:
        frame.to_csv(path, index=False, float_format=_float_format(float_digits), lineterminator="\n")
    except OSError as error:
        raise IoError(f"无法写入 {path}: {error}")


def write_matrix(matrix: np.ndarray, path: str, prefix: str = "site", float_digits: int = 17) -> None:
    """方阵写为带行列名的 CSV，inf 写为空单元格"""
    matrix = np.asarray(matrix, dtype=float)
    names = [f"{prefix}{k}" for k in range(matrix.shape[1])]
    frame = pd.DataFrame(np.where(np.isfinite(matrix), matrix, np.nan), columns=names)
    frame.insert(0, prefix, list(range(matrix.shape[0])))
    try:
        frame.to_csv(path, index=False, na_rep="", float_format=_float_format(float_digits),
                     lineterminator="\n")
    except OSError as error:
        raise IoError(f"无法写入 {path}: {error}")
