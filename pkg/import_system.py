"""
数据导入系统
点模式 CSV（x,y[,type][,mark1][,mark2]）与网络（线段 CSV 或 GeoJSON LineString）的读取与校验
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from shapely.geometry import shape

from core_data_structures import (
    RELATIVE_TOLERANCE, LinearNetwork, Window, build_network, snap_points
)
from exceptions import (
    MissingColumn, NetworkValidationError, ParseError, PatternError, ValidationError
)
from patterns import MarkedPattern, network_pattern, planar_pattern


MARK_ALIASES = {"mark": "mark1"}
SEGMENT_COLUMNS = ["x1", "y1", "x2", "y2"]


def _read_table(path: Union[str, Path]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise ParseError(f"文件不存在: {path}")
    except pd.errors.EmptyDataError:
        raise ParseError(f"文件为空: {path}", line=1)
    except pd.errors.ParserError as error:
        raise ParseError(f"无法解析 {path}: {error}")
    frame.columns = [str(column).strip().lower() for column in frame.columns]
    return frame.rename(columns=MARK_ALIASES)


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    """转换为浮点列；第一处非数值或缺失值报告文件行号（表头为第 1 行）"""
    text = frame[column].str.strip()
    values = pd.to_numeric(text, errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0])
        raise ParseError(f"列 {column} 的值 {frame[column].iloc[row]!r} 不是有限数值", line=row + 2)
    return values


def read_pattern_csv(path: Union[str, Path], network: Optional[LinearNetwork] = None,
                     window: Optional[Union[Window, Sequence[float]]] = None) -> MarkedPattern:
    """
    读取点模式

    类型标签按字典序映射为 1..k；完全重复的行只保留一条；行按坐标、类型、标记排序，
    结果与文件中的行序无关。给出网络时点被吸附到网络上，吸附位移记录在 metadata 中
    """
    frame = _read_table(path)
    for column in ("x", "y"):
        if column not in frame.columns:
            raise MissingColumn(f"{path} 缺少必需列 {column}")
    extra = sorted(set(frame.columns) - {"x", "y", "type", "mark1", "mark2"})
    if extra:
        logger.debug(f"忽略未识别的列: {extra}")
    if "mark2" in frame.columns and "mark1" not in frame.columns:
        raise MissingColumn(f"{path} 有 mark2 列但缺少 mark1 列")

    data: Dict[str, Any] = {"x": _numeric(frame, "x"), "y": _numeric(frame, "y")}
    if "type" in frame.columns:
        labels = frame["type"].str.strip()
        empty = np.flatnonzero(labels.to_numpy() == "")
        if empty.size:
            raise ParseError("类型标签不能为空", line=int(empty[0]) + 2)
        data["type"] = labels.to_numpy(dtype=str)
    mark_columns = [column for column in ("mark1", "mark2") if column in frame.columns]
    for column in mark_columns:
        data[column] = _numeric(frame, column)

    table = pd.DataFrame(data)
    total = len(table)
    table = table.drop_duplicates(ignore_index=True)
    dropped = total - len(table)
    if dropped:
        logger.warning(f"{path}: 删除了 {dropped} 条完全重复的记录")
    table = table.sort_values(list(table.columns), kind="mergesort", ignore_index=True)

    coords = table[["x", "y"]].to_numpy(dtype=float)
    types, type_labels, mapping = None, None, {}
    if "type" in table.columns:
        type_labels = sorted(set(table["type"]))
        mapping = {label: k + 1 for k, label in enumerate(type_labels)}
        types = table["type"].map(mapping).to_numpy(dtype=np.int64)
        logger.info(f"类型映射: {mapping}")
    marks = None
    if mark_columns:
        marks = table[mark_columns].to_numpy(dtype=float)
        if marks.shape[1] == 1:
            marks = marks[:, 0]

    metadata: Dict[str, Any] = {"source": str(path), "rows": total, "dropped_duplicates": dropped,
                                "type_mapping": mapping}
    try:
        if network is not None:
            segments, offsets, displacement = snap_points(coords, network)
            metadata["snap_displacement"] = displacement
            if displacement.size and displacement.max() > network.tolerance():
                logger.warning(f"{path}: 吸附到网络的最大位移为 {displacement.max():.6g}")
            return network_pattern(network, segments, offsets, types=types, marks=marks,
                                   type_labels=type_labels, metadata=metadata)
        if window is not None and not isinstance(window, Window):
            window = Window.rectangle(*window)
        return planar_pattern(coords, window, types=types, marks=marks, type_labels=type_labels,
                              metadata=metadata)
    except PatternError as error:
        raise ValidationError(f"{path}: {error}") from error


def _linestrings_from_geojson(path: Union[str, Path]) -> List[np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ParseError(f"文件不存在: {path}")
    except json.JSONDecodeError as error:
        raise ParseError(f"GeoJSON 格式错误: {error.msg}", line=error.lineno)

    if document.get("type") == "FeatureCollection":
        geometries = [feature.get("geometry") for feature in document.get("features", [])]
    elif document.get("type") == "Feature":
        geometries = [document.get("geometry")]
    else:
        geometries = [document]

    lines = []
    for index, geometry in enumerate(geometries):
        if geometry is None:
            raise ParseError(f"第 {index} 个要素没有几何对象")
        try:
            parsed = shape(geometry)
        except (ValueError, TypeError, AttributeError, KeyError) as error:
            raise ParseError(f"第 {index} 个要素的几何对象无效: {error}")
        if parsed.geom_type == "LineString":
            parts = [parsed]
        elif parsed.geom_type == "MultiLineString":
            parts = list(parsed.geoms)
        else:
            raise ParseError(f"第 {index} 个要素是 {parsed.geom_type}，只支持 LineString")
        lines.extend(np.asarray(part.coords, dtype=float)[:, :2] for part in parts)
    return lines


def _segments_from_csv(path: Union[str, Path]) -> np.ndarray:
    frame = _read_table(path)
    missing = [column for column in SEGMENT_COLUMNS if column not in frame.columns]
    if missing:
        raise MissingColumn(f"{path} 缺少列 {missing}")
    return np.column_stack([_numeric(frame, column) for column in SEGMENT_COLUMNS])


def merge_endpoints(starts: np.ndarray, ends: np.ndarray,
                    tolerance: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    在容差内合并线段端点，返回 (顶点, 线段)

    合并后两端相同的线段与重复线段被删除；顶点按首次出现的顺序编号
    """
    points = np.concatenate([starts, ends])
    n_segments = len(starts)
    if tolerance is None:
        diagonal = float(np.hypot(*(points.max(axis=0) - points.min(axis=0))))
        tolerance = RELATIVE_TOLERANCE * max(diagonal, 1.0)

    order = np.empty(len(points), dtype=np.int64)
    order[0::2] = np.arange(n_segments)
    order[1::2] = np.arange(n_segments) + n_segments
    points_in_order = points[order]

    pairs = cKDTree(points_in_order).query_pairs(tolerance, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                       shape=(len(points), len(points)))
    _, labels = connected_components(graph, directed=False)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    vertex_of = rank[inverse]
    vertices = points_in_order[np.sort(first)]

    segments = vertex_of.reshape(-1, 2)
    loops = segments[:, 0] == segments[:, 1]
    if loops.any():
        logger.warning(f"删除 {int(loops.sum())} 条端点合并后长度为零的线段")
    segments = segments[~loops]
    keys = np.sort(segments, axis=1)
    _, keep = np.unique(keys, axis=0, return_index=True)
    if len(keep) < len(segments):
        logger.warning(f"删除 {len(segments) - len(keep)} 条重复线段")
    return vertices, segments[np.sort(keep)]


def read_network(path: Union[str, Path]) -> LinearNetwork:
    """
    读取线性网络

    .geojson/.json 按 GeoJSON（LineString/MultiLineString）读取，
    其他扩展名按 x1,y1,x2,y2 的线段 CSV 读取；折线的每个相邻坐标对成为一条线段
    """
    suffix = Path(path).suffix.lower()
    if suffix in (".geojson", ".json"):
        lines = _linestrings_from_geojson(path)
        pieces = [np.column_stack([line[:-1], line[1:]]) for line in lines if len(line) >= 2]
        if not pieces:
            raise ValidationError(f"{path} 中没有线段")
        table = np.concatenate(pieces)
    else:
        table = _segments_from_csv(path)
        if len(table) == 0:
            raise ValidationError(f"{path} 中没有线段")

    vertices, segments = merge_endpoints(table[:, :2], table[:, 2:])
    try:
        network = build_network(vertices, segments)
    except NetworkValidationError as error:
        raise ValidationError(f"{path}: {error}") from error
    logger.info(f"已读取网络 {path}: {network}")
    return network
