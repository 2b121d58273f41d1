"""
核心数据结构模块
定义线性网络、网络位置、平面窗口与汇总曲线等基础类型
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import shapely
from loguru import logger
from scipy.spatial import cKDTree
from shapely.geometry import Polygon, box

from exceptions import (
    DanglingIndex, DuplicateVertex, EmptyNetwork, NetworkValidationError,
    NonPositiveBandwidth, NonPositiveSpacing, UnsortedGrid, ZeroLengthSegment
)


# 相对容差（以包围盒对角线为尺度）
RELATIVE_TOLERANCE = 1e-9

# 共线网络包围盒的相对加宽量
DEGENERATE_PAD = 1e-3

# 每批投影的点数，控制 (点数 x 线段数) 中间矩阵大小
SNAP_CHUNK = 256


@dataclass(frozen=True)
class NetworkLocation:
    """网络上的位置：线段编号 + 自线段起点量起的弧长"""
    segment: int
    offset: float


def _read_only(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class LinearNetwork:
    """线性网络：有限条直线段的并，构造后不可变"""

    def __init__(self, vertices: np.ndarray, segments: np.ndarray):
        self.vertices = _read_only(np.array(vertices, dtype=float).reshape(-1, 2))
        self.segments = _read_only(np.array(segments, dtype=np.int64).reshape(-1, 2))

        start = self.vertices[self.segments[:, 0]]
        end = self.vertices[self.segments[:, 1]]
        self.segment_lengths = _read_only(np.hypot(*(end - start).T))

        adjacency: List[List[int]] = [[] for _ in range(len(self.vertices))]
        for index, (a, b) in enumerate(self.segments):
            adjacency[a].append(index)
            adjacency[b].append(index)
        self.adjacency = tuple(tuple(incident) for incident in adjacency)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def total_length(self) -> float:
        """网络总长度 |L|"""
        return float(self.segment_lengths.sum())

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """包围盒 (xmin, ymin, xmax, ymax)"""
        xmin, ymin = self.vertices.min(axis=0)
        xmax, ymax = self.vertices.max(axis=0)
        return float(xmin), float(ymin), float(xmax), float(ymax)

    @property
    def bbox_diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return math.hypot(xmax - xmin, ymax - ymin)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(incident) for incident in self.adjacency], dtype=np.int64)

    def tolerance(self) -> float:
        """长度比较的绝对容差"""
        return RELATIVE_TOLERANCE * max(self.bbox_diagonal, self.total_length)

    def embed(self, segments: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        """把网络位置映射为平面坐标"""
        segments = np.asarray(segments, dtype=np.int64)
        offsets = np.asarray(offsets, dtype=float)
        start = self.vertices[self.segments[segments, 0]]
        end = self.vertices[self.segments[segments, 1]]
        fraction = offsets / self.segment_lengths[segments]
        return start + fraction[:, None] * (end - start)

    def embed_location(self, location: NetworkLocation) -> Tuple[float, float]:
        x, y = self.embed(np.array([location.segment]), np.array([location.offset]))[0]
        return float(x), float(y)

    def window(self) -> 'Window':
        """网络的包围盒窗口，供平面统计量使用"""
        xmin, ymin, xmax, ymax = self.bounds
        # 共线网络的包围盒退化为线段，退化方向加宽
        pad = DEGENERATE_PAD * max(self.bbox_diagonal, self.total_length)
        if xmax - xmin <= pad:
            xmin, xmax = xmin - pad, xmax + pad
        if ymax - ymin <= pad:
            ymin, ymax = ymin - pad, ymax + pad
        return Window.rectangle(xmin, xmax, ymin, ymax)

    def __repr__(self) -> str:
        return (f"LinearNetwork(vertices={self.n_vertices}, segments={self.n_segments}, "
                f"length={self.total_length:.6g})")


def build_network(vertices: Sequence[Sequence[float]],
                  segments: Sequence[Sequence[int]]) -> LinearNetwork:
    """校验输入并构造线性网络（输入必须已在交点处打断）"""
    vertices = np.asarray(vertices, dtype=float)
    segments = np.asarray(segments)

    if vertices.size == 0 or segments.size == 0:
        raise EmptyNetwork("顶点和线段都不能为空")
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise NetworkValidationError(f"顶点数组形状应为 (V, 2)，实际为 {vertices.shape}")
    if segments.ndim != 2 or segments.shape[1] != 2:
        raise NetworkValidationError(f"线段数组形状应为 (E, 2)，实际为 {segments.shape}")
    if not np.all(np.isfinite(vertices)):
        raise NetworkValidationError("顶点坐标包含非有限值")
    if not np.all(np.equal(np.mod(segments, 1), 0)):
        raise DanglingIndex("线段端点必须是整数顶点编号")
    segments = segments.astype(np.int64)

    n_vertices = len(vertices)
    bad = np.flatnonzero((segments < 0).any(axis=1) | (segments >= n_vertices).any(axis=1))
    if bad.size:
        raise DanglingIndex(f"线段 {bad[0]} 引用了不存在的顶点 {segments[bad[0]].tolist()}")

    loops = np.flatnonzero(segments[:, 0] == segments[:, 1])
    if loops.size:
        raise ZeroLengthSegment(f"线段 {loops[0]} 两端是同一个顶点")

    diagonal = float(np.hypot(*(vertices.max(axis=0) - vertices.min(axis=0))))
    pairs = cKDTree(vertices).query_pairs(RELATIVE_TOLERANCE * diagonal)
    if pairs:
        a, b = min(pairs)
        raise DuplicateVertex(f"顶点 {a} 与顶点 {b} 重合")

    network = LinearNetwork(vertices, segments)
    if network.total_length <= 0:
        raise ZeroLengthSegment("网络总长度必须为正")

    logger.debug(f"构造网络: {network}")
    return network


def snap_points(points: np.ndarray, network: LinearNetwork
                ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    把平面点吸附到网络上最近的位置

    返回 (线段编号, 偏移, 吸附位移)；距离相同时取编号最小的线段
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    start = network.vertices[network.segments[:, 0]]
    direction = network.vertices[network.segments[:, 1]] - start
    squared = network.segment_lengths ** 2
    tolerance = network.tolerance()

    segments = np.empty(len(points), dtype=np.int64)
    offsets = np.empty(len(points), dtype=float)
    displacement = np.empty(len(points), dtype=float)

    for begin in range(0, len(points), SNAP_CHUNK):
        chunk = points[begin:begin + SNAP_CHUNK]
        relative = chunk[:, None, :] - start[None, :, :]
        fraction = np.clip((relative * direction[None]).sum(axis=2) / squared, 0.0, 1.0)
        projected = start[None] + fraction[..., None] * direction[None]
        distance = np.hypot(*(chunk[:, None, :] - projected).transpose(2, 0, 1))

        nearest = distance.min(axis=1)
        # 第一个落入容差的线段即编号最小者
        chosen = np.argmax(distance <= nearest[:, None] + tolerance, axis=1)
        rows = np.arange(len(chunk))
        segments[begin:begin + len(chunk)] = chosen
        offsets[begin:begin + len(chunk)] = fraction[rows, chosen] * network.segment_lengths[chosen]
        displacement[begin:begin + len(chunk)] = distance[rows, chosen]

    return segments, offsets, displacement


def snap_to_network(point: Sequence[float], network: LinearNetwork) -> NetworkLocation:
    """把单个平面点吸附到网络上"""
    segments, offsets, _ = snap_points(np.asarray(point, dtype=float)[None, :], network)
    return NetworkLocation(int(segments[0]), float(offsets[0]))


def terminal_vertices(network: LinearNetwork) -> List[int]:
    """度为1的顶点，即网络的边界"""
    return [int(v) for v in np.flatnonzero(network.degrees == 1)]


def dummy_grid(network: LinearNetwork, spacing: float) -> List[NetworkLocation]:
    """每条线段上取 ceil(长度/间距) 个子区间中点作为哑位置"""
    segments, offsets = dummy_grid_arrays(network, spacing)
    return [NetworkLocation(int(s), float(t)) for s, t in zip(segments, offsets)]


def dummy_grid_arrays(network: LinearNetwork, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
    """dummy_grid 的数组形式"""
    if not spacing > 0:
        raise NonPositiveSpacing(f"间距必须为正，实际为 {spacing}")

    segment_ids = []
    offsets = []
    for index, length in enumerate(network.segment_lengths):
        count = max(1, math.ceil(round(length / spacing, 9)))
        step = length / count
        segment_ids.append(np.full(count, index, dtype=np.int64))
        offsets.append((np.arange(count) + 0.5) * step)
    return np.concatenate(segment_ids), np.concatenate(offsets)


def locations_to_arrays(locations: Sequence[NetworkLocation]) -> Tuple[np.ndarray, np.ndarray]:
    segments = np.array([loc.segment for loc in locations], dtype=np.int64)
    offsets = np.array([loc.offset for loc in locations], dtype=float)
    return segments, offsets


class Window:
    """平面观测窗口（多边形）"""

    def __init__(self, polygon: Polygon):
        if polygon.is_empty or polygon.area <= 0:
            raise ValueError("窗口面积必须为正")
        self.polygon = polygon
        shapely.prepare(self.polygon)

    @classmethod
    def rectangle(cls, xmin: float, xmax: float, ymin: float, ymax: float) -> 'Window':
        return cls(box(xmin, ymin, xmax, ymax))

    @classmethod
    def from_vertices(cls, coordinates: Sequence[Sequence[float]]) -> 'Window':
        return cls(Polygon(coordinates))

    @classmethod
    def bounding(cls, points: np.ndarray) -> 'Window':
        """点集的包围盒窗口"""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        xmin, ymin = points.min(axis=0)
        xmax, ymax = points.max(axis=0)
        return cls.rectangle(xmin, xmax, ymin, ymax)

    @property
    def area(self) -> float:
        return float(self.polygon.area)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return tuple(float(v) for v in self.polygon.bounds)

    @property
    def is_rectangle(self) -> bool:
        """轴对齐矩形"""
        xmin, ymin, xmax, ymax = self.bounds
        return math.isclose(self.area, (xmax - xmin) * (ymax - ymin), rel_tol=1e-12)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """点是否在窗口内（含边界）"""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return shapely.intersects_xy(self.polygon, points[:, 0], points[:, 1])

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """点到窗口边界的距离"""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.is_rectangle:
            xmin, ymin, xmax, ymax = self.bounds
            return np.minimum.reduce([points[:, 0] - xmin, xmax - points[:, 0],
                                      points[:, 1] - ymin, ymax - points[:, 1]])
        return shapely.distance(self.polygon.boundary, shapely.points(points))

    def grid(self, resolution: int = 128) -> Tuple[np.ndarray, float]:
        """窗口内规则网格的格心与单元面积"""
        xmin, ymin, xmax, ymax = self.bounds
        dx = (xmax - xmin) / resolution
        dy = (ymax - ymin) / resolution
        xs = xmin + (np.arange(resolution) + 0.5) * dx
        ys = ymin + (np.arange(resolution) + 0.5) * dy
        gx, gy = np.meshgrid(xs, ys)
        centers = np.column_stack([gx.ravel(), gy.ravel()])
        if not self.is_rectangle:
            centers = centers[self.contains(centers)]
        return centers, dx * dy

    def __repr__(self) -> str:
        return f"Window(bounds={self.bounds}, area={self.area:.6g})"


def planar_dummy_grid(window: Window, spacing: float) -> np.ndarray:
    """窗口内间距为 spacing 的方格中心"""
    if not spacing > 0:
        raise NonPositiveSpacing(f"间距必须为正，实际为 {spacing}")
    xmin, ymin, xmax, ymax = window.bounds
    nx = max(1, math.ceil(round((xmax - xmin) / spacing, 9)))
    ny = max(1, math.ceil(round((ymax - ymin) / spacing, 9)))
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    gx, gy = np.meshgrid(xs, ys)
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    return centers[window.contains(centers)]


@dataclass
class SummaryCurve:
    """汇总曲线：所有估计量与包络的统一输出"""
    r: np.ndarray
    values: np.ndarray
    theo: np.ndarray
    label: str
    n_pairs: Optional[np.ndarray] = None
    extras: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.theo = np.broadcast_to(np.asarray(self.theo, dtype=float), self.r.shape).copy()
        if self.values.shape != self.r.shape:
            raise ValueError(f"估计值长度 {self.values.shape} 与距离网格 {self.r.shape} 不一致")
        if self.n_pairs is not None:
            self.n_pairs = np.asarray(self.n_pairs, dtype=np.int64)
        self.extras = {key: np.asarray(value, dtype=float) for key, value in self.extras.items()}

    @property
    def masked(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    def __len__(self) -> int:
        return len(self.r)


def validate_r_grid(r: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """距离网格必须为非负、严格递增的一维数组"""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise UnsortedGrid("距离网格必须是非空一维数组")
    if not np.all(np.isfinite(r)) or r[0] < 0 or np.any(np.diff(r) <= 0):
        raise UnsortedGrid("距离网格必须非负且严格递增")
    return r


def make_r_grid(r_min: float, r_max: float, count: int) -> np.ndarray:
    return validate_r_grid(np.linspace(r_min, r_max, count))


def epanechnikov(t: np.ndarray, bandwidth: float) -> np.ndarray:
    """Epanechnikov 核，bandwidth 为半宽"""
    if not bandwidth > 0:
        raise NonPositiveBandwidth(f"带宽必须为正，实际为 {bandwidth}")
    u = np.asarray(t, dtype=float) / bandwidth
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u) / bandwidth, 0.0)


if __name__ == "__main__":
    network = build_network([(0, 0), (1, 0), (1, 1)], [(0, 1), (1, 2)])
    print(network)
    print(f"端点: {terminal_vertices(network)}")
    print(f"吸附 (0.5, 0.3): {snap_to_network((0.5, 0.3), network)}")
    print(f"哑网格数量: {len(dummy_grid(network, 0.25))}")
