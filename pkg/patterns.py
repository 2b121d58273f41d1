"""
点模式模块
平面窗口与线性网络上的带标记点模式、标记矩与按类型拆分
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from core_data_structures import LinearNetwork, NetworkLocation, Window, epanechnikov
from exceptions import (
    EmptyComponent, NoMarks, NoTypes, PatternError, SingleType, TooFewPoints
)
from metric_engine import MetricEngine


# 默认带宽系数：平面 c/sqrt(λ)，网络 c/λ
BANDWIDTH_COEFFICIENT = 0.15


@dataclass(eq=False)
class MarkedPattern:
    """带标记点模式；网络模式同时保存网络位置与嵌入坐标"""
    coords: np.ndarray                              # (n, 2) 平面坐标
    window: Window                                  # 观测窗口（网络模式为网络包围盒）
    network: Optional[LinearNetwork] = None         # 所在网络
    segments: Optional[np.ndarray] = None           # 网络位置：线段编号
    offsets: Optional[np.ndarray] = None            # 网络位置：偏移
    types: Optional[np.ndarray] = None              # 类型标签 1..k
    type_labels: Optional[List[str]] = None         # 类型名称，第 i-1 个对应类型 i
    marks: Optional[np.ndarray] = None              # 实数标记 (n,) 或 (n, 2)
    metadata: Dict[str, Any] = field(default_factory=dict)
    base_engine: Optional[MetricEngine] = field(default=None, repr=False, compare=False)
    _engine: Optional[MetricEngine] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        n = len(self.coords)

        if self.network is not None:
            if self.segments is None or self.offsets is None:
                raise PatternError("网络模式需要线段编号与偏移")
            self.segments = np.asarray(self.segments, dtype=np.int64).reshape(-1)
            self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
            if len(self.segments) != n or len(self.offsets) != n:
                raise PatternError("网络位置数量与坐标数量不一致")
        elif n and not np.all(self.window.contains(self.coords)):
            raise PatternError("存在落在观测窗口外的点")

        if self.types is not None:
            self.types = np.asarray(self.types, dtype=np.int64).reshape(-1)
            if len(self.types) != n:
                raise PatternError(f"类型数量 {len(self.types)} 与点数 {n} 不一致")
            if self.type_labels is None:
                k = int(self.types.max()) if n else 0
                self.type_labels = [str(i) for i in range(1, k + 1)]
            if n and (self.types.min() < 1 or self.types.max() > len(self.type_labels)):
                raise PatternError(f"类型标签必须在 1..{len(self.type_labels)} 之间")

        if self.marks is not None:
            self.marks = np.asarray(self.marks, dtype=float)
            if self.marks.ndim not in (1, 2) or len(self.marks) != n:
                raise PatternError(f"标记数量与点数 {n} 不一致")
            if self.marks.ndim == 2 and self.marks.shape[1] not in (1, 2):
                raise PatternError("每个点至多两个实数标记")
            if not np.all(np.isfinite(self.marks)):
                raise PatternError("标记包含缺失值或非有限值")

    # ---- 基本属性 ----

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def is_network(self) -> bool:
        return self.network is not None

    @property
    def n_types(self) -> int:
        return len(self.type_labels) if self.type_labels is not None else 0

    @property
    def n_marks(self) -> int:
        if self.marks is None:
            return 0
        return 1 if self.marks.ndim == 1 else self.marks.shape[1]

    @property
    def domain_size(self) -> float:
        """|W| 或 |L|"""
        return self.network.total_length if self.is_network else self.window.area

    @property
    def intensity(self) -> float:
        """齐次强度估计 n/|W| 或 n/|L|"""
        return self.n / self.domain_size

    @property
    def engine(self) -> MetricEngine:
        """网络度量引擎（首次访问时构造）"""
        if not self.is_network:
            raise PatternError("平面模式没有网络度量引擎")
        if self._engine is None:
            if self.base_engine is not None:
                self._engine = self.base_engine.with_sites(self.segments, self.offsets)
            else:
                self._engine = MetricEngine(self.network, self.segments, self.offsets)
        return self._engine

    def locations(self) -> List[NetworkLocation]:
        if not self.is_network:
            raise PatternError("平面模式没有网络位置")
        return [NetworkLocation(int(s), float(t)) for s, t in zip(self.segments, self.offsets)]

    def mark(self, column: int = 0) -> np.ndarray:
        """第 column 个实数标记"""
        if self.marks is None:
            raise NoMarks("点模式没有实数标记")
        if self.marks.ndim == 1:
            if column != 0:
                raise NoMarks(f"点模式只有一个实数标记，没有第 {column + 1} 个")
            return self.marks
        if column >= self.marks.shape[1]:
            raise NoMarks(f"点模式没有第 {column + 1} 个实数标记")
        return self.marks[:, column]

    def type_counts(self) -> np.ndarray:
        if self.types is None:
            raise NoTypes("点模式没有类型标签")
        return np.bincount(self.types, minlength=self.n_types + 1)[1:]

    def component_indices(self, component: Union[int, str, None]) -> np.ndarray:
        """类型 component 的点编号；None 或 '•' 表示全部点"""
        if component is None or component == "•" or component == "dot":
            return np.arange(self.n)
        if self.types is None:
            raise NoTypes("点模式没有类型标签")
        component = self.resolve_type(component)
        indices = np.flatnonzero(self.types == component)
        if indices.size == 0:
            raise EmptyComponent(f"类型 {self.type_labels[component - 1]} 没有点")
        return indices

    def resolve_type(self, component: Union[int, str]) -> int:
        """类型名称或编号转换为编号"""
        if isinstance(component, str) and component in (self.type_labels or []):
            return self.type_labels.index(component) + 1
        try:
            value = int(component)
        except (TypeError, ValueError):
            raise EmptyComponent(f"未知类型: {component}")
        if not 1 <= value <= self.n_types:
            raise EmptyComponent(f"类型编号 {value} 超出 1..{self.n_types}")
        return value

    # ---- 派生模式 ----

    def replace(self, **changes) -> 'MarkedPattern':
        """替换字段得到新模式；位置不变时沿用度量引擎"""
        keeps_locations = not ({"coords", "segments", "offsets", "network"} & set(changes))
        pattern = dataclasses.replace(self, **changes)
        if keeps_locations:
            pattern._engine = self._engine
        return pattern

    def with_marks(self, marks: np.ndarray) -> 'MarkedPattern':
        return self.replace(marks=marks)

    def with_types(self, types: np.ndarray, type_labels: Optional[List[str]] = None) -> 'MarkedPattern':
        return self.replace(types=types, type_labels=type_labels or self.type_labels)

    def subset(self, indices: Sequence[int]) -> 'MarkedPattern':
        indices = np.asarray(indices, dtype=np.int64)
        changes = {"coords": self.coords[indices], "metadata": dict(self.metadata)}
        if self.is_network:
            changes.update(segments=self.segments[indices], offsets=self.offsets[indices],
                           base_engine=self.base_engine or self._engine)
        if self.types is not None:
            changes["types"] = self.types[indices]
        if self.marks is not None:
            changes["marks"] = self.marks[indices]
        return dataclasses.replace(self, **changes)

    def planar_view(self) -> 'MarkedPattern':
        """网络模式的平面嵌入：同样的坐标、类型与标记，窗口为网络包围盒"""
        if not self.is_network:
            return self
        return MarkedPattern(coords=self.coords, window=self.window, types=self.types,
                             marks=self.marks, type_labels=self.type_labels,
                             metadata=dict(self.metadata))

    def pair_distances(self, rows: Optional[Sequence[int]] = None,
                       cols: Optional[Sequence[int]] = None) -> np.ndarray:
        """欧氏距离（平面）或最短路径距离（网络）"""
        rows = np.arange(self.n) if rows is None else np.asarray(rows, dtype=np.int64)
        cols = np.arange(self.n) if cols is None else np.asarray(cols, dtype=np.int64)
        if self.is_network:
            return self.engine.cross_distances(rows, cols)
        return cdist(self.coords[rows], self.coords[cols])

    def default_bandwidth(self, coefficient: float = BANDWIDTH_COEFFICIENT) -> float:
        """平面 c/sqrt(λ)，网络 c/λ，c 默认 0.15"""
        if self.n == 0:
            raise TooFewPoints("空模式无法确定默认带宽")
        if self.is_network:
            return coefficient / self.intensity
        return coefficient / np.sqrt(self.intensity)


def planar_pattern(coords: np.ndarray, window: Optional[Window] = None, types=None,
                   marks=None, type_labels: Optional[List[str]] = None,
                   metadata: Optional[Dict[str, Any]] = None) -> MarkedPattern:
    """构造平面模式；未给窗口时取点的包围盒"""
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    if window is None:
        window = Window.bounding(coords)
    return MarkedPattern(coords=coords, window=window, types=types, marks=marks,
                         type_labels=type_labels, metadata=metadata or {})


def network_pattern(network: LinearNetwork, segments, offsets, types=None, marks=None,
                    type_labels: Optional[List[str]] = None,
                    metadata: Optional[Dict[str, Any]] = None,
                    base_engine: Optional[MetricEngine] = None) -> MarkedPattern:
    """构造网络模式，嵌入坐标由网络位置计算"""
    segments = np.asarray(segments, dtype=np.int64).reshape(-1)
    offsets = np.asarray(offsets, dtype=float).reshape(-1)
    coords = network.embed(segments, offsets) if len(segments) else np.zeros((0, 2))
    return MarkedPattern(coords=coords, window=network.window(), network=network,
                         segments=segments, offsets=offsets, types=types, marks=marks,
                         type_labels=type_labels, metadata=metadata or {},
                         base_engine=base_engine)


def split_by_type(pattern: MarkedPattern) -> List[MarkedPattern]:
    """按类型拆分为 k 个子模式"""
    if pattern.types is None:
        raise NoTypes("点模式没有类型标签，无法拆分")
    return [pattern.subset(pattern.component_indices(i)) for i in range(1, pattern.n_types + 1)]


def superpose(patterns: Sequence[MarkedPattern]) -> MarkedPattern:
    """合并同一区域上的若干模式（拆分的逆操作）"""
    if not patterns:
        raise TooFewPoints("没有可合并的模式")
    first = patterns[0]

    def stack(name):
        values = [getattr(p, name) for p in patterns]
        return None if any(v is None for v in values) else np.concatenate(values)

    changes = {"coords": np.concatenate([p.coords for p in patterns]),
               "types": stack("types"), "marks": stack("marks"), "metadata": dict(first.metadata)}
    if first.is_network:
        changes.update(segments=stack("segments"), offsets=stack("offsets"),
                       base_engine=first.base_engine or first._engine)
    return dataclasses.replace(first, **changes)


@dataclass
class MarkMoments:
    """标记的均值、方差与条件均值 μ_m(r)"""
    mean: float
    variance: float
    bandwidth: float
    pair_distance: np.ndarray = field(repr=False)
    pair_mean: np.ndarray = field(repr=False)

    def conditional_mean_at(self, r: Union[float, np.ndarray]) -> np.ndarray:
        """距离为 r 的点对的平均标记（Epanechnikov 核回归），无点对处为 nan"""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        weight = epanechnikov(r[:, None] - self.pair_distance[None, :], self.bandwidth)
        total = weight.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, weight @ self.pair_mean / total, np.nan)


def mark_moments(pattern: MarkedPattern, column: int = 0,
                 bandwidth: Optional[float] = None) -> MarkMoments:
    """标记均值与总体方差（分母为 n）"""
    marks = pattern.mark(column)
    if marks.size == 0:
        raise NoMarks("空模式没有标记")
    if bandwidth is None:
        bandwidth = pattern.default_bandwidth()

    if pattern.n >= 2:
        distances = pattern.pair_distances()
        upper_i, upper_j = np.triu_indices(pattern.n, k=1)
        pair_distance = distances[upper_i, upper_j]
        finite = np.isfinite(pair_distance)
        pair_distance = pair_distance[finite]
        pair_mean = 0.5 * (marks[upper_i] + marks[upper_j])[finite]
    else:
        pair_distance = np.zeros(0)
        pair_mean = np.zeros(0)

    return MarkMoments(mean=float(marks.mean()), variance=float(marks.var()),
                       bandwidth=float(bandwidth), pair_distance=pair_distance,
                       pair_mean=pair_mean)


def mingling_constant(pattern: MarkedPattern) -> float:
    """c = Σ n_i (n - n_i) / (n (n - 1))"""
    if pattern.types is None:
        raise NoTypes("点模式没有类型标签")
    if pattern.n < 2:
        raise TooFewPoints("混合常数至少需要两个点")
    counts = pattern.type_counts().astype(float)
    n = float(pattern.n)
    return float(np.sum(counts * (n - counts)) / (n * (n - 1.0)))


def require_mingling_constant(pattern: MarkedPattern) -> float:
    constant = mingling_constant(pattern)
    if constant <= 0:
        raise SingleType("只有一种类型出现，混合常数为零")
    logger.debug(f"混合常数 c = {constant:.6g}")
    return constant
