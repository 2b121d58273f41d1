"""
强度估计模块
平面 Jones-Diggle 核强度、网络上的常数/给定/lixel 核强度
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.special import ndtr

from core_data_structures import Window, dummy_grid_arrays
from exceptions import (
    ConfigError, EmptyComponent, MissingSuppliedValues, NonPositiveBandwidth
)
from patterns import MarkedPattern


# 平面强度归一化与下确界使用的网格分辨率
PLANAR_GRID_RESOLUTION = 128

# 网络 lixel 数量上限
MAX_LIXELS = 2000

# 核求值分块大小
EVALUATION_CHUNK = 4096

NETWORK_MODES = ("constant", "supplied", "lixel-kernel")


@dataclass
class IntensitySurface:
    """强度曲面：任意位置的强度函数 + 数据点处的缓存值"""
    at_points: np.ndarray                       # 分量各点处的强度 λ(x_i)
    indices: np.ndarray                         # 分量点在原模式中的编号
    minimum: float                              # λ̄ = inf λ（网格与数据点上的最小值）
    evaluator: Callable[..., np.ndarray] = field(repr=False)
    bandwidth: Optional[Union[float, Tuple[float, float]]] = None
    mode: str = "constant"
    total: float = 0.0                          # 曲面积分（归一化后等于分量点数）

    def __post_init__(self):
        self.at_points = np.asarray(self.at_points, dtype=float)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if np.any(self.at_points <= 0):
            raise ValueError("数据点处的强度必须为正")

    def evaluate(self, *locations) -> np.ndarray:
        """平面传入坐标数组，网络传入 (线段, 偏移) 数组"""
        return self.evaluator(*locations)

    def values_for(self, pattern: MarkedPattern, indices: Sequence[int]) -> np.ndarray:
        """模式中指定点处的强度"""
        indices = np.asarray(indices, dtype=np.int64)
        if np.array_equal(indices, self.indices):
            return self.at_points
        position = {int(index): k for k, index in enumerate(self.indices)}
        if all(int(index) in position for index in indices):
            return self.at_points[[position[int(index)] for index in indices]]
        if pattern.is_network:
            return self.evaluate(pattern.segments[indices], pattern.offsets[indices])
        return self.evaluate(pattern.coords[indices])


def constant_intensity(pattern: MarkedPattern, component=None) -> IntensitySurface:
    """齐次强度 n_i/|W| 或 n_i/|L|"""
    indices = pattern.component_indices(component)
    if indices.size == 0:
        raise EmptyComponent("分量为空，无法估计强度")
    value = indices.size / pattern.domain_size

    def evaluator(first, *rest):
        return np.full(len(first), value)

    return IntensitySurface(at_points=np.full(indices.size, value), indices=indices,
                            minimum=value, evaluator=evaluator, mode="constant",
                            total=float(indices.size))


def scott_bandwidth(points: np.ndarray, window: Window) -> Tuple[float, float]:
    """Scott 法则：σ_d = std_d · n^(-1/6)；退化方向用窗口边长的均匀分布标准差"""
    n = len(points)
    xmin, ymin, xmax, ymax = window.bounds
    fallback = np.array([xmax - xmin, ymax - ymin]) / np.sqrt(12.0)
    spread = points.std(axis=0, ddof=1) if n > 1 else np.zeros(2)
    spread = np.where(spread > 0, spread, fallback)
    sigma = spread * n ** (-1.0 / 6.0)
    return float(sigma[0]), float(sigma[1])


class PlanarKernelIntensity:
    """高斯核强度，Jones-Diggle 边缘校正：每个核除以其落在窗口内的质量"""

    def __init__(self, points: np.ndarray, window: Window, sigma: Tuple[float, float]):
        self.points = points
        self.window = window
        self.sigma = np.asarray(sigma, dtype=float)
        self.scale = 1.0
        self.edge_mass = self._edge_mass()

    def _edge_mass(self) -> np.ndarray:
        if self.window.is_rectangle:
            xmin, ymin, xmax, ymax = self.window.bounds
            sx, sy = self.sigma
            px, py = self.points[:, 0], self.points[:, 1]
            mass_x = ndtr((xmax - px) / sx) - ndtr((xmin - px) / sx)
            mass_y = ndtr((ymax - py) / sy) - ndtr((ymin - py) / sy)
            mass = mass_x * mass_y
        else:
            centers, cell_area = self.window.grid(PLANAR_GRID_RESOLUTION)
            mass = self._kernel_sum(self.points, centers, np.ones(len(centers))) * cell_area
        return np.maximum(mass, 1e-12)

    def _kernel_sum(self, targets: np.ndarray, centers: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Σ_c w_c φ(target - c)"""
        sx, sy = self.sigma
        norm = 1.0 / (2.0 * np.pi * sx * sy)
        result = np.empty(len(targets))
        for begin in range(0, len(targets), EVALUATION_CHUNK):
            chunk = targets[begin:begin + EVALUATION_CHUNK]
            dx = (chunk[:, 0][:, None] - centers[:, 0][None, :]) / sx
            dy = (chunk[:, 1][:, None] - centers[:, 1][None, :]) / sy
            result[begin:begin + len(chunk)] = norm * np.exp(-0.5 * (dx * dx + dy * dy)) @ weights
        return result

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        return self.scale * self._kernel_sum(coords, self.points, 1.0 / self.edge_mass)


def kernel_intensity_planar(pattern: MarkedPattern, component=None,
                            bandwidth: Optional[Union[float, Sequence[float]]] = None
                            ) -> IntensitySurface:
    """
    平面核强度估计

    默认带宽按 Scott 法则逐坐标确定；结果重新归一化使曲面在窗口内积分等于分量点数
    """
    indices = pattern.component_indices(component)
    if indices.size == 0:
        raise EmptyComponent("分量为空，无法估计强度")
    points = pattern.coords[indices]
    window = pattern.window

    if bandwidth is None:
        sigma = scott_bandwidth(points, window)
    else:
        sigma = tuple(np.broadcast_to(np.asarray(bandwidth, dtype=float), (2,)))
    if min(sigma) <= 0:
        raise NonPositiveBandwidth(f"带宽必须为正，实际为 {sigma}")

    estimator = PlanarKernelIntensity(points, window, sigma)
    centers, cell_area = window.grid(PLANAR_GRID_RESOLUTION)
    grid_values = estimator(centers)
    integral = float(grid_values.sum() * cell_area)
    estimator.scale = indices.size / integral
    grid_values *= estimator.scale

    at_points = estimator(points)
    minimum = float(min(grid_values.min(), at_points.min()))
    logger.debug(f"平面核强度: n={indices.size}, σ={sigma}, λ̄={minimum:.6g}")
    return IntensitySurface(at_points=at_points, indices=indices, minimum=minimum,
                            evaluator=estimator, bandwidth=sigma, mode="kernel",
                            total=float(indices.size))


def gaussian_kernel(distance: np.ndarray, bandwidth: float) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        values = np.exp(-0.5 * (distance / bandwidth) ** 2) / (np.sqrt(2.0 * np.pi) * bandwidth)
    return np.where(np.isfinite(distance), values, 0.0)


def _supplied_intensity(pattern: MarkedPattern, indices: np.ndarray,
                        values: Optional[np.ndarray]) -> IntensitySurface:
    if values is None:
        raise MissingSuppliedValues("supplied 模式需要给出数据点处的强度值")
    values = np.asarray(values, dtype=float).reshape(-1)
    if len(values) == pattern.n and len(values) != indices.size:
        values = values[indices]
    if len(values) != indices.size:
        raise MissingSuppliedValues(f"需要 {indices.size} 个强度值，实际给出 {len(values)} 个")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise MissingSuppliedValues("给定强度值必须为正的有限数")

    engine = pattern.engine

    def evaluator(segments, offsets):
        # 其他位置取最短路径距离最近的数据点的值
        probe = engine.extended(np.asarray(segments), np.asarray(offsets))
        rows = np.arange(pattern.n, probe.n_sites)
        nearest = np.argmin(probe.cross_distances(rows, indices), axis=1)
        return values[nearest]

    return IntensitySurface(at_points=values, indices=indices, minimum=float(values.min()),
                            evaluator=evaluator, mode="supplied",
                            total=float(values.mean() * pattern.domain_size))


def _lixel_intensity(pattern: MarkedPattern, indices: np.ndarray,
                     bandwidth: Optional[float]) -> IntensitySurface:
    network = pattern.network
    if bandwidth is None:
        bandwidth = network.total_length / 50.0
    if not bandwidth > 0:
        raise NonPositiveBandwidth(f"带宽必须为正，实际为 {bandwidth}")

    spacing = max(bandwidth / 2.0, network.total_length / MAX_LIXELS)
    lixel_segments, lixel_offsets = dummy_grid_arrays(network, spacing)
    per_segment = np.bincount(lixel_segments, minlength=network.n_segments)
    first_lixel = np.concatenate([[0], np.cumsum(per_segment)[:-1]])
    step = network.segment_lengths / per_segment
    lixel_lengths = step[lixel_segments]

    def locate(segments, offsets):
        segments = np.asarray(segments, dtype=np.int64)
        position = np.floor(np.asarray(offsets, dtype=float) / step[segments]).astype(np.int64)
        return first_lixel[segments] + np.clip(position, 0, per_segment[segments] - 1)

    counts = np.bincount(locate(pattern.segments[indices], pattern.offsets[indices]),
                         minlength=len(lixel_segments)).astype(float)

    lixel_engine = pattern.engine.with_sites(lixel_segments, lixel_offsets)
    occupied = np.flatnonzero(counts)
    smoothed = gaussian_kernel(lixel_engine.cross_distances(np.arange(len(lixel_segments)), occupied),
                               bandwidth) @ counts[occupied]
    integral = float(smoothed @ lixel_lengths)
    lixel_values = smoothed * (indices.size / integral)

    def evaluator(segments, offsets):
        return lixel_values[locate(segments, offsets)]

    at_points = evaluator(pattern.segments[indices], pattern.offsets[indices])
    logger.debug(f"lixel 核强度: {len(lixel_segments)} 个 lixel, 带宽 {bandwidth:.6g}")
    return IntensitySurface(at_points=np.maximum(at_points, 1e-300), indices=indices,
                            minimum=float(max(lixel_values.min(), 1e-300)),
                            evaluator=evaluator, bandwidth=float(bandwidth),
                            mode="lixel-kernel", total=float(lixel_values @ lixel_lengths))


def intensity_network(pattern: MarkedPattern, mode: str = "constant",
                      bandwidth: Optional[float] = None, values: Optional[np.ndarray] = None,
                      component=None) -> IntensitySurface:
    """网络强度（每单位长度的期望点数）"""
    if not pattern.is_network:
        raise ConfigError("intensity_network 需要网络上的点模式")
    indices = pattern.component_indices(component)
    if indices.size == 0:
        raise EmptyComponent("分量为空，无法估计强度")

    if mode == "constant":
        return constant_intensity(pattern, component)
    if mode == "supplied":
        return _supplied_intensity(pattern, indices, values)
    if mode == "lixel-kernel":
        return _lixel_intensity(pattern, indices, bandwidth)
    raise ConfigError(f"未知强度模式: {mode}，可选 {NETWORK_MODES}")


def intensity_marks(pattern: MarkedPattern, surface: IntensitySurface) -> MarkedPattern:
    """以估计强度作为实数标记，便于对强度做标记相关分析"""
    if surface.indices.size != pattern.n:
        raise ConfigError("强度标记需要在整个模式上估计的强度曲面")
    return pattern.with_marks(surface.values_for(pattern, np.arange(pattern.n)))
