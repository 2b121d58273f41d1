"""
平面汇总统计模块
多类型与实数标记点模式在平面窗口上的汇总特征：
交叉/点型 K 与对相关函数、H/F/J、I 函数、标记连接、混合函数、
t_f 相关函数、标记加权 K、U 统计量与双变量标记相关
"""

import math
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree
from shapely import affinity

from core_data_structures import (
    SummaryCurve, Window, epanechnikov, planar_dummy_grid, validate_r_grid
)
from exceptions import (
    EmptyComponent, NoMarks, NonPositiveBandwidth, PatternError, UnsupportedCorrection,
    ZeroNormalizer
)
from intensity import IntensitySurface, constant_intensity
from mark_functions import TestFunction, bivariate_values, get_test_function, weighted_average
from patterns import MarkedPattern, require_mingling_constant


PLANAR_CORRECTIONS = ("border", "translation", "isotropic", "none")

# J 函数在 1-F 低于此值处置为缺失
J_MASK_THRESHOLD = 1e-6

# 各向同性校正权重上限
MAX_EDGE_WEIGHT = 100.0

# 空白空间函数默认哑网格：窗口短边的等分数
DUMMY_GRID_DIVISIONS = 50

IntensityArgument = Union[None, float, IntensitySurface]
TestFunctionArgument = Union[str, TestFunction]


# ---- 公共工具 ----

def default_planar_grid(pattern: MarkedPattern, count: int = 129) -> np.ndarray:
    """[0, 窗口短边/4] 上的等距网格"""
    xmin, ymin, xmax, ymax = pattern.window.bounds
    return np.linspace(0.0, 0.25 * min(xmax - xmin, ymax - ymin), count)


def _grid(pattern: MarkedPattern, r: Optional[Sequence[float]]) -> np.ndarray:
    return default_planar_grid(pattern) if r is None else validate_r_grid(r)


def _bandwidth(pattern: MarkedPattern, bandwidth: Optional[float]) -> float:
    if bandwidth is None:
        return pattern.default_bandwidth()
    if not bandwidth > 0:
        raise NonPositiveBandwidth(f"带宽必须为正，实际为 {bandwidth}")
    return float(bandwidth)


def _test_function(testfn: TestFunctionArgument, network: bool = False) -> TestFunction:
    return get_test_function(testfn, network) if isinstance(testfn, str) else testfn


def _label(pattern: MarkedPattern, component) -> str:
    if component is None or component in ("•", "dot"):
        return "•"
    return pattern.type_labels[pattern.resolve_type(component) - 1]


def intensity_at(pattern: MarkedPattern, component, indices: np.ndarray,
                 intensity: IntensityArgument) -> Tuple[np.ndarray, float]:
    """分量各点处的强度与下确界 λ̄；未给出时用齐次估计"""
    if intensity is None:
        intensity = constant_intensity(pattern, component)
    if isinstance(intensity, (int, float)):
        if intensity <= 0:
            raise PatternError(f"强度必须为正，实际为 {intensity}")
        return np.full(len(indices), float(intensity)), float(intensity)
    return intensity.values_for(pattern, indices), intensity.minimum


def _spread(values: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    """把分量上的数组展开到整个模式（其余位置为 nan）"""
    full = np.full(n, np.nan)
    full[indices] = values
    return full


def planar_pairs(pattern: MarkedPattern, rows: np.ndarray, cols: np.ndarray,
                 max_distance: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """距离不超过 max_distance 的有序点对 (u, x)，u≠x，按 (u, x) 排序"""
    if rows.size == 0 or cols.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    tree_u = cKDTree(pattern.coords[rows])
    tree_x = cKDTree(pattern.coords[cols])
    found = tree_u.sparse_distance_matrix(tree_x, max_distance, output_type="ndarray")
    first = rows[found["i"]]
    second = cols[found["j"]]
    distance = found["v"].astype(float)
    keep = first != second
    first, second, distance = first[keep], second[keep], distance[keep]
    order = np.lexsort((second, first))
    return first[order], second[order], distance[order]


def translation_weights(window: Window, coords_u: np.ndarray, coords_x: np.ndarray) -> np.ndarray:
    """平移校正 |W| / |W ∩ (W + (x - u))|"""
    shift = coords_x - coords_u
    if window.is_rectangle:
        xmin, ymin, xmax, ymax = window.bounds
        overlap = (xmax - xmin - np.abs(shift[:, 0])) * (ymax - ymin - np.abs(shift[:, 1]))
    else:
        overlap = np.array([
            window.polygon.intersection(affinity.translate(window.polygon, dx, dy)).area
            for dx, dy in shift
        ])
    return window.area / np.maximum(overlap, window.area / MAX_EDGE_WEIGHT)


def isotropic_weights(window: Window, coords_u: np.ndarray, distance: np.ndarray) -> np.ndarray:
    """Ripley 各向同性校正：以 u 为圆心、半径 d 的圆周落在窗口内比例的倒数（仅矩形窗口）"""
    if not window.is_rectangle:
        raise UnsupportedCorrection("各向同性校正只支持轴对齐矩形窗口")
    xmin, ymin, xmax, ymax = window.bounds
    edges = np.column_stack([coords_u[:, 0] - xmin, xmax - coords_u[:, 0],
                             coords_u[:, 1] - ymin, ymax - coords_u[:, 1]])
    radius = distance[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(radius > 0, np.arccos(np.clip(edges / radius, 0.0, 1.0)), 0.0)
    outside = 2.0 * alpha.sum(axis=1)
    # 相邻两边的圆弧在角点附近重叠
    for a, b in ((0, 2), (0, 3), (1, 2), (1, 3)):
        outside -= np.maximum(0.0, alpha[:, a] + alpha[:, b] - math.pi / 2.0)
    inside = np.maximum(2.0 * math.pi - outside, 2.0 * math.pi / MAX_EDGE_WEIGHT)
    return 2.0 * math.pi / inside


def edge_weights(pattern: MarkedPattern, first: np.ndarray, second: np.ndarray,
                 distance: np.ndarray, correction: str) -> np.ndarray:
    """点对的边缘校正权重；border 校正在累计时处理，这里返回 1"""
    if correction not in PLANAR_CORRECTIONS:
        raise UnsupportedCorrection(f"未知边缘校正: {correction}，可选 {PLANAR_CORRECTIONS}")
    if correction == "translation":
        return translation_weights(pattern.window, pattern.coords[first], pattern.coords[second])
    if correction == "isotropic":
        return isotropic_weights(pattern.window, pattern.coords[first], distance)
    return np.ones(len(distance))


def _cumulative(r: np.ndarray, distance: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Σ_{d ≤ r} w，对每个 r"""
    order = np.argsort(distance, kind="stable")
    running = np.concatenate([[0.0], np.cumsum(weights[order])])
    return running[np.searchsorted(distance[order], r, side="right")]


def _k_sum(pattern: MarkedPattern, rows: np.ndarray, r: np.ndarray,
           first: np.ndarray, distance: np.ndarray, weights: np.ndarray,
           correction: str) -> Tuple[np.ndarray, np.ndarray]:
    """(1/n_i) ΣΣ 1{d ≤ r} w；border 校正只计距边界至少 r 的 u"""
    if correction != "border":
        values = _cumulative(r, distance, weights) / rows.size
        counts = _cumulative(r, distance, np.ones(len(distance))).astype(np.int64)
        return values, counts

    border = pattern.window.boundary_distance(pattern.coords)
    eligible = border[rows][None, :] >= r[:, None]
    n_eligible = eligible.sum(axis=1)
    inside = (distance[None, :] <= r[:, None]) & (border[first][None, :] >= r[:, None])
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(n_eligible > 0, (inside * weights[None, :]).sum(axis=1) / n_eligible, np.nan)
    return values, inside.sum(axis=1)


# ---- K、L 与对相关函数 ----

def cross_K_planar(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                   intensity_j: IntensityArgument = None,
                   correction: str = "translation") -> SummaryCurve:
    """
    交叉型非齐次 K 函数 K_ij(r)

    i = j 为自 K；j 为 None 或 '•' 时为点型 K_i•（此时强度应为整个过程的强度）
    """
    r = _grid(pattern, r)
    rows = pattern.component_indices(i)
    cols = pattern.component_indices(j)
    lam, _ = intensity_at(pattern, j, cols, intensity_j)

    first, second, distance = planar_pairs(pattern, rows, cols, r[-1])
    weights = edge_weights(pattern, first, second, distance, correction)
    weights = weights / _spread(lam, cols, pattern.n)[second]
    values, counts = _k_sum(pattern, rows, r, first, distance, weights, correction)

    return SummaryCurve(r=r, values=values, theo=np.pi * r ** 2,
                        label=f"K_{_label(pattern, i)}{_label(pattern, j)}", n_pairs=counts,
                        metadata={"correction": correction, "domain": "planar"})


def l_function(curve: SummaryCurve) -> SummaryCurve:
    """L(r) = sqrt(K(r)/π)"""
    with np.errstate(invalid="ignore"):
        values = np.sqrt(np.maximum(curve.values, 0.0) / np.pi)
    values = np.where(np.isfinite(curve.values), values, np.nan)
    return SummaryCurve(r=curve.r, values=values, theo=curve.r.copy(),
                        label=curve.label.replace("K", "L", 1), n_pairs=curve.n_pairs,
                        metadata=dict(curve.metadata))


def _kernel_matrix(r: np.ndarray, distance: np.ndarray, bandwidth: float,
                   reflect: bool = False) -> np.ndarray:
    kernel = epanechnikov(r[:, None] - distance[None, :], bandwidth)
    if reflect:
        kernel = kernel + epanechnikov(r[:, None] + distance[None, :], bandwidth)
    return kernel


def cross_pcf_planar(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                     intensity_j: IntensityArgument = None, bandwidth: Optional[float] = None,
                     correction: str = "translation") -> SummaryCurve:
    """交叉型非齐次对相关函数：核估计除以 2πr"""
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    rows = pattern.component_indices(i)
    cols = pattern.component_indices(j)
    lam, _ = intensity_at(pattern, j, cols, intensity_j)

    first, second, distance = planar_pairs(pattern, rows, cols, r[-1] + bandwidth)
    weights = edge_weights(pattern, first, second, distance,
                           "none" if correction == "border" else correction)
    weights = weights / _spread(lam, cols, pattern.n)[second]

    kernel = _kernel_matrix(r, distance, bandwidth)
    n_pairs = (kernel > 0).sum(axis=1)
    total = kernel @ weights
    with np.errstate(invalid="ignore", divide="ignore"):
        values = total / (rows.size * 2.0 * np.pi * r)
    values = np.where(n_pairs == 0, 0.0, values)
    values = np.where((r == 0) & (n_pairs > 0), np.nan, values)

    return SummaryCurve(r=r, values=values, theo=np.ones_like(r),
                        label=f"pcf_{_label(pattern, i)}{_label(pattern, j)}", n_pairs=n_pairs,
                        metadata={"correction": correction, "bandwidth": bandwidth,
                                  "domain": "planar"})


# ---- H、F、J 与 I 函数 ----

def _survival_products(distances: np.ndarray, factors: np.ndarray, r: np.ndarray) -> np.ndarray:
    """
    每个起点 u 的 Π_{d(u,x) ≤ r} factor(x)，形状 (起点数, len(r))

    distances 的每行是 u 到全部目标点的距离，自身对应的位置应为 inf
    """
    order = np.argsort(distances, axis=1, kind="stable")
    sorted_distance = np.take_along_axis(distances, order, axis=1)
    running = np.cumprod(factors[order], axis=1)
    running = np.concatenate([np.ones((len(distances), 1)), running], axis=1)
    result = np.empty((len(distances), len(r)))
    for row in range(len(distances)):
        count = np.searchsorted(sorted_distance[row], r, side="right")
        result[row] = running[row, count]
    return result


def _factors(lam: np.ndarray, minimum: float) -> np.ndarray:
    ratio = minimum / lam
    if np.any(ratio > 1.0 + 1e-12):
        logger.warning("λ̄/λ(x) 超过 1，权重因子已截断到 [0, 1]")
    return np.clip(1.0 - ratio, 0.0, 1.0)


def _origin_mask(origins: np.ndarray, window: Window, r: np.ndarray, correction: str) -> np.ndarray:
    """border 校正时只保留距边界至少 r 的起点"""
    if correction == "none":
        return np.ones((len(origins), len(r)), dtype=bool)
    if correction == "border":
        return window.boundary_distance(origins)[:, None] >= r[None, :]
    raise UnsupportedCorrection(f"H/F 只支持 none 或 border 校正，实际为 {correction}")


def _one_minus_average(products: np.ndarray, mask: np.ndarray) -> np.ndarray:
    count = mask.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, 1.0 - (products * mask).sum(axis=0) / count, np.nan)


def cross_H_planar(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                   intensity_j: IntensityArgument = None, correction: str = "none") -> SummaryCurve:
    """交叉型非齐次最近邻距离分布 H_ij(r) = 1 - 平均_u Π (1 - λ̄_j/λ_j(x))"""
    r = _grid(pattern, r)
    rows = pattern.component_indices(i)
    cols = pattern.component_indices(j)
    lam, minimum = intensity_at(pattern, j, cols, intensity_j)

    distances = pattern.pair_distances(rows, cols)
    distances[rows[:, None] == cols[None, :]] = np.inf
    products = _survival_products(distances, _factors(lam, minimum), r)
    values = _one_minus_average(products, _origin_mask(pattern.coords[rows], pattern.window, r, correction))

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), np.nan),
                        label=f"H_{_label(pattern, i)}{_label(pattern, j)}",
                        metadata={"correction": correction, "lambda_bar": minimum, "domain": "planar"})


def empty_space_planar(pattern: MarkedPattern, j=None, r: Optional[Sequence[float]] = None,
                       intensity_j: IntensityArgument = None, dummy: Optional[np.ndarray] = None,
                       correction: str = "none") -> SummaryCurve:
    """非齐次空白空间函数 F_j(r)，起点取哑网格"""
    r = _grid(pattern, r)
    cols = pattern.component_indices(j)
    lam, minimum = intensity_at(pattern, j, cols, intensity_j)
    if dummy is None:
        xmin, ymin, xmax, ymax = pattern.window.bounds
        dummy = planar_dummy_grid(pattern.window, min(xmax - xmin, ymax - ymin) / DUMMY_GRID_DIVISIONS)

    distances = np.sqrt(((dummy[:, None, :] - pattern.coords[cols][None, :, :]) ** 2).sum(axis=2))
    products = _survival_products(distances, _factors(lam, minimum), r)
    values = _one_minus_average(products, _origin_mask(dummy, pattern.window, r, correction))

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), np.nan),
                        label=f"F_{_label(pattern, j)}",
                        metadata={"correction": correction, "lambda_bar": minimum,
                                  "dummy_points": int(len(dummy)), "domain": "planar"})


def j_ratio(h: SummaryCurve, f: SummaryCurve, label: str) -> SummaryCurve:
    """J = (1 - H)/(1 - F)，1 - F 过小处为缺失"""
    survivor = 1.0 - f.values
    masked = ~(survivor >= J_MASK_THRESHOLD)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(masked, np.nan, (1.0 - h.values) / survivor)
    if masked.any():
        logger.debug(f"{label}: {int(masked.sum())} 个距离上 1-F 过小，已置为缺失")
    metadata = dict(h.metadata)
    metadata["masked_points"] = int(masked.sum())
    return SummaryCurve(r=h.r, values=values, theo=np.ones_like(h.r), label=label,
                        extras={"H": h.values, "F": f.values}, metadata=metadata)


def cross_J_planar(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                   intensity_j: IntensityArgument = None, dummy: Optional[np.ndarray] = None,
                   correction: str = "none") -> SummaryCurve:
    """交叉型非齐次 J 函数"""
    r = _grid(pattern, r)
    if intensity_j is None:
        intensity_j = constant_intensity(pattern, j)
    h = cross_H_planar(pattern, i, j, r, intensity_j, correction)
    f = empty_space_planar(pattern, j, r, intensity_j, dummy, correction)
    return j_ratio(h, f, f"J_{_label(pattern, i)}{_label(pattern, j)}")


def j_planar(pattern: MarkedPattern, r: Optional[Sequence[float]] = None,
             intensity: IntensityArgument = None, dummy: Optional[np.ndarray] = None,
             correction: str = "none") -> SummaryCurve:
    """不区分类型的 J 函数"""
    return cross_J_planar(pattern, None, None, r, intensity, dummy, correction)


def i_function(pattern: MarkedPattern, intensities: Optional[Dict[int, IntensityArgument]] = None,
               intensity_full: IntensityArgument = None, r: Optional[Sequence[float]] = None,
               dummy: Optional[np.ndarray] = None) -> SummaryCurve:
    """I(r) = Σ p_i J_ii(r) - J(r)，p_i = n_i/n"""
    r = _grid(pattern, r)
    intensities = intensities or {}
    counts = pattern.type_counts()
    if np.any(counts == 0):
        raise EmptyComponent("I 函数要求每个类型都非空")

    full = j_planar(pattern, r, intensity_full, dummy)
    values = -full.values
    for component in range(1, pattern.n_types + 1):
        auto = cross_J_planar(pattern, component, component, r, intensities.get(component), dummy)
        values = values + counts[component - 1] / pattern.n * auto.values

    return SummaryCurve(r=r, values=values, theo=np.zeros_like(r), label="I",
                        extras={"J": full.values}, metadata={"domain": "planar"})


# ---- 多类型标记：标记连接与混合函数 ----

def _type_kernel_sums(pattern: MarkedPattern, r: np.ndarray, bandwidth: float,
                      correction: str, reflect: bool = False):
    """所有有序点对的核权重矩阵、点对类型以及 n_pairs"""
    everything = np.arange(pattern.n)
    first, second, distance = planar_pairs(pattern, everything, everything, r[-1] + bandwidth)
    weights = edge_weights(pattern, first, second, distance,
                           "none" if correction == "border" else correction)
    kernel = _kernel_matrix(r, distance, bandwidth, reflect) * weights[None, :]
    return kernel, pattern.types[first], pattern.types[second], (kernel > 0).sum(axis=1)


def connection_curve(kernel: np.ndarray, type_u: np.ndarray, type_x: np.ndarray,
                     i: int, j: int, counts: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """p_ij = S_ij / S 与标记相等函数 Σ_k S_kk / S"""
    total = kernel.sum(axis=1)
    cross = kernel[:, (type_u == i) & (type_x == j)].sum(axis=1)
    same = kernel[:, type_u == type_x].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(total > 0, cross / total, np.nan)
        equality = np.where(total > 0, same / total, np.nan)
    return values, equality, float(counts[i - 1] * counts[j - 1]) / n ** 2


def mark_connection_planar(pattern: MarkedPattern, i, j, r: Optional[Sequence[float]] = None,
                           bandwidth: Optional[float] = None,
                           correction: str = "translation") -> SummaryCurve:
    """标记连接函数 p_ij(r) = p_i p_j ρ_ij(r)/ρ(r)，附带标记相等函数"""
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    counts = pattern.type_counts()
    i, j = pattern.resolve_type(i), pattern.resolve_type(j)
    logger.warning("标记连接函数按平稳过程解释，非齐次模式下请谨慎使用")

    kernel, type_u, type_x, n_pairs = _type_kernel_sums(pattern, r, bandwidth, correction)
    values, equality, theo = connection_curve(kernel, type_u, type_x, i, j, counts, pattern.n)

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), theo),
                        label=f"p_{_label(pattern, i)}{_label(pattern, j)}", n_pairs=n_pairs,
                        extras={"mark_equality": equality,
                                "mark_equality_theo": np.full(len(r), float(np.sum((counts / pattern.n) ** 2)))},
                        metadata={"bandwidth": bandwidth, "correction": correction,
                                  "stationary_use": True, "domain": "planar"})


def mingling_curve(distance: np.ndarray, unlike: np.ndarray, r: np.ndarray,
                   constant: float) -> Tuple[np.ndarray, np.ndarray]:
    """(r 内异类点对数 / r 内点对数) / c"""
    total = _cumulative(r, distance, np.ones(len(distance)))
    mixed = _cumulative(r, distance, unlike.astype(float))
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(total > 0, mixed / total / constant, np.nan)
    return values, total.astype(np.int64)


def mingling_planar(pattern: MarkedPattern, r: Optional[Sequence[float]] = None) -> SummaryCurve:
    """归一化标记混合函数 ν(r)，大于 1 表示异类吸引"""
    r = _grid(pattern, r)
    constant = require_mingling_constant(pattern)
    everything = np.arange(pattern.n)
    first, second, distance = planar_pairs(pattern, everything, everything, r[-1])
    values, n_pairs = mingling_curve(distance, pattern.types[first] != pattern.types[second],
                                     r, constant)
    return SummaryCurve(r=r, values=values, theo=np.ones_like(r), label="mingling",
                        n_pairs=n_pairs, metadata={"mingling_constant": constant, "domain": "planar"})


# ---- 实数标记：t_f 相关、标记加权 K、U 统计量 ----

def tf_correlation_planar(pattern: MarkedPattern, testfn: TestFunctionArgument = "stoyan",
                          r: Optional[Sequence[float]] = None, bandwidth: Optional[float] = None,
                          correction: str = "translation", column: int = 0) -> SummaryCurve:
    """t_f 相关函数：距离为 r 的点对上 t_f 的核回归均值除以 c_{t_f}"""
    function = _test_function(testfn)
    marks = pattern.mark(column)
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    if correction == "border":
        raise UnsupportedCorrection("t_f 相关函数不使用 border 校正")

    everything = np.arange(pattern.n)
    first, second, distance = planar_pairs(pattern, everything, everything, r[-1] + bandwidth)
    weights = _kernel_matrix(r, distance, bandwidth) * \
        edge_weights(pattern, first, second, distance, correction)[None, :]
    values = function.correlation(weights, marks[first], marks[second], marks)

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), function.null_value),
                        label=f"kappa_{function.name}", n_pairs=(weights > 0).sum(axis=1),
                        metadata={"test_function": function.name, "bandwidth": bandwidth,
                                  "correction": correction, "domain": "planar"})


def mark_weighted_K_planar(pattern: MarkedPattern, testfn: TestFunctionArgument = "stoyan",
                           intensity: IntensityArgument = None,
                           r: Optional[Sequence[float]] = None, correction: str = "translation",
                           bandwidth: Optional[float] = None, column: int = 0) -> SummaryCurve:
    """
    标记加权 K 函数 K_{t_f}(r)

    点对权重 t_f/c_{t_f}；未加权 K 走同一条计算路径，比值 K_{t_f}/K 存于 extras
    """
    function = _test_function(testfn)
    marks = pattern.mark(column)
    r = _grid(pattern, r)
    everything = np.arange(pattern.n)
    lam, _ = intensity_at(pattern, None, everything, intensity)

    first, second, distance = planar_pairs(pattern, everything, everything, r[-1])
    base = edge_weights(pattern, first, second, distance, correction) / lam[second]
    mark_weight = function.pair_weights(marks[first], marks[second], marks, distance,
                                        _bandwidth(pattern, bandwidth))

    weighted, counts = _k_sum(pattern, everything, r, first, distance, base * mark_weight, correction)
    unweighted, _ = _k_sum(pattern, everything, r, first, distance, base * np.ones_like(mark_weight),
                           correction)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(unweighted > 0, weighted / unweighted, np.nan)

    return SummaryCurve(r=r, values=weighted, theo=np.pi * r ** 2,
                        label=f"K_{function.name}", n_pairs=counts,
                        extras={"K": unweighted, "ratio": ratio},
                        metadata={"test_function": function.name, "correction": correction,
                                  "domain": "planar"})


def u_statistic_planar(pattern: MarkedPattern, testfn: TestFunctionArgument = "stoyan",
                       r: Optional[Sequence[float]] = None, bandwidth: Optional[float] = None,
                       correction: str = "translation", column: int = 0) -> SummaryCurve:
    """U(r) = λ² ρ(r) κ_{t_f}(r)，λ = n/|W|"""
    function = _test_function(testfn)
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    lam = pattern.intensity

    pcf = cross_pcf_planar(pattern, None, None, r, lam, bandwidth, correction)
    kappa = tf_correlation_planar(pattern, function, r, bandwidth, correction, column)
    values = lam ** 2 * pcf.values * kappa.values

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), lam ** 2 * function.null_value),
                        label=f"U_{function.name}", n_pairs=pcf.n_pairs,
                        extras={"pcf": pcf.values, "kappa": kappa.values},
                        metadata={"test_function": function.name, "bandwidth": bandwidth,
                                  "intensity": lam, "domain": "planar"})


def bivariate_mark_correlation(pattern: MarkedPattern, r: Optional[Sequence[float]] = None,
                               bandwidth: Optional[float] = None,
                               correction: str = "translation") -> SummaryCurve:
    """双变量标记相关 E[m_1(x) m_2(y) | d = r] / (μ_1 μ_2)，对点对顺序对称化"""
    if pattern.n_marks < 2:
        raise NoMarks("双变量标记相关需要每个点两个实数标记")
    first_marks, second_marks = pattern.mark(0), pattern.mark(1)
    constant = float(first_marks.mean() * second_marks.mean())
    scale = float(np.mean(np.abs(first_marks)) * np.mean(np.abs(second_marks)))
    if scale <= 0 or abs(constant) <= 1e-12 * scale:
        raise ZeroNormalizer("μ_1 μ_2 为零")

    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    everything = np.arange(pattern.n)
    first, second, distance = planar_pairs(pattern, everything, everything, r[-1] + bandwidth)
    weights = _kernel_matrix(r, distance, bandwidth) * \
        edge_weights(pattern, first, second, distance, correction)[None, :]
    products = bivariate_values(first_marks[first], first_marks[second],
                                second_marks[first], second_marks[second])
    values = weighted_average(weights, products) / constant

    return SummaryCurve(r=r, values=values, theo=np.ones_like(r), label="kappa_m1m2",
                        n_pairs=(weights > 0).sum(axis=1),
                        metadata={"bandwidth": bandwidth, "correction": correction,
                                  "domain": "planar"})
