"""
网络汇总统计模块
线性网络上带几何校正因子 ∇ 的汇总特征：交叉/点型 K 与对相关函数、
标记连接与标记相等、混合函数、H/F/J、t_f 相关、标记加权 K 与 U 统计量
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from core_data_structures import SummaryCurve, dummy_grid_arrays, validate_r_grid
from exceptions import ConfigError
from intensity import constant_intensity
from patterns import MarkedPattern, require_mingling_constant
from planar_summaries import (
    IntensityArgument, TestFunctionArgument, _bandwidth, _cumulative, _factors, _kernel_matrix,
    _label, _spread, _test_function, connection_curve, intensity_at, j_ratio, mingling_curve
)


# F^L 哑网格至少包含的位置数
MIN_DUMMY_LOCATIONS = 1000


def _require_network(pattern: MarkedPattern) -> None:
    if not pattern.is_network:
        raise ConfigError("网络汇总统计需要网络上的点模式")


def default_network_grid(pattern: MarkedPattern, count: int = 129) -> np.ndarray:
    """[0, 网络直径/4] 上的等距网格"""
    return np.linspace(0.0, 0.25 * pattern.engine.diameter(), count)


def _grid(pattern: MarkedPattern, r: Optional[Sequence[float]]) -> np.ndarray:
    _require_network(pattern)
    return default_network_grid(pattern) if r is None else validate_r_grid(r)


def network_pairs(pattern: MarkedPattern, rows: np.ndarray, cols: np.ndarray,
                  max_distance: float) -> Tuple[np.ndarray, ...]:
    """
    最短路径距离不超过 max_distance 的有序点对 (u, x)，u≠x，以及校正因子 ∇

    返回 (u 编号, x 编号, 距离, ∇)；从度量引擎的点对表中按分量筛选
    """
    first, second, distance, nabla = pattern.engine.pairs_within(max_distance)
    if rows.size == pattern.n and cols.size == pattern.n:
        return first, second, distance, nabla
    in_rows = np.zeros(pattern.n, dtype=bool)
    in_rows[rows] = True
    in_cols = np.zeros(pattern.n, dtype=bool)
    in_cols[cols] = True
    keep = in_rows[first] & in_cols[second]
    return first[keep], second[keep], distance[keep], nabla[keep]


def _all_pairs(pattern: MarkedPattern, max_distance: float) -> Tuple[np.ndarray, ...]:
    everything = np.arange(pattern.n)
    return network_pairs(pattern, everything, everything, max_distance)


# ---- K 与对相关函数 ----

def cross_K_network(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                    intensity_j: IntensityArgument = None, corrected: bool = True) -> SummaryCurve:
    """
    几何校正的交叉型非齐次网络 K 函数

    (1/n_i) ΣΣ 1{d_L(u,x) ≤ r} ∇{u, d_L(u,x)} / λ_j(x)；corrected=False 时 ∇ 取 1
    """
    r = _grid(pattern, r)
    rows = pattern.component_indices(i)
    cols = pattern.component_indices(j)
    lam, _ = intensity_at(pattern, j, cols, intensity_j)

    first, second, distance, nabla = network_pairs(pattern, rows, cols, r[-1])
    weights = (nabla if corrected else np.ones_like(nabla)) / _spread(lam, cols, pattern.n)[second]
    values = _cumulative(r, distance, weights) / rows.size

    return SummaryCurve(r=r, values=values, theo=r.copy(),
                        label=f"KL_{_label(pattern, i)}{_label(pattern, j)}",
                        n_pairs=_cumulative(r, distance, np.ones_like(distance)).astype(np.int64),
                        metadata={"corrected": corrected, "domain": "network"})


def dot_K_network(pattern: MarkedPattern, i, r: Optional[Sequence[float]] = None,
                  intensity: IntensityArgument = None) -> SummaryCurve:
    """点型网络 K 函数 K^L_i•，λ 为整个过程的强度"""
    return cross_K_network(pattern, i, None, r, intensity)


def k_network(pattern: MarkedPattern, intensity: IntensityArgument = None,
              r: Optional[Sequence[float]] = None) -> SummaryCurve:
    """不区分类型的网络 K 函数"""
    return cross_K_network(pattern, None, None, r, intensity)


def _network_kernel(r: np.ndarray, distance: np.ndarray, nabla: np.ndarray,
                    bandwidth: float) -> np.ndarray:
    """在 r=0 处反射的 Epanechnikov 核乘以 ∇"""
    return _kernel_matrix(r, distance, bandwidth, reflect=True) * nabla[None, :]


def cross_pcf_network(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                      intensity_j: IntensityArgument = None,
                      bandwidth: Optional[float] = None) -> SummaryCurve:
    """交叉型网络对相关函数，没有点对贡献的距离上为缺失"""
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    rows = pattern.component_indices(i)
    cols = pattern.component_indices(j)
    lam, _ = intensity_at(pattern, j, cols, intensity_j)

    first, second, distance, nabla = network_pairs(pattern, rows, cols, r[-1] + bandwidth)
    kernel = _network_kernel(r, distance, nabla, bandwidth)
    n_pairs = (kernel > 0).sum(axis=1)
    values = kernel @ (1.0 / _spread(lam, cols, pattern.n)[second]) / rows.size
    values = np.where(n_pairs > 0, values, np.nan)

    return SummaryCurve(r=r, values=values, theo=np.ones_like(r),
                        label=f"pcfL_{_label(pattern, i)}{_label(pattern, j)}", n_pairs=n_pairs,
                        metadata={"bandwidth": bandwidth, "domain": "network"})


def pcf_network(pattern: MarkedPattern, intensity: IntensityArgument = None,
                r: Optional[Sequence[float]] = None, bandwidth: Optional[float] = None) -> SummaryCurve:
    return cross_pcf_network(pattern, None, None, r, intensity, bandwidth)


# ---- 标记连接、标记相等与混合函数 ----

def _type_kernel(pattern: MarkedPattern, r: np.ndarray, bandwidth: float):
    first, second, distance, nabla = _all_pairs(pattern, r[-1] + bandwidth)
    kernel = _network_kernel(r, distance, nabla, bandwidth)
    return kernel, pattern.types[first], pattern.types[second], (kernel > 0).sum(axis=1)


def mark_connection_network(pattern: MarkedPattern, i, j, r: Optional[Sequence[float]] = None,
                            bandwidth: Optional[float] = None) -> SummaryCurve:
    """网络标记连接函数 p^L_ij = λ_i λ_j ρ^L_ij / (λ² ρ^L)，λ_i = n_i/|L|"""
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    counts = pattern.type_counts()
    i, j = pattern.resolve_type(i), pattern.resolve_type(j)
    logger.warning("网络标记连接函数按常数强度解释，非齐次模式下请谨慎使用")

    kernel, type_u, type_x, n_pairs = _type_kernel(pattern, r, bandwidth)
    values, equality, theo = connection_curve(kernel, type_u, type_x, i, j, counts, pattern.n)

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), theo),
                        label=f"pL_{_label(pattern, i)}{_label(pattern, j)}", n_pairs=n_pairs,
                        extras={"mark_equality": equality},
                        metadata={"bandwidth": bandwidth, "stationary_use": True, "domain": "network"})


def mark_equality_network(pattern: MarkedPattern, r: Optional[Sequence[float]] = None,
                          bandwidth: Optional[float] = None) -> SummaryCurve:
    """网络标记相等函数 p^L = Σ_i p^L_ii，理论值 Σ p_i²"""
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    counts = pattern.type_counts()
    kernel, type_u, type_x, n_pairs = _type_kernel(pattern, r, bandwidth)
    _, equality, _ = connection_curve(kernel, type_u, type_x, 1, 1, counts, pattern.n)

    return SummaryCurve(r=r, values=equality,
                        theo=np.full(len(r), float(np.sum((counts / pattern.n) ** 2))),
                        label="pL_equal", n_pairs=n_pairs,
                        metadata={"bandwidth": bandwidth, "domain": "network"})


def mingling_network(pattern: MarkedPattern, r: Optional[Sequence[float]] = None) -> SummaryCurve:
    """网络标记混合函数，归一化常数与平面版本相同"""
    r = _grid(pattern, r)
    constant = require_mingling_constant(pattern)
    first, second, distance, _ = _all_pairs(pattern, r[-1])
    values, n_pairs = mingling_curve(distance, pattern.types[first] != pattern.types[second],
                                     r, constant)
    return SummaryCurve(r=r, values=values, theo=np.ones_like(r), label="minglingL",
                        n_pairs=n_pairs, metadata={"mingling_constant": constant, "domain": "network"})


# ---- H、F、J ----

def _network_survival(origins: np.ndarray, first: np.ndarray, distance: np.ndarray,
                      factor: np.ndarray, r: np.ndarray) -> np.ndarray:
    """每个起点的 Π_{d ≤ r} factor，factor 随点对变化（含 ∇）"""
    products = np.ones((len(origins), len(r)))
    for row, origin in enumerate(origins):
        selected = first == origin
        if not selected.any():
            continue
        order = np.argsort(distance[selected], kind="stable")
        running = np.concatenate([[1.0], np.cumprod(factor[selected][order])])
        products[row] = running[np.searchsorted(distance[selected][order], r, side="right")]
    return products


def cross_H_network(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                    intensity_j: IntensityArgument = None) -> SummaryCurve:
    """网络 H^L_ij：因子 1 - (λ̄_j/λ_j(x))·∇{u, d_L(u,x)}"""
    r = _grid(pattern, r)
    rows = pattern.component_indices(i)
    cols = pattern.component_indices(j)
    lam, minimum = intensity_at(pattern, j, cols, intensity_j)

    first, second, distance, nabla = network_pairs(pattern, rows, cols, r[-1])
    ratio = 1.0 - _factors(_spread(lam, cols, pattern.n)[second], minimum)
    factor = np.clip(1.0 - ratio * nabla, 0.0, 1.0)
    products = _network_survival(rows, first, distance, factor, r)

    return SummaryCurve(r=r, values=1.0 - products.mean(axis=0), theo=np.full(len(r), np.nan),
                        label=f"HL_{_label(pattern, i)}{_label(pattern, j)}",
                        metadata={"lambda_bar": minimum, "domain": "network"})


def dummy_spacing(pattern: MarkedPattern) -> float:
    """默认哑网格间距 min(|L|/(5n), |L|/1000)"""
    length = pattern.network.total_length
    return min(length / (5.0 * max(pattern.n, 1)), length / MIN_DUMMY_LOCATIONS)


def empty_space_network(pattern: MarkedPattern, j=None, r: Optional[Sequence[float]] = None,
                        intensity_j: IntensityArgument = None,
                        spacing: Optional[float] = None) -> SummaryCurve:
    """网络空白空间函数 F^L_j，起点为哑网格位置"""
    r = _grid(pattern, r)
    cols = pattern.component_indices(j)
    lam, minimum = intensity_at(pattern, j, cols, intensity_j)

    dummy_segments, dummy_offsets = dummy_grid_arrays(pattern.network, spacing or dummy_spacing(pattern))
    engine = pattern.engine.extended(dummy_segments, dummy_offsets)
    origins = np.arange(pattern.n, engine.n_sites)

    distances = engine.cross_distances(origins, cols)
    keep = np.isfinite(distances) & (distances <= r[-1])
    row_index, col_index = np.nonzero(keep)
    distance = distances[row_index, col_index]
    nabla = np.empty(len(distance))
    floor = 4.0 * engine.tolerance
    for position in np.unique(row_index):
        selected = row_index == position
        counts = engine.perimeter_counts(int(origins[position]), np.maximum(distance[selected], floor))
        nabla[selected] = 1.0 / np.maximum(counts, 1)

    ratio = 1.0 - _factors(lam[col_index], minimum)
    factor = np.clip(1.0 - ratio * nabla, 0.0, 1.0)
    products = _network_survival(np.arange(len(origins)), row_index, distance, factor, r)

    return SummaryCurve(r=r, values=1.0 - products.mean(axis=0), theo=np.full(len(r), np.nan),
                        label=f"FL_{_label(pattern, j)}",
                        metadata={"lambda_bar": minimum, "dummy_points": int(len(origins)),
                                  "domain": "network"})


def cross_J_network(pattern: MarkedPattern, i=None, j=None, r: Optional[Sequence[float]] = None,
                    intensity_j: IntensityArgument = None,
                    spacing: Optional[float] = None) -> SummaryCurve:
    """J^L_ij = (1 - H^L_ij)/(1 - F^L_j)，J > 1 表示 j 类点倾向出现在 i 类点周围"""
    r = _grid(pattern, r)
    if intensity_j is None:
        intensity_j = constant_intensity(pattern, j)
    h = cross_H_network(pattern, i, j, r, intensity_j)
    f = empty_space_network(pattern, j, r, intensity_j, spacing)
    return j_ratio(h, f, f"JL_{_label(pattern, i)}{_label(pattern, j)}")


def dot_H_network(pattern: MarkedPattern, i, r: Optional[Sequence[float]] = None,
                  intensity: IntensityArgument = None) -> SummaryCurve:
    return cross_H_network(pattern, i, None, r, intensity)


def dot_J_network(pattern: MarkedPattern, i, r: Optional[Sequence[float]] = None,
                  intensity: IntensityArgument = None, spacing: Optional[float] = None) -> SummaryCurve:
    """点型 J^L_i•；k = 1 时与整个过程的 J^L 相同"""
    return cross_J_network(pattern, i, None, r, intensity, spacing)


def j_network(pattern: MarkedPattern, intensity: IntensityArgument = None,
              r: Optional[Sequence[float]] = None, spacing: Optional[float] = None) -> SummaryCurve:
    return cross_J_network(pattern, None, None, r, intensity, spacing)


# ---- 实数标记 ----

def tf_correlation_network(pattern: MarkedPattern, testfn: TestFunctionArgument = "stoyan",
                           r: Optional[Sequence[float]] = None, bandwidth: Optional[float] = None,
                           column: int = 0) -> SummaryCurve:
    """网络 t_f 相关函数，分子分母均以 ∇ 加权"""
    function = _test_function(testfn, network=True)
    marks = pattern.mark(column)
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)

    first, second, distance, nabla = _all_pairs(pattern, r[-1] + bandwidth)
    weights = _network_kernel(r, distance, nabla, bandwidth)
    values = function.correlation(weights, marks[first], marks[second], marks)

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), function.null_value),
                        label=f"kappaL_{function.name}", n_pairs=(weights > 0).sum(axis=1),
                        metadata={"test_function": function.name, "bandwidth": bandwidth,
                                  "domain": "network"})


def mark_weighted_K_network(pattern: MarkedPattern, testfn: TestFunctionArgument = "stoyan",
                            intensity: IntensityArgument = None,
                            r: Optional[Sequence[float]] = None,
                            bandwidth: Optional[float] = None, column: int = 0) -> SummaryCurve:
    """
    网络标记加权 K 函数

    intensity 为空时取齐次 λ^L = n/|L|，给出强度曲面时逐点对除以 λ^L(x)
    """
    function = _test_function(testfn, network=True)
    marks = pattern.mark(column)
    r = _grid(pattern, r)
    everything = np.arange(pattern.n)
    lam, _ = intensity_at(pattern, None, everything, intensity)

    first, second, distance, nabla = _all_pairs(pattern, r[-1])
    base = nabla / lam[second]
    mark_weight = function.pair_weights(marks[first], marks[second], marks, distance,
                                        _bandwidth(pattern, bandwidth))
    weighted = _cumulative(r, distance, base * mark_weight) / pattern.n
    unweighted = _cumulative(r, distance, base * np.ones_like(mark_weight)) / pattern.n
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(unweighted > 0, weighted / unweighted, np.nan)

    return SummaryCurve(r=r, values=weighted, theo=r.copy(), label=f"KL_{function.name}",
                        n_pairs=_cumulative(r, distance, np.ones_like(distance)).astype(np.int64),
                        extras={"K": unweighted, "ratio": ratio},
                        metadata={"test_function": function.name,
                                  "homogeneous": intensity is None or isinstance(intensity, (int, float)),
                                  "domain": "network"})


def u_statistic_network(pattern: MarkedPattern, testfn: TestFunctionArgument = "stoyan",
                        r: Optional[Sequence[float]] = None, bandwidth: Optional[float] = None,
                        column: int = 0) -> SummaryCurve:
    """U^L(r) = (λ^L)² ρ^L(r) κ^L_{t_f}(r)"""
    function = _test_function(testfn, network=True)
    r = _grid(pattern, r)
    bandwidth = _bandwidth(pattern, bandwidth)
    lam = pattern.intensity

    pcf = cross_pcf_network(pattern, None, None, r, lam, bandwidth)
    kappa = tf_correlation_network(pattern, function, r, bandwidth, column)
    values = lam ** 2 * pcf.values * kappa.values

    return SummaryCurve(r=r, values=values, theo=np.full(len(r), lam ** 2 * function.null_value),
                        label=f"UL_{function.name}", n_pairs=pcf.n_pairs,
                        extras={"pcf": pcf.values, "kappa": kappa.values},
                        metadata={"test_function": function.name, "bandwidth": bandwidth,
                                  "intensity": lam, "domain": "network"})
