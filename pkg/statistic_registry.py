"""
统计量注册表
命令行与包络使用的统计量名称 → 计算函数；统一处理距离网格、带宽、强度与类型参数
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core_data_structures import SummaryCurve, make_r_grid
from exceptions import ConfigError
from intensity import intensity_network, kernel_intensity_planar
from network_summaries import (
    cross_H_network, cross_J_network, cross_K_network, cross_pcf_network, default_network_grid,
    empty_space_network, mark_connection_network, mark_equality_network, mark_weighted_K_network,
    mingling_network, tf_correlation_network, u_statistic_network
)
from patterns import BANDWIDTH_COEFFICIENT, MarkedPattern
from planar_summaries import (
    bivariate_mark_correlation, cross_H_planar, cross_J_planar, cross_K_planar, cross_pcf_planar,
    default_planar_grid, empty_space_planar, i_function, l_function, mark_connection_planar,
    mark_weighted_K_planar, mingling_planar, tf_correlation_planar, u_statistic_planar
)


@dataclass
class StatisticOptions:
    """统计量的可选参数"""
    i: Optional[str] = None                    # 类型 i；None 表示全部点
    j: Optional[str] = None
    test_function: str = "stoyan"
    bandwidth: Optional[float] = None
    kernel_coefficient: float = BANDWIDTH_COEFFICIENT
    correction: str = "translation"
    intensity: str = "constant"
    column: int = 0
    grid: Optional[Tuple[float, float, int]] = None
    grid_count: int = 129

    def r_grid(self, pattern: MarkedPattern, network: bool) -> np.ndarray:
        if self.grid is not None:
            return make_r_grid(*self.grid)
        if network:
            return default_network_grid(pattern, self.grid_count)
        return default_planar_grid(pattern, self.grid_count)

    def kernel_bandwidth(self, pattern: MarkedPattern) -> float:
        if self.bandwidth is not None:
            return self.bandwidth
        return pattern.default_bandwidth(self.kernel_coefficient)


@dataclass
class StatisticEntry:
    name: str
    network: bool                              # True: 网络统计量；False: 平面统计量
    compute: Callable[[MarkedPattern, np.ndarray, StatisticOptions], SummaryCurve] = field(repr=False)
    description: str = ""
    needs_types: bool = False

    def __call__(self, pattern: MarkedPattern, options: Optional[StatisticOptions] = None,
                 r: Optional[np.ndarray] = None) -> SummaryCurve:
        options = options or StatisticOptions()
        if self.network and not pattern.is_network:
            raise ConfigError(f"统计量 {self.name} 需要网络上的点模式")
        if self.needs_types and pattern.types is None:
            raise ConfigError(f"统计量 {self.name} 需要带类型标签的点模式")
        if not self.network:
            pattern = pattern.planar_view()
        if r is None:
            r = options.r_grid(pattern, self.network)
        return self.compute(pattern, r, options)


def _planar_intensity(pattern: MarkedPattern, component, options: StatisticOptions):
    if options.intensity == "constant":
        return None
    if options.intensity == "kernel":
        return kernel_intensity_planar(pattern, component)
    raise ConfigError(f"平面统计量不支持强度模式 {options.intensity}")


def _network_intensity(pattern: MarkedPattern, component, options: StatisticOptions):
    if options.intensity == "constant":
        return None
    if options.intensity == "lixel-kernel":
        return intensity_network(pattern, "lixel-kernel", component=component)
    raise ConfigError(f"网络统计量不支持强度模式 {options.intensity}")


def _pair_types(options: StatisticOptions) -> Tuple[str, str]:
    if options.i is None or options.j is None:
        raise ConfigError("标记连接函数需要同时给出类型 i 与 j")
    return options.i, options.j


STATISTICS: Dict[str, StatisticEntry] = {}


def register(name: str, network: bool, description: str, needs_types: bool = False):
    def decorator(compute):
        STATISTICS[name] = StatisticEntry(name, network, compute, description, needs_types)
        return compute
    return decorator


# ---- 平面 ----

@register("K", False, "交叉/点型/单变量 K 函数")
def _k_planar(p, r, o):
    return cross_K_planar(p, o.i, o.j, r, _planar_intensity(p, o.j, o), o.correction)


@register("L", False, "L = sqrt(K/π)")
def _l_planar(p, r, o):
    return l_function(_k_planar(p, r, o))


@register("pcf", False, "对相关函数")
def _pcf_planar(p, r, o):
    return cross_pcf_planar(p, o.i, o.j, r, _planar_intensity(p, o.j, o),
                            o.kernel_bandwidth(p), o.correction)


@register("H", False, "最近邻距离分布")
def _h_planar(p, r, o):
    return cross_H_planar(p, o.i, o.j, r, _planar_intensity(p, o.j, o))


@register("F", False, "空白空间函数")
def _f_planar(p, r, o):
    return empty_space_planar(p, o.j, r, _planar_intensity(p, o.j, o))


@register("J", False, "J = (1-H)/(1-F)")
def _j_planar(p, r, o):
    return cross_J_planar(p, o.i, o.j, r, _planar_intensity(p, o.j, o))


@register("I", False, "I 函数", needs_types=True)
def _i_planar(p, r, o):
    return i_function(p, r=r)


@register("mark_connection", False, "标记连接函数 p_ij", needs_types=True)
def _connection_planar(p, r, o):
    i, j = _pair_types(o)
    return mark_connection_planar(p, i, j, r, o.kernel_bandwidth(p), o.correction)


@register("mingling", False, "混合函数", needs_types=True)
def _mingling_planar(p, r, o):
    return mingling_planar(p, r)


@register("tf_correlation", False, "t_f 标记相关函数")
def _tf_planar(p, r, o):
    return tf_correlation_planar(p, o.test_function, r, o.kernel_bandwidth(p), o.correction, o.column)


@register("mark_weighted_K", False, "标记加权 K 函数")
def _weighted_k_planar(p, r, o):
    return mark_weighted_K_planar(p, o.test_function, _planar_intensity(p, None, o), r,
                                  o.correction, o.kernel_bandwidth(p), o.column)


@register("U", False, "U 统计量 λ²ρκ")
def _u_planar(p, r, o):
    return u_statistic_planar(p, o.test_function, r, o.kernel_bandwidth(p), o.correction, o.column)


@register("bivariate_mark_correlation", False, "两个实数标记的交叉相关")
def _bivariate_planar(p, r, o):
    return bivariate_mark_correlation(p, r, o.kernel_bandwidth(p), o.correction)


# ---- 网络 ----

@register("K_network", True, "几何校正的交叉/点型/单变量 K^L")
def _k_network(p, r, o):
    return cross_K_network(p, o.i, o.j, r, _network_intensity(p, o.j, o))


@register("pcf_network", True, "网络对相关函数")
def _pcf_network(p, r, o):
    return cross_pcf_network(p, o.i, o.j, r, _network_intensity(p, o.j, o), o.kernel_bandwidth(p))


@register("H_network", True, "网络最近邻距离分布")
def _h_network(p, r, o):
    return cross_H_network(p, o.i, o.j, r, _network_intensity(p, o.j, o))


@register("F_network", True, "网络空白空间函数")
def _f_network(p, r, o):
    return empty_space_network(p, o.j, r, _network_intensity(p, o.j, o))


@register("J_network", True, "网络 J 函数")
def _j_network(p, r, o):
    return cross_J_network(p, o.i, o.j, r, _network_intensity(p, o.j, o))


@register("mark_connection_network", True, "网络标记连接函数", needs_types=True)
def _connection_network(p, r, o):
    i, j = _pair_types(o)
    return mark_connection_network(p, i, j, r, o.kernel_bandwidth(p))


@register("mark_equality_network", True, "网络标记相等函数", needs_types=True)
def _equality_network(p, r, o):
    return mark_equality_network(p, r, o.kernel_bandwidth(p))


@register("mingling_network", True, "网络混合函数", needs_types=True)
def _mingling_network(p, r, o):
    return mingling_network(p, r)


@register("tf_correlation_network", True, "网络 t_f 标记相关函数")
def _tf_network(p, r, o):
    return tf_correlation_network(p, o.test_function, r, o.kernel_bandwidth(p), o.column)


@register("mark_weighted_K_network", True, "网络标记加权 K 函数")
def _weighted_k_network(p, r, o):
    return mark_weighted_K_network(p, o.test_function, _network_intensity(p, None, o), r,
                                   o.kernel_bandwidth(p), o.column)


@register("U_network", True, "网络 U 统计量")
def _u_network(p, r, o):
    return u_statistic_network(p, o.test_function, r, o.kernel_bandwidth(p), o.column)


def get_statistic(name: str) -> StatisticEntry:
    if name not in STATISTICS:
        raise ConfigError(f"未知统计量: {name}，可选 {sorted(STATISTICS)}")
    return STATISTICS[name]


def available_statistics(network: Optional[bool] = None) -> List[str]:
    return sorted(name for name, entry in STATISTICS.items()
                  if network is None or entry.network == network)


def bind_statistic(name: str, options: Optional[StatisticOptions] = None,
                   r: Optional[np.ndarray] = None) -> Callable[[MarkedPattern], SummaryCurve]:
    """
    固定参数后得到单参数统计量，供包络使用

    距离网格在第一次调用（观测模式）时确定，之后的模拟模式沿用同一网格
    """
    entry = get_statistic(name)
    options = options or StatisticOptions()
    fixed = {"r": None if r is None else np.asarray(r, dtype=float)}

    def statistic(pattern: MarkedPattern) -> SummaryCurve:
        if fixed["r"] is None:
            target = pattern if entry.network else pattern.planar_view()
            fixed["r"] = options.r_grid(target, entry.network)
        return entry(pattern, options, fixed["r"])

    statistic.__name__ = name
    return statistic
