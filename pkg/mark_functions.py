"""
检验函数模块
实数标记的检验函数 t_f 及其归一化常数，以及基于权重矩阵的 t_f 相关估计
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional

import numpy as np
from loguru import logger

from core_data_structures import epanechnikov
from exceptions import ConfigError, InvalidMarks, ZeroNormalizer


# 判定归一化常数为零的相对容差
ZERO_TOLERANCE = 1e-12

# 条件均值 μ_m(r) 插值用的网格点数
CONDITIONAL_MEAN_GRID = 256


def weighted_average(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    """按行加权平均，权重和为零处为 nan"""
    total = weights.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, (weights @ values) / total, np.nan)


class TestFunction(ABC):
    """检验函数基类：t_f(m(u), m(x)) 与归一化常数 c_{t_f}"""

    __test__ = False  # 避免被 pytest 当作测试类收集

    name: str = ""
    description: str = ""
    null_value: float = 1.0       # 标记独立时的理论值
    on_network: bool = True       # 是否提供网络版本

    @abstractmethod
    def values(self, m_u: np.ndarray, m_x: np.ndarray, marks: np.ndarray) -> np.ndarray:
        """逐点对的检验函数值"""
        pass

    @abstractmethod
    def raw_normalizer(self, marks: np.ndarray) -> float:
        pass

    def normalizer_scale(self, marks: np.ndarray) -> float:
        """判断归一化常数为零时使用的量级"""
        return float(np.mean(marks * marks))

    def normalizer(self, marks: np.ndarray) -> float:
        """归一化常数，为零时抛出 ZeroNormalizer"""
        value = self.raw_normalizer(marks)
        scale = self.normalizer_scale(marks)
        if scale <= 0 or abs(value) <= ZERO_TOLERANCE * scale:
            raise ZeroNormalizer(f"{self.name} 的归一化常数为零")
        return value

    def correlation(self, weights: np.ndarray, m_u: np.ndarray, m_x: np.ndarray,
                    marks: np.ndarray) -> np.ndarray:
        """
        t_f 相关函数估计

        weights 为 (距离网格, 点对) 的核权重矩阵，逐行做 Nadaraya-Watson 平均后除以 c_{t_f}
        """
        constant = self.normalizer(marks)
        return weighted_average(weights, self.values(m_u, m_x, marks)) / constant

    def pair_weights(self, m_u: np.ndarray, m_x: np.ndarray, marks: np.ndarray,
                     pair_distance: Optional[np.ndarray] = None,
                     bandwidth: Optional[float] = None) -> np.ndarray:
        """带标记加权 K 函数中的点对权重 t_f / c_{t_f}"""
        return self.values(m_u, m_x, marks) / self.normalizer(marks)


class VariogramFunction(TestFunction):
    name = "variogram"
    description = "标记变差函数 γ_mm"

    def values(self, m_u, m_x, marks):
        return 0.5 * (m_u - m_x) ** 2

    def raw_normalizer(self, marks):
        return float(np.var(marks))


class StoyanFunction(TestFunction):
    name = "stoyan"
    description = "Stoyan 标记相关函数 κ_mm"

    def values(self, m_u, m_x, marks):
        return m_u * m_x

    def raw_normalizer(self, marks):
        return float(np.mean(marks)) ** 2


class LeftMarkFunction(TestFunction):
    name = "rmark_left"
    description = "r-标记相关函数 κ_m•（第一个点的标记）"

    def values(self, m_u, m_x, marks):
        return np.asarray(m_u, dtype=float) * np.ones_like(m_x)

    def raw_normalizer(self, marks):
        return float(np.mean(marks))

    def normalizer_scale(self, marks):
        return float(np.mean(np.abs(marks)))


class RightMarkFunction(LeftMarkFunction):
    name = "rmark_right"
    description = "r-标记相关函数 κ_•m（第二个点的标记）"

    def values(self, m_u, m_x, marks):
        return np.ones_like(m_u) * np.asarray(m_x, dtype=float)


class BeisbartFunction(TestFunction):
    name = "beisbart"
    description = "Beisbart-Kerscher 标记相关函数"

    def values(self, m_u, m_x, marks):
        return m_u + m_x

    def raw_normalizer(self, marks):
        return 2.0 * float(np.mean(marks))

    def normalizer_scale(self, marks):
        return float(np.mean(np.abs(marks)))


class IshamFunction(TestFunction):
    name = "isham"
    description = "Isham 标记相关函数"
    null_value = 0.0

    def values(self, m_u, m_x, marks):
        return m_u * m_x - float(np.mean(marks)) ** 2

    def raw_normalizer(self, marks):
        return float(np.var(marks))


class CovarianceFunction(IshamFunction):
    name = "covariance"
    description = "Stoyan 标记协方差函数（不归一化）"

    def raw_normalizer(self, marks):
        return 1.0

    def normalizer_scale(self, marks):
        return 1.0


class SchlatherFunction(TestFunction):
    """Schlather 的 I：以条件均值 μ_m(r) 中心化"""
    name = "schlather_I"
    description = "Schlather 的 I 函数"
    null_value = 0.0

    def values(self, m_u, m_x, marks, centre=None):
        centre = float(np.mean(marks)) if centre is None else centre
        return (m_u - centre) * (m_x - centre)

    def raw_normalizer(self, marks):
        return float(np.var(marks))

    def correlation(self, weights, m_u, m_x, marks):
        constant = self.normalizer(marks)
        # 同一组权重下 Σw(m_u-μ)(m_x-μ)/Σw = Σw m_u m_x/Σw - μ(r)^2
        centre = weighted_average(weights, 0.5 * (m_u + m_x))
        product = weighted_average(weights, m_u * m_x)
        return (product - centre ** 2) / constant

    def pair_weights(self, m_u, m_x, marks, pair_distance=None, bandwidth=None):
        if pair_distance is None or bandwidth is None:
            raise ValueError("Schlather 的 I 需要点对距离与带宽来估计 μ_m(r)")
        finite = np.isfinite(pair_distance)
        top = float(pair_distance[finite].max()) if finite.any() else 0.0
        grid = np.linspace(0.0, top, CONDITIONAL_MEAN_GRID)
        kernel = epanechnikov(grid[:, None] - pair_distance[None, finite], bandwidth)
        centre_grid = weighted_average(kernel, 0.5 * (m_u + m_x)[finite])
        # 核窗口内没有点对的网格点退回全局均值
        centre_grid = np.where(np.isfinite(centre_grid), centre_grid, float(np.mean(marks)))
        centre = np.interp(np.where(finite, pair_distance, top), grid, centre_grid)
        return self.values(m_u, m_x, marks, centre) / self.normalizer(marks)


class ShimataniFunction(SchlatherFunction):
    """Shimatani 的 I：以全局均值中心化"""
    name = "shimatani_I"
    description = "Shimatani 的 I 函数"

    def correlation(self, weights, m_u, m_x, marks):
        return TestFunction.correlation(self, weights, m_u, m_x, marks)

    def pair_weights(self, m_u, m_x, marks, pair_distance=None, bandwidth=None):
        return TestFunction.pair_weights(self, m_u, m_x, marks)


class DifferentiationFunction(TestFunction):
    """标记分化函数，只用于平面模式且要求标记为正"""
    name = "differentiation"
    description = "标记分化函数 Δ_mm"
    on_network = False

    def values(self, m_u, m_x, marks):
        return 1.0 - np.minimum(m_u, m_x) / np.maximum(m_u, m_x)

    def raw_normalizer(self, marks):
        if np.any(marks <= 0):
            raise InvalidMarks("标记分化函数要求所有标记为正")
        n = len(marks)
        if n < 2:
            return 0.0
        ordered = np.sort(marks)
        # R_1 = 0, R_i 为前 i-1 个有序标记之和
        partial = np.concatenate([[0.0], np.cumsum(ordered)[:-1]])
        return float(1.0 - 2.0 / (n * (n - 1)) * np.sum(partial / ordered))

    def normalizer_scale(self, marks):
        return 1.0


TEST_FUNCTIONS: Dict[str, TestFunction] = {
    function.name: function for function in (
        VariogramFunction(), StoyanFunction(), LeftMarkFunction(), RightMarkFunction(),
        BeisbartFunction(), IshamFunction(), CovarianceFunction(), SchlatherFunction(),
        ShimataniFunction(), DifferentiationFunction()
    )
}


def get_test_function(name: str, network: bool = False) -> TestFunction:
    """按名称取检验函数；网络上不提供标记分化函数"""
    try:
        function = TEST_FUNCTIONS[name]
    except KeyError:
        raise ConfigError(f"未知检验函数: {name}，可选 {sorted(TEST_FUNCTIONS)}")
    if network and not function.on_network:
        raise ConfigError(f"检验函数 {name} 没有网络版本")
    return function


def available_test_functions(network: bool = False) -> List[str]:
    return [name for name, function in TEST_FUNCTIONS.items() if function.on_network or not network]


def bivariate_values(first_u: np.ndarray, first_x: np.ndarray,
                     second_u: np.ndarray, second_x: np.ndarray) -> np.ndarray:
    """双变量标记乘积，对点对顺序对称化"""
    return 0.5 * (first_u * second_x + first_x * second_u)


if __name__ == "__main__":
    marks = np.array([1.0, 2.0, 3.0, 4.0])
    for name, function in TEST_FUNCTIONS.items():
        try:
            logger.info(f"{name}: c = {function.normalizer(marks):.6g}")
        except Exception as e:
            logger.warning(f"{name}: {e}")
