"""
蒙特卡洛模拟引擎
网络与平面窗口上的均匀/泊松点模式、随机重标记、三种标记模型与树突状网络生成
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import shapely
from loguru import logger
from shapely.geometry import LineString

from core_data_structures import LinearNetwork, Window, build_network
from exceptions import ConfigError, GenerationFailed, NoMarks, TooFewPoints
from metric_engine import MetricEngine
from patterns import MarkedPattern, network_pattern, planar_pattern


MARK_MODELS = ("I", "II", "III")


@dataclass
class SimulationConfig:
    """模拟配置"""
    # 树突状网络参数
    dendrite_depth: int = 4              # 分叉层数
    branch_angle: float = 60.0           # 根节点占有的扇形张角（度），逐层二等分
    length_decay: float = 1.1            # 逐层径向步长比例，大于 1 时外层枝更长
    root_length: float = 100.0           # 第一层径向步长
    growth_direction: float = 180.0      # 扇形中心方向（度）
    angle_jitter: float = 0.5            # 角度扰动，占半个子扇形的比例
    length_jitter: float = 0.2           # 长度相对扰动幅度
    max_attempts: int = 50               # 单条枝的最大重采样次数
    max_restarts: int = 20               # 整棵树的最大重生成次数

    # 标记模型参数
    model_one_scale: float = 5000.0      # 模型 I: (x + y) / scale
    model_three_radius: float = 80.0     # 模型 III: 邻域半径

    def __post_init__(self):
        if self.dendrite_depth < 1:
            raise ConfigError("树突网络层数至少为 1")
        if not 0 < self.branch_angle < 360:
            raise ConfigError("扇形张角必须在 (0, 360) 度之间")
        if self.length_decay <= 0:
            raise ConfigError("径向步长比例必须为正")
        if not 0 <= self.angle_jitter < 1 or not 0 <= self.length_jitter < 1:
            raise ConfigError("角度与长度扰动必须在 [0, 1) 之间")
        if self.root_length <= 0 or self.model_one_scale == 0 or self.model_three_radius <= 0:
            raise ConfigError("长度、尺度与半径参数必须为正")


@dataclass(frozen=True)
class RngSpec:
    """随机数流：(seed, stream) 唯一确定一个计数器型生成器"""
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed & (2 ** 64 - 1), spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(sequence))

    def spawn(self, stream: int) -> 'RngSpec':
        return RngSpec(self.seed, stream)


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngSpec(int(rng)).generator()


# ---- 网络上的点模式 ----

def uniform_on_network(network: LinearNetwork, n: int, rng,
                       base_engine: Optional[MetricEngine] = None) -> MarkedPattern:
    """n 个均匀分布的点：线段按长度比例选取，偏移在线段上均匀"""
    if n < 0:
        raise TooFewPoints(f"点数不能为负: {n}")
    generator = _generator(rng)
    probabilities = network.segment_lengths / network.total_length
    segments = generator.choice(network.n_segments, size=n, p=probabilities)
    offsets = generator.random(n) * network.segment_lengths[segments]
    return network_pattern(network, segments, offsets, base_engine=base_engine)


def poisson_on_network(network: LinearNetwork, intensity: float, rng,
                       base_engine: Optional[MetricEngine] = None) -> MarkedPattern:
    """强度为 intensity（每单位长度）的齐次泊松过程"""
    if intensity < 0:
        raise ConfigError(f"强度不能为负: {intensity}")
    generator = _generator(rng)
    count = int(generator.poisson(intensity * network.total_length))
    return uniform_on_network(network, count, generator, base_engine)


# ---- 平面窗口上的点模式 ----

def binomial_planar(window: Window, n: int, rng) -> MarkedPattern:
    """窗口内 n 个均匀点，包围盒拒绝采样"""
    if n < 0:
        raise TooFewPoints(f"点数不能为负: {n}")
    generator = _generator(rng)
    xmin, ymin, xmax, ymax = window.bounds
    accepted: List[np.ndarray] = []
    remaining = n
    acceptance = window.area / ((xmax - xmin) * (ymax - ymin))
    while remaining > 0:
        batch = int(remaining / acceptance * 1.2) + 16
        candidates = np.column_stack([generator.uniform(xmin, xmax, batch),
                                      generator.uniform(ymin, ymax, batch)])
        inside = candidates[window.contains(candidates)][:remaining]
        accepted.append(inside)
        remaining -= len(inside)
    coords = np.concatenate(accepted) if accepted else np.zeros((0, 2))
    return planar_pattern(coords, window)


def poisson_planar(window: Window, intensity: float, rng) -> MarkedPattern:
    if intensity < 0:
        raise ConfigError(f"强度不能为负: {intensity}")
    generator = _generator(rng)
    return binomial_planar(window, int(generator.poisson(intensity * window.area)), generator)


# ---- 标记 ----

def random_label(pattern: MarkedPattern, rng, independent: bool = False) -> MarkedPattern:
    """
    随机重标记：位置不变，标记（与类型）做均匀随机置换

    默认类型与各实数标记用同一个置换；independent=True 时各自独立置换
    """
    if pattern.marks is None and pattern.types is None:
        raise NoMarks("点模式既没有实数标记也没有类型，无法重标记")
    generator = _generator(rng)
    permutation = generator.permutation(pattern.n)

    changes = {}
    if pattern.types is not None:
        changes["types"] = pattern.types[permutation]
    if pattern.marks is not None:
        if independent and pattern.marks.ndim == 2:
            columns = [pattern.marks[generator.permutation(pattern.n), k]
                       for k in range(pattern.marks.shape[1])]
            changes["marks"] = np.column_stack(columns)
        elif independent:
            changes["marks"] = pattern.marks[generator.permutation(pattern.n)]
        else:
            changes["marks"] = pattern.marks[permutation]
    return pattern.replace(**changes)


def mark_model(pattern: MarkedPattern, model: str, config: Optional[SimulationConfig] = None,
               engine: Optional[MetricEngine] = None) -> MarkedPattern:
    """
    三种依赖位置的标记模型

    I: (x + y)/scale；II: 到网络边界的最短路径距离；III: d_L 严格小于半径的其他点个数
    """
    config = config or SimulationConfig()
    if not pattern.is_network:
        raise ConfigError("标记模型需要网络上的点模式")
    engine = engine or pattern.engine

    if model == "I":
        marks = pattern.coords.sum(axis=1) / config.model_one_scale
    elif model == "II":
        marks = engine.border_distances(np.arange(pattern.n))
    elif model == "III":
        distances = engine.pairwise_distances(np.arange(pattern.n))
        neighbours = distances < config.model_three_radius
        np.fill_diagonal(neighbours, False)
        marks = neighbours.sum(axis=1).astype(float)
    else:
        raise ConfigError(f"未知标记模型: {model}，可选 {MARK_MODELS}")

    metadata = dict(pattern.metadata)
    metadata["mark_model"] = model
    return pattern.replace(marks=marks, metadata=metadata)


# ---- 树突状网络 ----

class DendriteGenerator:
    """
    树突状网络生成器：根节点分出两枝，每层每个叶节点再分两枝

    每棵子树占有一个扇形角度区间，子枝平分父节点的区间并落在各自一半内，
    顶点到根的距离逐层增大；极少数仍相交的枝在原位置重采样，多次失败才整棵重来
    """

    def __init__(self, config: SimulationConfig):
        self.config = config

    def generate(self, rng) -> LinearNetwork:
        generator = _generator(rng)
        for restart in range(self.config.max_restarts):
            result = self._grow(generator)
            if result is not None:
                vertices, segments = result
                vertices -= vertices.min(axis=0)
                network = build_network(vertices, segments)
                logger.debug(f"树突网络生成完成: {network}，重试 {restart} 次")
                return network
        raise GenerationFailed(f"树突网络在 {self.config.max_restarts} 次重生成后仍有自相交")

    def _grow(self, generator: np.random.Generator) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        config = self.config
        main = math.radians(config.growth_direction)
        half_width = math.radians(config.branch_angle) / 2.0
        vertices = [np.zeros(2)]
        segments: List[Tuple[int, int]] = []
        lines: List[LineString] = []
        # 节点: (顶点编号, 角度区间下界, 上界, 到根的距离)
        nodes = [(0, main - half_width, main + half_width, 0.0)]
        gap = 1e-3 * config.root_length

        for level in range(config.dendrite_depth):
            step = config.root_length * config.length_decay ** level
            next_nodes = []
            for parent, low, high, radius in nodes:
                middle = 0.5 * (low + high)
                for wedge in ((low, middle), (middle, high)):
                    placed = self._place_branch(generator, vertices[parent], wedge, radius, step,
                                                lines, gap)
                    if placed is None:
                        return None
                    end, distance, line = placed
                    vertices.append(end)
                    segments.append((parent, len(vertices) - 1))
                    lines.append(line)
                    next_nodes.append((len(vertices) - 1, wedge[0], wedge[1], distance))
            nodes = next_nodes

        return np.array(vertices), np.array(segments)

    def _place_branch(self, generator, start, wedge, radius, step, lines, gap):
        config = self.config
        low, high = wedge
        existing = np.array(lines, dtype=object)
        for _ in range(config.max_attempts):
            angle = 0.5 * (low + high) + \
                generator.uniform(-config.angle_jitter, config.angle_jitter) * 0.5 * (high - low)
            distance = radius + step * (1.0 + generator.uniform(-config.length_jitter, config.length_jitter))
            end = distance * np.array([math.cos(angle), math.sin(angle)])
            # 去掉与父节点相接的一小段后检查是否与已有枝相交
            trimmed = LineString([start + 1e-6 * (end - start), end])
            if existing.size and (np.any(shapely.intersects(trimmed, existing))
                                  or np.any(shapely.distance(shapely.Point(end), existing) < gap)):
                continue
            return end, distance, LineString([start, end])
        return None


def dendrite_like_network(depth: int = 4, branch_angle: float = 60.0, length_decay: float = 1.1,
                          rng=0, config: Optional[SimulationConfig] = None) -> LinearNetwork:
    """平面二叉树状网络，2^depth 个叶节点，2^(depth+1) - 2 条线段"""
    base = config or SimulationConfig()
    config = SimulationConfig(**{**base.__dict__, "dendrite_depth": depth,
                                 "branch_angle": branch_angle, "length_decay": length_decay})
    return DendriteGenerator(config).generate(rng)


def rescale_network(network: LinearNetwork, target_diameter: float) -> LinearNetwork:
    """等比缩放网络，使最短路径直径等于 target_diameter"""
    diameter = MetricEngine(network, np.zeros(0, dtype=np.int64), np.zeros(0)).diameter()
    if diameter <= 0 or target_diameter <= 0:
        raise ConfigError("网络直径与目标直径必须为正")
    factor = target_diameter / diameter
    return build_network(network.vertices * factor, network.segments)


if __name__ == "__main__":
    network = dendrite_like_network(depth=4, rng=RngSpec(7))
    print(network)
    pattern = uniform_on_network(network, 50, RngSpec(7, 1))
    for model in MARK_MODELS:
        marked = mark_model(pattern, model)
        print(f"模型 {model}: 标记均值 {marked.marks.mean():.4f}")
