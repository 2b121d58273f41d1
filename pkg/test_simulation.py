#!/usr/bin/env python3
"""
测试模拟：随机数流、网络与平面上的均匀点、随机重标记、三种标记模型与树突状网络
"""

import os
import sys
import traceback
from collections import Counter

import numpy as np
import shapely
from shapely.geometry import LineString

# 添加当前目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core_data_structures import Window, build_network, terminal_vertices
from exceptions import NoMarks
from metric_engine import MetricEngine
from monte_carlo_engine import (
    RngSpec, SimulationConfig, binomial_planar, dendrite_like_network, mark_model,
    poisson_on_network, random_label, rescale_network, uniform_on_network
)
from patterns import network_pattern, planar_pattern


def test_rng_streams():
    """相同 (seed, stream) 给出相同序列，不同流互不相同"""
    first = RngSpec(42, 3).generator().random(5)
    second = RngSpec(42, 3).generator().random(5)
    other = RngSpec(42, 4).generator().random(5)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)
    assert RngSpec(42).spawn(4) == RngSpec(42, 4)
    print("✓ 随机数流可复现且相互独立")


def test_uniform_on_network():
    """按长度比例在线段间分配点"""
    network = build_network([(0, 0), (1, 0), (0, 5), (3, 5)], [(0, 1), (2, 3)])
    pattern = uniform_on_network(network, 10000, RngSpec(1))
    share = np.mean(pattern.segments == 0)
    assert abs(share - 0.25) < 0.02
    assert np.all(pattern.offsets >= 0) and np.all(pattern.offsets <= network.segment_lengths[pattern.segments])
    print(f"✓ 长度 1 与 3 的线段上，落在第一条的比例 {share:.3f}")

    assert uniform_on_network(network, 0, RngSpec(1)).n == 0
    assert poisson_on_network(network, 0.0, RngSpec(1)).n == 0
    assert np.array_equal(uniform_on_network(network, 20, RngSpec(9, 2)).offsets,
                          uniform_on_network(network, 20, RngSpec(9, 2)).offsets)
    print("✓ n = 0 与 λ = 0 给出空模式，同一随机数流结果相同")


def test_binomial_planar():
    """平面均匀点都在窗口内"""
    square = binomial_planar(Window.rectangle(0, 10, 0, 5), 200, RngSpec(3))
    assert square.n == 200
    assert np.all(square.window.contains(square.coords))

    triangle = Window.from_vertices([(0, 0), (10, 0), (0, 10)])
    inside = binomial_planar(triangle, 150, RngSpec(3))
    assert inside.n == 150
    assert np.all(inside.coords.sum(axis=1) <= 10.0)
    print("✓ 矩形与三角形窗口内的均匀点")


def test_random_label():
    """随机重标记保持位置与标记多重集"""
    window = Window.rectangle(0, 10, 0, 10)
    coords = np.random.default_rng(0).uniform(0, 10, (30, 2))
    marks = np.arange(30.0)
    types = np.repeat([1, 2, 3], 10)
    pattern = planar_pattern(coords, window, types=types, marks=marks)

    relabeled = random_label(pattern, RngSpec(5))
    assert np.array_equal(relabeled.coords, pattern.coords)
    assert sorted(relabeled.marks.tolist()) == marks.tolist()
    assert Counter(relabeled.types.tolist()) == Counter(types.tolist())
    assert not np.array_equal(relabeled.marks, marks)
    # 同一置换：类型与标记的配对保持
    assert all(types[int(m)] == t for t, m in zip(relabeled.types, relabeled.marks))

    independent = random_label(pattern.with_marks(np.column_stack([marks, marks])), RngSpec(5),
                               independent=True)
    assert sorted(independent.marks[:, 0].tolist()) == marks.tolist()
    assert not np.array_equal(independent.marks[:, 0], independent.marks[:, 1])
    print("✓ 位置不变，类型与标记多重集保持")

    try:
        random_label(planar_pattern(coords, window), RngSpec(5))
        raise AssertionError("无标记模式应当报错")
    except NoMarks:
        pass


def test_mark_models():
    """模型 I/II/III 的确定性标记"""
    network = build_network([(0, 0), (2000, 3000)], [(0, 1)])
    half = network.segment_lengths[0] / 2.0
    pattern = network_pattern(network, [0, 0], [half, 0.0])

    model_one = mark_model(pattern, "I")
    assert abs(model_one.marks[0] - 0.5) < 1e-12
    assert model_one.metadata["mark_model"] == "I"

    model_two = mark_model(pattern, "II")
    assert model_two.marks[1] == 0.0
    assert abs(model_two.marks[0] - half) < 1e-9 * half
    print("✓ 模型 I 中点标记 0.5，模型 II 端点标记 0")

    spaced = network_pattern(network, [0, 0, 0], [0.0, 100.0, 200.0])
    assert mark_model(spaced, "III").marks.tolist() == [0.0, 0.0, 0.0]
    crowded = network_pattern(network, [0, 0, 0], [0.0, 50.0, 100.0])
    assert mark_model(crowded, "III").marks.tolist() == [1.0, 2.0, 1.0]

    config = SimulationConfig(model_three_radius=150.0)
    assert mark_model(spaced, "III", config).marks.tolist() == [1.0, 2.0, 1.0]
    print("✓ 模型 III 统计半径 80 内的其他点数")


def test_dendrite_network():
    """树突状网络的规模、连通性与缩放"""
    tiny = dendrite_like_network(depth=1, rng=RngSpec(2))
    assert tiny.n_vertices == 3 and tiny.n_segments == 2

    network = dendrite_like_network(depth=3, rng=RngSpec(2))
    assert network.n_segments == 14
    assert len(terminal_vertices(network)) == 8
    engine = MetricEngine(network, np.zeros(0, dtype=np.int64), np.zeros(0))
    assert np.all(np.isfinite(engine.vertex_distances))
    print("✓ 深度 3：14 条线段、8 个端点且连通")

    again = dendrite_like_network(depth=3, rng=RngSpec(2))
    assert np.array_equal(again.vertices, network.vertices)

    scaled = rescale_network(network, 250.0)
    diameter = MetricEngine(scaled, np.zeros(0, dtype=np.int64), np.zeros(0)).diameter()
    assert abs(diameter - 250.0) < 1e-9
    print(f"✓ 缩放后直径 {diameter:.6f}")


def crossing_pairs(network):
    """不共享顶点却相交的线段对数"""
    lines = np.array([LineString(network.vertices[list(segment)]) for segment in network.segments],
                     dtype=object)
    count = 0
    for index, (a, b) in enumerate(network.segments):
        later = np.arange(index + 1, network.n_segments)
        others = network.segments[later]
        apart = (others != a).all(axis=1) & (others != b).all(axis=1)
        count += int(shapely.intersects(lines[index], lines[later[apart]]).sum())
    return count


def test_default_dendrite_generation():
    """默认配置与更深的树对多个种子都能生成且无自相交"""
    config = SimulationConfig()
    for seed in range(6):
        network = dendrite_like_network(config.dendrite_depth, config.branch_angle,
                                        config.length_decay, RngSpec(seed), config)
        assert network.n_segments == 2 ** (config.dendrite_depth + 1) - 2
        assert len(terminal_vertices(network)) == 2 ** config.dendrite_depth
        assert crossing_pairs(network) == 0
    print(f"✓ 深度 {config.dendrite_depth}：6 个种子全部生成成功")

    for seed in (1, 2):
        deep = dendrite_like_network(depth=6, rng=RngSpec(seed))
        assert deep.n_segments == 126 and len(terminal_vertices(deep)) == 64
        assert crossing_pairs(deep) == 0
    print("✓ 深度 6：64 个端点且无自相交")


def main():
    """主测试函数"""
    print("模拟测试")
    print("=" * 50)

    tests = [test_rng_streams, test_uniform_on_network, test_binomial_planar, test_random_label,
             test_mark_models, test_dendrite_network, test_default_dendrite_generation]
    failed = 0
    for test in tests:
        print(f"\n{test.__doc__}")
        try:
            test()
        except Exception as e:
            failed += 1
            print(f"✗ 测试失败: {e}")
            traceback.print_exc()

    print("\n" + "=" * 50)
    if failed:
        print(f"✗ {failed} 项测试失败")
        sys.exit(1)
    print("✓ 模拟测试全部通过！")


if __name__ == "__main__":
    main()
