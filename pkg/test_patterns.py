#!/usr/bin/env python3
"""
测试点模式：标记矩、混合常数、按类型拆分与合并、平面视图与默认带宽
"""

import os
import sys
import traceback

import numpy as np

# 添加当前目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core_data_structures import Window, build_network
from exceptions import EmptyComponent, NoMarks, NoTypes, PatternError, SingleType
from patterns import (
    mark_moments, mingling_constant, network_pattern, planar_pattern, require_mingling_constant,
    split_by_type, superpose
)


WINDOW = Window.rectangle(0, 10, 0, 10)
SQUARE = np.array([[1.0, 1.0], [2.0, 1.0], [1.0, 2.0], [2.0, 2.0]])


def test_mark_moments():
    """标记均值与总体方差"""
    moments = mark_moments(planar_pattern(SQUARE[:2], WINDOW, marks=[2.0, 4.0]))
    assert moments.mean == 3.0 and moments.variance == 1.0

    moments = mark_moments(planar_pattern(SQUARE[:3], WINDOW, marks=[5.0, 5.0, 5.0]))
    assert moments.variance == 0.0

    moments = mark_moments(planar_pattern(SQUARE, WINDOW, marks=[1.0, 2.0, 3.0, 4.0]))
    assert moments.mean == 2.5 and moments.variance == 1.25
    print("✓ (2,4) → μ=3, σ²=1；(1,2,3,4) → μ=2.5, σ²=1.25")

    # 带宽 0.5 时 r = 1 处的四条边与两条对角线，各组点对平均标记都是 2.5
    moments = mark_moments(planar_pattern(SQUARE, WINDOW, marks=[1.0, 2.0, 3.0, 4.0]), bandwidth=0.5)
    assert abs(moments.conditional_mean_at(1.0)[0] - 2.5) < 1e-12
    assert np.isnan(moments.conditional_mean_at(5.0)[0])
    print("✓ 条件均值 μ_m(r) 正确，没有点对处为缺失")

    try:
        mark_moments(planar_pattern(SQUARE, WINDOW))
        raise AssertionError("无标记模式应当报错")
    except NoMarks:
        pass


def test_mingling_constant():
    """c = Σ n_i (n - n_i) / (n (n - 1))"""
    assert mingling_constant(planar_pattern(SQUARE, WINDOW, types=[1, 1, 2, 2])) == 2.0 / 3.0
    assert mingling_constant(planar_pattern(SQUARE[:2], WINDOW, types=[1, 2])) == 1.0

    single = planar_pattern(SQUARE, WINDOW, types=[1, 1, 1, 1])
    assert mingling_constant(single) == 0.0
    try:
        require_mingling_constant(single)
        raise AssertionError("单一类型应当报错")
    except SingleType:
        pass
    print("✓ (2,2) → 2/3，(1,1) → 1，单一类型 → 0 且报 SingleType")


def test_split_and_superpose():
    """按类型拆分与合并互逆"""
    pattern = planar_pattern(SQUARE, WINDOW, types=[1, 2, 1, 2], marks=[1.0, 2.0, 3.0, 4.0])
    parts = split_by_type(pattern)
    assert [part.n for part in parts] == [2, 2]
    assert parts[0].marks.tolist() == [1.0, 3.0]

    merged = superpose(parts)
    assert merged.n == 4
    assert sorted(merged.marks.tolist()) == [1.0, 2.0, 3.0, 4.0]

    assert len(split_by_type(planar_pattern(SQUARE, WINDOW, types=[1, 1, 1, 1]))) == 1
    try:
        split_by_type(planar_pattern(SQUARE, WINDOW))
        raise AssertionError("无类型模式应当报错")
    except NoTypes:
        pass
    print("✓ 拆分为两个各含 2 个点的子模式，合并后复原")


def test_component_indices():
    """类型名称、编号与点型（•）"""
    pattern = planar_pattern(SQUARE, WINDOW, types=[1, 2, 2, 1], type_labels=["A", "B", "C"])
    assert pattern.component_indices("A").tolist() == [0, 3]
    assert pattern.component_indices(2).tolist() == [1, 2]
    assert pattern.component_indices("•").tolist() == [0, 1, 2, 3]
    assert pattern.type_counts().tolist() == [2, 2, 0]
    try:
        pattern.component_indices("C")
        raise AssertionError("空类型应当报错")
    except EmptyComponent:
        pass
    print("✓ 类型解析与空分量检查正确")


def test_validation():
    """窗口外的点与标记数量不一致"""
    for kwargs in ({"coords": [[11.0, 1.0]]}, {"coords": SQUARE, "marks": [1.0, 2.0]},
                   {"coords": SQUARE, "types": [0, 1, 1, 1]},
                   {"coords": SQUARE, "marks": [1.0, np.nan, 2.0, 3.0]}):
        try:
            planar_pattern(window=WINDOW, **kwargs)
            raise AssertionError(f"{kwargs} 应当报错")
        except PatternError:
            pass
    print("✓ 非法点模式被拒绝")


def test_network_pattern_and_planar_view():
    """网络模式的嵌入坐标与平面视图"""
    network = build_network([(0, 0), (5, 0)], [(0, 1)])
    offsets = np.linspace(0.25, 4.75, 10)
    pattern = network_pattern(network, np.zeros(10), offsets, marks=np.arange(10.0))
    assert pattern.is_network
    assert np.allclose(pattern.coords[:, 0], offsets)
    assert pattern.intensity == 2.0
    assert abs(pattern.default_bandwidth() - 0.15 / 2.0) < 1e-15

    view = pattern.planar_view()
    assert not view.is_network
    assert np.array_equal(view.coords, pattern.coords)
    assert np.array_equal(view.marks, pattern.marks)
    assert view.planar_view() is view
    print("✓ |L| = 5 上 10 个点的强度为 2，平面视图保留坐标与标记")

    # 网络距离在单条线段上就是偏移之差
    assert np.allclose(pattern.pair_distances(), np.abs(offsets[:, None] - offsets[None, :]))

    planar = planar_pattern(np.random.default_rng(0).uniform(0, 10, (100, 2)), WINDOW)
    assert abs(planar.default_bandwidth() - 0.15) < 1e-15
    print("✓ 默认带宽：网络 c/λ，平面 c/√λ")


def test_replace_keeps_engine():
    """只换标记时沿用度量引擎"""
    network = build_network([(0, 0), (5, 0)], [(0, 1)])
    pattern = network_pattern(network, np.zeros(3), [1.0, 2.0, 3.0], marks=[1.0, 2.0, 3.0])
    engine = pattern.engine
    relabeled = pattern.with_marks(np.array([3.0, 2.0, 1.0]))
    assert relabeled.engine is engine
    assert pattern.marks.tolist() == [1.0, 2.0, 3.0]
    print("✓ 重标记后的模式共享度量引擎，原模式不变")


def main():
    """主测试函数"""
    print("点模式测试")
    print("=" * 50)

    tests = [test_mark_moments, test_mingling_constant, test_split_and_superpose,
             test_component_indices, test_validation, test_network_pattern_and_planar_view,
             test_replace_keeps_engine]
    failed = 0
    for test in tests:
        try:
            test()
        except Exception as e:
            failed += 1
            print(f"✗ {test.__name__} 失败: {e}")
            traceback.print_exc()

    print("\n" + "=" * 50)
    if failed:
        print(f"✗ {failed} 项测试失败")
        sys.exit(1)
    print("✓ 所有点模式测试通过！")


if __name__ == "__main__":
    main()
