#!/usr/bin/env python3
"""
测试网络几何：构造校验、吸附、端点、哑网格与平面窗口
"""

import math
import os
import sys
import traceback

import numpy as np

# 添加当前目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core_data_structures import (
    NetworkLocation, Window, build_network, dummy_grid, planar_dummy_grid, snap_points,
    snap_to_network, terminal_vertices, validate_r_grid
)
from exceptions import (
    DanglingIndex, DuplicateVertex, EmptyNetwork, NonPositiveSpacing, UnsortedGrid,
    ZeroLengthSegment
)


def _raises(error_type, function, *args, **kwargs):
    try:
        function(*args, **kwargs)
    except error_type:
        return True
    return False


def y_star():
    """三条单位长臂的 Y 形网络，顶点 0 为中心"""
    arms = [(math.cos(a), math.sin(a)) for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    return build_network([(0.0, 0.0)] + arms, [(0, 1), (0, 2), (0, 3)])


def test_build_network():
    """构造与校验"""
    unit = build_network([(0, 0), (1, 0)], [(0, 1)])
    assert unit.total_length == 1.0
    assert unit.n_segments == 1

    v_shape = build_network([(0, 1), (1, 0), (2, 1)], [(0, 1), (1, 2)])
    assert len(v_shape.adjacency[1]) == 2
    assert v_shape.degrees.tolist() == [1, 2, 1]
    print("✓ 单位线段与 V 形网络构造正确")

    assert _raises(DanglingIndex, build_network, [(0, 0), (1, 0), (1, 1)], [(0, 99)])
    assert _raises(DuplicateVertex, build_network, [(0, 0), (0, 0), (1, 0)], [(0, 2)])
    assert _raises(ZeroLengthSegment, build_network, [(0, 0), (1, 0)], [(1, 1)])
    assert _raises(EmptyNetwork, build_network, [], [])
    print("✓ 悬空编号、重合顶点、零长线段与空网络均被拒绝")


def test_network_is_immutable():
    """构造后数组只读"""
    network = build_network([(0, 0), (1, 0)], [(0, 1)])
    assert _raises(ValueError, network.vertices.__setitem__, (0, 0), 5.0)
    assert _raises(ValueError, network.segment_lengths.__setitem__, 0, 2.0)
    print("✓ 网络数组不可修改")


def test_snap_to_network():
    """吸附与并列规则"""
    unit = build_network([(0, 0), (1, 0)], [(0, 1)])
    location = snap_to_network((0.5, 0.3), unit)
    assert location.segment == 0
    assert abs(location.offset - 0.5) < 1e-12

    corner = build_network([(0, 0), (1, 0), (1, 1)], [(0, 1), (1, 2)])
    location = snap_to_network((1.0, 0.0), corner)
    assert location == NetworkLocation(0, 1.0)

    parallel = build_network([(0, 0), (1, 0), (0, 2), (1, 2)], [(0, 1), (2, 3)])
    location = snap_to_network((0.5, 1.0), parallel)
    assert location.segment == 0
    assert abs(location.offset - 0.5) < 1e-12
    print("✓ 正交投影、共享顶点与等距平行线段都取编号最小的线段")


def test_snap_is_idempotent():
    """嵌入后再吸附得到同一位置"""
    rng = np.random.default_rng(3)
    network = build_network([(0, 0), (4, 0), (4, 3), (9, 5)], [(0, 1), (1, 2), (2, 3)])
    segments = rng.integers(0, network.n_segments, 50)
    offsets = rng.random(50) * network.segment_lengths[segments]
    # 避开顶点处的并列
    offsets = np.clip(offsets, 1e-3, network.segment_lengths[segments] - 1e-3)

    snapped_segments, snapped_offsets, displacement = snap_points(network.embed(segments, offsets), network)
    assert np.array_equal(snapped_segments, segments)
    assert np.allclose(snapped_offsets, offsets, atol=1e-9)
    assert np.all(displacement < 1e-9)
    print("✓ 吸附对嵌入坐标幂等")


def test_terminal_vertices():
    """度为 1 的顶点"""
    assert terminal_vertices(build_network([(0, 0), (1, 0)], [(0, 1)])) == [0, 1]
    assert terminal_vertices(y_star()) == [1, 2, 3]
    triangle = build_network([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)], [(0, 1), (1, 2), (2, 0)])
    assert terminal_vertices(triangle) == []
    print("✓ 线段、Y 形与三角形的端点正确")


def test_dummy_grid():
    """每条线段 ceil(长度/间距) 个子区间中点"""
    unit = build_network([(0, 0), (1, 0)], [(0, 1)])
    assert [loc.offset for loc in dummy_grid(unit, 0.5)] == [0.25, 0.75]
    assert [loc.offset for loc in dummy_grid(unit, 2.0)] == [0.5]
    assert _raises(NonPositiveSpacing, dummy_grid, unit, 0.0)

    star = y_star()
    locations = dummy_grid(star, 0.3)
    assert len(locations) == 3 * 4
    assert all(0 < loc.offset < star.segment_lengths[loc.segment] for loc in locations)
    print("✓ 哑网格位置与数量正确")


def test_window():
    """矩形与多边形窗口"""
    window = Window.rectangle(0, 10, 0, 5)
    assert window.area == 50.0
    assert window.is_rectangle
    assert window.contains(np.array([[1, 1], [10, 5], [11, 1]])).tolist() == [True, True, False]
    assert np.allclose(window.boundary_distance(np.array([[1, 2], [5, 2.5]])), [1.0, 2.5])

    triangle = Window.from_vertices([(0, 0), (10, 0), (0, 10)])
    assert not triangle.is_rectangle
    assert abs(triangle.area - 50.0) < 1e-12
    centers = planar_dummy_grid(triangle, 1.0)
    assert np.all(triangle.contains(centers))
    assert np.all(centers.sum(axis=1) <= 10.0)
    print("✓ 窗口面积、包含判断、边界距离与哑网格正确")


def test_r_grid_validation():
    """距离网格必须非负且严格递增"""
    assert validate_r_grid([0, 1, 2]).tolist() == [0.0, 1.0, 2.0]
    assert _raises(UnsortedGrid, validate_r_grid, [0, 2, 1])
    assert _raises(UnsortedGrid, validate_r_grid, [-1, 0, 1])
    assert _raises(UnsortedGrid, validate_r_grid, [0, 1, 1])
    assert _raises(UnsortedGrid, validate_r_grid, [])
    print("✓ 非法距离网格被拒绝")


def main():
    """主测试函数"""
    print("网络几何测试")
    print("=" * 50)

    tests = [test_build_network, test_network_is_immutable, test_snap_to_network,
             test_snap_is_idempotent, test_terminal_vertices, test_dummy_grid, test_window,
             test_r_grid_validation]
    failed = 0
    for test in tests:
        try:
            test()
        except Exception as e:
            failed += 1
            print(f"✗ {test.__doc__} 失败: {e}")
            traceback.print_exc()

    print("\n" + "=" * 50)
    if failed:
        print(f"✗ {failed} 项测试失败")
        sys.exit(1)
    print("✓ 网络几何测试全部通过！")


if __name__ == "__main__":
    main()
