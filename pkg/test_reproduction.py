#!/usr/bin/env python3
"""
测试树突网络复现实验：三种标记模型下均值曲线的形状与随机重标记包络
"""

import os
import sys
import tempfile
import time
import traceback

import numpy as np

# 添加当前目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config_interface import ReproConfig
from reproduction_study import ReproductionStudy, run_reproduction, summarize_mean_curve


def test_curve_summary():
    """峰值、穿越位置与前半段趋势"""
    r = np.linspace(0.0, 100.0, 11)
    values = np.array([1.5, 1.4, 1.3, 1.35, 1.2, 1.1, 0.9, 0.8, 0.9, 0.7, 0.6])
    summary = summarize_mean_curve(r, values)
    assert summary.peak_fraction == 0.0 and summary.peak_value == 1.5
    assert abs(summary.crossing_r - 55.0) < 1e-12
    assert summary.share_above_one_lower_half == 1.0
    # 前半段有一次小幅回升，但整体下降
    assert summary.lower_half_trend < -0.8 and summary.decreasing_lower_half

    rising = summarize_mean_curve(r, np.array([1.0, 1.1, 1.2, 1.3, 1.2, 1.1, 1.0, 0.9, 0.8, 0.7, 0.6]))
    assert rising.peak_fraction == 0.3 and not rising.decreasing_lower_half

    empty = summarize_mean_curve(r, np.full(11, np.nan))
    assert empty.valid_points == 0 and empty.peak_r is None and empty.lower_half_trend is None
    print("✓ 峰值、穿越位置与下降趋势计算正确")


def test_labeling_streams():
    """重标记曲线与原曲线来自同一次实现，重复结果相同"""
    config = ReproConfig(n_points=40, n_sim=3, rank=1, grid_count=11, labeling=True)
    study = ReproductionStudy(config, seed=5)
    study.build_network()
    first = study.replicate_curves("II", 1)
    second = study.replicate_curves("II", 1)
    assert sorted(first) == ["labeling_network", "labeling_planar", "network", "planar"]
    for key in first:
        assert np.array_equal(first[key].values, second[key].values, equal_nan=True)
    assert not np.array_equal(first["network"].values, first["labeling_network"].values,
                              equal_nan=True)
    print("✓ 每次实现重标记一次，随机流固定")


def test_repro_qualitative():
    """缩小规模的复现实验满足三种模型的定性结论"""
    config = ReproConfig(n_sim=79, rank=2, labeling=True)
    start_time = time.time()
    with tempfile.TemporaryDirectory() as directory:
        report = run_reproduction(directory, config, seed=3, n_jobs=2)
        assert "labeling_model_I_planar.csv" in report.files
    curves = report.curves
    print(f"  耗时 {time.time() - start_time:.1f}秒")

    # 模型 I：网络曲线前半段大于 1，在 175 ± 25% 轴长处向下穿过 1；平面曲线留在重标记包络内
    network = curves["model_I_network"]
    assert network.share_above_one_lower_half == 1.0
    assert network.crossing_fraction is not None and 0.45 <= network.crossing_fraction <= 0.95
    inside = report.labeling["labeling_model_I_planar"]["inside_fraction"]
    assert inside >= 0.8
    print(f"✓ 模型 I：穿越位置 {network.crossing_fraction:.2f}，平面包络内比例 {inside:.2f}")

    # 模型 II：平面曲线比网络曲线更早由正转负
    planar, network = curves["model_II_planar"], curves["model_II_network"]
    assert planar.crossing_fraction is not None and network.crossing_fraction is not None
    assert planar.crossing_fraction < network.crossing_fraction
    print(f"✓ 模型 II：平面 {planar.crossing_fraction:.2f} < 网络 {network.crossing_fraction:.2f}")

    # 模型 III：网络曲线先升后降，峰值在前 30%；平面曲线前半段下降
    planar, network = curves["model_III_planar"], curves["model_III_network"]
    assert 0.0 < network.peak_fraction <= 0.3 and network.peak_value > 1.0
    assert planar.decreasing_lower_half
    print(f"✓ 模型 III：网络峰值位置 {network.peak_fraction:.2f}，"
          f"平面前半段秩相关 {planar.lower_half_trend:.2f}")


def main():
    """主测试函数"""
    print("复现实验测试")
    print("=" * 50)

    tests = [test_curve_summary, test_labeling_streams, test_repro_qualitative]
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
    print("✓ 复现实验测试全部通过！")


if __name__ == "__main__":
    main()
