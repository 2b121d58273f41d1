#!/usr/bin/env python3
"""
测试逐点包络：秩统计量、缺失值屏蔽、随机重标记与 CSR 零模型、可复现性
"""

import os
import sys
import traceback

import numpy as np

# 添加当前目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core_data_structures import SummaryCurve, Window
from envelope_system import (
    csr_envelope, envelope_from_curves, pointwise_envelope, random_labeling_envelope
)
from exceptions import GridMismatch, InvalidRank, NoMarks, SimulationFailure
from monte_carlo_engine import (
    RngSpec, binomial_planar, dendrite_like_network, mark_model, random_label, uniform_on_network
)
from network_summaries import tf_correlation_network
from planar_summaries import cross_K_planar
from statistic_registry import StatisticOptions, bind_statistic


R4 = np.array([0.0, 1.0, 2.0, 3.0])


def curve(values, r=R4):
    return SummaryCurve(r=r, values=np.asarray(values, dtype=float), theo=np.ones(len(r)), label="test")


def marked_dendrite(seed=3, n=40):
    network = dendrite_like_network(depth=3, rng=RngSpec(seed))
    return mark_model(uniform_on_network(network, n, RngSpec(seed, 0)), "I")


def test_rank_extremes():
    """rank=2 时取第 2 小与第 2 大的模拟值"""
    simulated = [curve(np.full(4, float(value))) for value in range(1, 10)]
    result = envelope_from_curves(curve([0.0, 2.0, 8.0, 5.0]), simulated, rank=2)
    assert np.all(result.lo == 2.0) and np.all(result.hi == 8.0)
    assert np.all(result.mean == 5.0)
    # 等于边界不算超出
    assert result.exceed_fraction == 0.25
    assert abs(result.nominal_level - 0.4) < 1e-15
    print("✓ lo = 2，hi = 8，只有 0 在包络外")

    single = envelope_from_curves(curve([1.0, 1.0, 1.0, 1.0]), [curve([3.0, 1.0, 4.0, 1.5])], rank=1)
    assert np.array_equal(single.lo, single.hi)
    print("✓ n_sim = 1、rank = 1 时 lo = hi")


def test_invalid_rank_and_grid():
    """非法 rank 与距离网格不一致"""
    for n_sim, rank in ((5, 0), (5, 4)):
        try:
            envelope_from_curves(curve(np.zeros(4)), [curve(np.zeros(4))] * n_sim, rank=rank)
            raise AssertionError(f"n_sim={n_sim}, rank={rank} 应当报错")
        except InvalidRank:
            pass

    try:
        envelope_from_curves(curve(np.zeros(4)), [curve(np.zeros(3), r=R4[:3])] * 3, rank=1)
        raise AssertionError("网格不一致应当报错")
    except GridMismatch:
        pass
    print("✓ rank < 1、n_sim < 2·rank - 1 与网格不一致都被拒绝")


def test_nan_masking():
    """缺失超过 5% 的网格点被屏蔽"""
    simulated = [curve([float(k), float(k), float(k), float(k)]) for k in range(20)]
    simulated[0].values[1] = np.nan
    simulated[0].values[2] = np.nan
    simulated[1].values[2] = np.nan
    result = envelope_from_curves(curve([5.0, 5.0, 5.0, 5.0]), simulated, rank=1)

    assert result.valid.tolist() == [True, True, False, True]
    assert np.isnan(result.lo[2]) and np.isnan(result.hi[2])
    # 一个缺失值时仍按剩余 19 个值排序
    assert result.lo[1] == 1.0 and result.hi[1] == 19.0
    assert result.lo[0] == 0.0 and result.hi[0] == 19.0
    print("✓ 20 次模拟中 2 个缺失时屏蔽，1 个缺失时保留")


def test_constant_marks_never_exceed():
    """常数标记的随机重标记包络不会被超出"""
    pattern = marked_dendrite()
    pattern = pattern.with_marks(np.full(pattern.n, 2.0))
    r = np.linspace(0.0, 40.0, 9)

    def statistic(source):
        return tf_correlation_network(source, "stoyan", r=r, bandwidth=6.0)

    result = random_labeling_envelope(pattern, statistic, n_sim=19, rank=1, rng=11)
    assert result.exceed_fraction == 0.0
    assert result.metadata["null"] == "random-labeling"
    print("✓ 常数标记下 exceed_fraction = 0")


def test_reproducible():
    """相同种子结果相同，线程数不影响结果"""
    pattern = marked_dendrite(seed=5)
    r = np.linspace(0.0, 40.0, 9)

    def statistic(source):
        return tf_correlation_network(source, "variogram", r=r, bandwidth=6.0)

    first = random_labeling_envelope(pattern, statistic, n_sim=9, rank=1, rng=RngSpec(21), n_jobs=1)
    second = random_labeling_envelope(pattern, statistic, n_sim=9, rank=1, rng=RngSpec(21), n_jobs=2)
    for name in ("lo", "hi", "mean", "observed"):
        assert np.array_equal(getattr(first, name), getattr(second, name), equal_nan=True)
    assert first.exceed_fraction == second.exceed_fraction

    other = random_labeling_envelope(pattern, statistic, n_sim=9, rank=1, rng=RngSpec(22))
    assert not np.array_equal(first.hi, other.hi, equal_nan=True)
    print("✓ n_jobs = 1 与 2 的包络逐位相同，换种子则不同")


def test_csr_and_errors():
    """CSR 包络、无标记与模拟失败"""
    window = Window.rectangle(0, 100, 0, 100)
    pattern = binomial_planar(window, 30, RngSpec(4))
    r = np.linspace(0.0, 20.0, 5)

    def statistic(source):
        return cross_K_planar(source, r=r)

    result = csr_envelope(pattern, statistic, n_sim=5, rank=1, rng=4)
    assert result.metadata["null"] == "csr"
    assert np.all(result.lo <= result.hi)
    print("✓ CSR 包络 lo ≤ hi")

    try:
        random_labeling_envelope(pattern, statistic, n_sim=5, rank=1)
        raise AssertionError("无标记模式应当报错")
    except NoMarks:
        pass

    def broken(source, generator):
        raise ValueError("零模型出错")

    try:
        pointwise_envelope(pattern, statistic, broken, n_sim=3, rank=1, n_jobs=1)
        raise AssertionError("模拟失败应当报错")
    except SimulationFailure as error:
        assert error.replicate == 0
        assert isinstance(error.cause, ValueError)
    print("✓ NoMarks 与 SimulationFailure 正确抛出")


def test_random_labeling_calibration():
    """标记独立时，重标记后的观测曲线平均至少 90% 的网格点落在自身包络内"""
    network = dendrite_like_network(depth=3, rng=RngSpec(31))
    names = ("tf_correlation_network", "mark_weighted_K_network", "mark_connection_network",
             "tf_correlation", "mark_weighted_K", "mark_connection")
    inside = {name: [] for name in names}
    for meta in range(40):
        points = uniform_on_network(network, 40, RngSpec(31, meta + 1))
        generator = np.random.default_rng(meta)
        pattern = points.replace(marks=generator.uniform(1.0, 3.0, 40),
                                 types=generator.integers(1, 3, 40), type_labels=["a", "b"])
        shuffled = random_label(pattern, RngSpec(32, meta))
        for name in names:
            options = StatisticOptions(i="a", j="b", grid=(5.0, 60.0, 12))
            statistic = bind_statistic(name, options)
            result = random_labeling_envelope(shuffled, statistic, n_sim=39, rank=1,
                                              rng=RngSpec(33, meta), n_jobs=1)
            inside[name].append(1.0 - result.exceed_fraction)

    for name, shares in inside.items():
        assert np.mean(shares) >= 0.9, f"{name}: {np.mean(shares):.3f}"
        print(f"  {name}: 包络内比例均值 {np.mean(shares):.3f}")
    print("✓ 40 次元重复下各统计量的包络内比例均值不低于 0.9")


def main():
    """主测试函数"""
    print("包络测试")
    print("=" * 50)

    tests = [test_rank_extremes, test_invalid_rank_and_grid, test_nan_masking,
             test_constant_marks_never_exceed, test_reproducible, test_csr_and_errors,
             test_random_labeling_calibration]
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
    print("✓ 包络测试全部通过！")


if __name__ == "__main__":
    main()
