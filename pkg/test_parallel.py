#!/usr/bin/env python3
"""
测试并行包络：多线程结果与单线程逐位相同
"""

import sys
import os
import time

import numpy as np

# 添加当前目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from monte_carlo_engine import RngSpec, dendrite_like_network, mark_model, uniform_on_network
from envelope_system import random_labeling_envelope, simulate_curves, csr_null
from statistic_registry import StatisticOptions, bind_statistic


def make_pattern():
    network = dendrite_like_network(depth=4, rng=RngSpec(13))
    return mark_model(uniform_on_network(network, 60, RngSpec(13, 0)), "II")


def run_envelope(n_jobs):
    pattern = make_pattern()
    statistic = bind_statistic("tf_correlation_network", StatisticOptions(grid=(0.0, 60.0, 13)))
    start_time = time.time()
    result = random_labeling_envelope(pattern, statistic, n_sim=19, rank=1, rng=RngSpec(13),
                                      n_jobs=n_jobs)
    return result, time.time() - start_time


def test_serial_envelope():
    """单线程包络"""
    print("开始单线程包络...")
    result, elapsed = run_envelope(1)
    assert result.n_sim == 19
    assert np.all(result.lo[result.valid] <= result.hi[result.valid])
    print(f"✓ 单线程包络完成，耗时: {elapsed:.3f}秒")
    print(f"  exceed_fraction: {result.exceed_fraction:.3f}")


def test_parallel_envelope():
    """多线程包络与单线程一致"""
    serial, serial_time = run_envelope(1)
    print("开始并行包络...")
    parallel, parallel_time = run_envelope(4)
    for name in ("lo", "hi", "mean", "observed"):
        assert np.array_equal(getattr(serial, name), getattr(parallel, name), equal_nan=True)
    assert serial.exceed_fraction == parallel.exceed_fraction
    print(f"✓ 并行包络完成，耗时: {parallel_time:.3f}秒（单线程 {serial_time:.3f}秒）")


def test_parallel_null_patterns():
    """并行生成的 CSR 零模型曲线按重复编号排列"""
    pattern = make_pattern()
    statistic = bind_statistic("K_network", StatisticOptions(grid=(0.0, 60.0, 13)))
    serial = simulate_curves(pattern, statistic, csr_null, 8, RngSpec(2), n_jobs=1)
    parallel = simulate_curves(pattern, statistic, csr_null, 8, RngSpec(2), n_jobs=3)
    for first, second in zip(serial, parallel):
        assert np.array_equal(first.values, second.values)
    print("✓ 第 k 次重复始终使用随机流 k + 1")


def main():
    """主测试函数"""
    print("并行包络功能测试")
    print("=" * 50)

    tests = [("单线程包络测试", test_serial_envelope),
             ("并行包络测试", test_parallel_envelope),
             ("零模型曲线顺序测试", test_parallel_null_patterns)]
    for index, (title, test) in enumerate(tests, 1):
        print(f"\n{index}. {title}")
        print("-" * 30)
        try:
            test()
        except Exception as e:
            print(f"✗ {title}失败: {e}")
            import traceback
            traceback.print_exc()
            sys.exit(1)

    print("\n" + "=" * 50)
    print("✓ 所有并行测试通过！")
    print("线程数不影响包络结果。")


if __name__ == "__main__":
    main()
