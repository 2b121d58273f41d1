#!/usr/bin/env python3
"""
测试数据导入、曲线导出、配置加载与命令行（含复现实验的可复现性）
"""

import filecmp
import json
import os
import sys
import tempfile
import traceback

import numpy as np
import pandas as pd

# 添加当前目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config_interface import (
    AppConfig, ReproConfig, config_from_dict, default_threads, load_config, parse_grid_spec,
    save_config
)
from core_data_structures import SummaryCurve
from envelope_system import EnvelopeResult, envelope_from_curves
from exceptions import ConfigError, EmptyCurve, MissingColumn, ParseError
from export_system import curve_frame, read_curve, write_curve
from import_system import read_network, read_pattern_csv
from main_application import cli_main


def write_text(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def test_pattern_csv():
    """点模式 CSV：行号、类型映射、缺列、行序无关与去重"""
    with tempfile.TemporaryDirectory() as directory:
        bad = write_text(directory, "bad.csv", "x,y\n1,2\n3,abc\n")
        try:
            read_pattern_csv(bad, window=(0, 10, 0, 10))
            raise AssertionError("非数值应当报错")
        except ParseError as error:
            assert error.line == 3
        print("✓ 非数值单元格报告第 3 行")

        typed = write_text(directory, "typed.csv", "x,y,type\n1,1,B\n2,2,A\n")
        pattern = read_pattern_csv(typed, window=(0, 10, 0, 10))
        assert pattern.type_labels == ["A", "B"]
        assert pattern.metadata["type_mapping"] == {"A": 1, "B": 2}
        assert pattern.types.tolist() == [2, 1]
        print("✓ 类型标签按字典序映射为 {A: 1, B: 2}")

        try:
            read_pattern_csv(write_text(directory, "missing.csv", "x,type\n1,A\n"), window=(0, 10, 0, 10))
            raise AssertionError("缺少 y 列应当报错")
        except MissingColumn:
            pass

        rows = ["3,4,A,0.5", "1,2,B,1.5", "5,6,A,2.5", "1,2,B,1.5"]
        forward = read_pattern_csv(write_text(directory, "a.csv", "x,y,type,mark\n" + "\n".join(rows) + "\n"),
                                   window=(0, 10, 0, 10))
        backward = read_pattern_csv(write_text(directory, "b.csv", "x,y,type,mark\n" + "\n".join(rows[::-1]) + "\n"),
                                    window=(0, 10, 0, 10))
        assert forward.n == 3 and forward.metadata["dropped_duplicates"] == 1
        assert np.array_equal(forward.coords, backward.coords)
        assert np.array_equal(forward.types, backward.types)
        assert np.array_equal(forward.marks, backward.marks)
        print("✓ 重复行被删除，结果与行序无关")


def test_network_files():
    """线段 CSV 与 GeoJSON 网络"""
    with tempfile.TemporaryDirectory() as directory:
        single = read_network(write_text(directory, "one.csv", "x1,y1,x2,y2\n0,0,1,0\n"))
        assert single.n_vertices == 2 and single.n_segments == 1

        shared = read_network(write_text(directory, "two.csv", "x1,y1,x2,y2\n0,0,1,0\n1,0,1,1\n"))
        assert shared.n_vertices == 3
        assert shared.degrees.tolist() == [1, 2, 1]

        geojson = {"type": "Feature", "properties": {},
                   "geometry": {"type": "LineString", "coordinates": [[0, 0], [3, 0], [3, 4]]}}
        path = write_text(directory, "line.geojson", json.dumps(geojson))
        network = read_network(path)
        assert network.n_segments == 2
        assert abs(network.total_length - 7.0) < 1e-12
        print("✓ 单行 CSV、共享端点与三点折线网络")

        try:
            read_network(write_text(directory, "broken.csv", "x1,y1,x2\n0,0,1\n"))
            raise AssertionError("缺列应当报错")
        except MissingColumn:
            pass


def test_curve_export():
    """曲线 CSV/JSON 写出后逐位读回，缺失值为空单元格或 null"""
    rng = np.random.default_rng(3)
    r = np.linspace(0.0, 1.0, 7)
    values = rng.normal(size=7)
    values[0] = np.nan
    curve = SummaryCurve(r=r, values=values, theo=np.ones(7), label="kappa", n_pairs=np.arange(7))
    simulated = [SummaryCurve(r=r, values=rng.normal(size=7), theo=1.0, label="kappa") for _ in range(5)]
    envelope = envelope_from_curves(curve, simulated, rank=1)

    with tempfile.TemporaryDirectory() as directory:
        csv_path = os.path.join(directory, "kappa.csv")
        write_curve(curve, csv_path)
        with open(csv_path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0] == "r,value,theo"
        assert lines[1] == "0,,1"
        back = read_curve(csv_path)
        assert np.array_equal(back.values, curve.values, equal_nan=True)
        assert np.array_equal(back.r, curve.r)

        json_path = os.path.join(directory, "kappa.json")
        write_curve(curve, json_path)
        with open(json_path, encoding="utf-8") as f:
            document = json.load(f)
        assert document["value"][0] is None
        assert document["n_pairs"] == list(range(7))
        assert np.array_equal(read_curve(json_path).values, curve.values, equal_nan=True)
        print("✓ 曲线 CSV/JSON 逐位往返")

        for name in ("envelope.csv", "envelope.json"):
            path = os.path.join(directory, name)
            write_curve(envelope, path)
            loaded = read_curve(path)
            assert isinstance(loaded, EnvelopeResult)
            for field in ("lo", "hi", "mean", "observed"):
                assert np.array_equal(getattr(loaded, field), getattr(envelope, field), equal_nan=True)
            assert loaded.exceed_fraction == envelope.exceed_fraction
        assert read_curve(os.path.join(directory, "envelope.json")).n_sim == 5
        print("✓ 包络 CSV/JSON 往返")

    try:
        curve_frame(SummaryCurve(r=[], values=[], theo=[], label="empty"))
        raise AssertionError("空曲线应当报错")
    except EmptyCurve:
        pass


def test_config():
    """配置文件：未知字段、网格格式、比例约束、YAML 与线程环境变量"""
    for data in ({"estimation": {"foo": 1}}, {"bogus": {}}, {"envelope": {"n_sim": 5, "rank": 4}}):
        try:
            config_from_dict(data)
            raise AssertionError(f"{data} 应当报错")
        except ConfigError:
            pass

    assert parse_grid_spec("0:2.5:11") == (0.0, 2.5, 11)
    for text in ("1:0:5", "0:1", "0:1:1", "a:b:c"):
        try:
            parse_grid_spec(text)
            raise AssertionError(f"{text} 应当报错")
        except ConfigError:
            pass

    try:
        ReproConfig(network_r_max=100.0)
        raise AssertionError("比例不一致应当报错")
    except ConfigError:
        pass
    print("✓ 非法配置被拒绝")

    with tempfile.TemporaryDirectory() as directory:
        config = config_from_dict({"repro": {"n_points": 30}, "simulation": {"dendrite_depth": 3}})
        path = os.path.join(directory, "config.yaml")
        save_config(config, path)
        loaded = load_config(path)
        assert loaded.to_dict() == config.to_dict()
        assert loaded.repro.n_points == 30 and loaded.simulation.dendrite_depth == 3
    assert isinstance(load_config(), AppConfig)
    print("✓ YAML 配置往返")

    previous = os.environ.get("LINMARK_THREADS")
    try:
        os.environ["LINMARK_THREADS"] = "3"
        assert default_threads() == 3
        os.environ["LINMARK_THREADS"] = "many"
        try:
            default_threads()
            raise AssertionError("非整数线程数应当报错")
        except ConfigError:
            pass
    finally:
        if previous is None:
            os.environ.pop("LINMARK_THREADS", None)
        else:
            os.environ["LINMARK_THREADS"] = previous
    print("✓ LINMARK_THREADS 环境变量")


def test_cli_exit_codes():
    """退出码：成功 0，配置错误 2"""
    with tempfile.TemporaryDirectory() as directory:
        pattern = write_text(directory, "points.csv", "x,y\n1,1\n2,2\n")
        assert cli_main(["list"]) == 0
        assert cli_main(["summarize", "--pattern", pattern, "--statistic", "nope", "--quiet"]) == 2
        assert cli_main(["summarize"]) == 2
        assert cli_main(["summarize", "--pattern", pattern, "--statistic", "K",
                         "--grid", "5:1:3", "--quiet"]) == 2
        missing = os.path.join(directory, "absent.csv")
        assert cli_main(["summarize", "--pattern", missing, "--statistic", "K", "--quiet"]) == 1
    print("✓ list 返回 0，未知统计量与参数错误返回 2，缺失文件返回 1")


def test_cli_commands():
    """summarize、envelope 与 distances 子命令"""
    with tempfile.TemporaryDirectory() as directory:
        rng = np.random.default_rng(8)
        frame = pd.DataFrame({"x": rng.uniform(0, 100, 40), "y": rng.uniform(0, 100, 40),
                              "mark1": rng.uniform(1, 2, 40)})
        pattern = os.path.join(directory, "points.csv")
        frame.to_csv(pattern, index=False)

        k_path = os.path.join(directory, "k.csv")
        assert cli_main(["summarize", "--pattern", pattern, "--window", "0,100,0,100",
                         "--statistic", "K", "--grid", "0:20:5", "--out", k_path, "--quiet"]) == 0
        curve = read_curve(k_path)
        assert len(curve) == 5 and curve.values[0] == 0.0

        envelope_path = os.path.join(directory, "envelope.json")
        assert cli_main(["envelope", "--pattern", pattern, "--window", "0,100,0,100",
                         "--statistic", "tf_correlation", "--grid", "0:20:5", "--bandwidth", "3",
                         "--nsim", "3", "--rank", "1", "--seed", "5", "--threads", "1",
                         "--out", envelope_path, "--format", "json", "--quiet"]) == 0
        result = read_curve(envelope_path)
        assert isinstance(result, EnvelopeResult) and result.n_sim == 3
        print("✓ summarize 与 envelope 写出曲线文件")

        network = write_text(directory, "line.csv", "x1,y1,x2,y2\n0,0,10,0\n")
        sites = write_text(directory, "sites.csv", "x,y\n7,0\n1,0\n3,0\n")
        out = os.path.join(directory, "distances")
        assert cli_main(["distances", "--pattern", sites, "--network", network,
                         "--out", out, "--quiet"]) == 0
        distances = pd.read_csv(os.path.join(out, "distances.csv")).drop(columns="site").to_numpy()
        counts = pd.read_csv(os.path.join(out, "perimeter_counts.csv")).drop(columns="site").to_numpy()
        assert np.allclose(distances, [[0, 2, 6], [2, 0, 4], [6, 4, 0]])
        # 偏移 1 的点距离 2 处只有一侧在线段内，偏移 3 的点距离 2 处两侧都在
        assert counts.tolist() == [[0, 1, 1], [2, 0, 1], [1, 1, 0]]
        print("✓ distances 输出按坐标排序的距离矩阵与圆周点计数")


def test_repro_deterministic():
    """相同种子的复现实验输出逐字节相同，与线程数无关"""
    config = {"repro": {"n_points": 30, "n_sim": 3, "rank": 1, "grid_count": 6}}
    with tempfile.TemporaryDirectory() as directory:
        config_path = write_text(directory, "config.json", json.dumps(config))
        first = os.path.join(directory, "first")
        second = os.path.join(directory, "second")
        assert cli_main(["repro", "--config", config_path, "--seed", "7", "--threads", "1",
                         "--out", first, "--quiet"]) == 0
        assert cli_main(["repro", "--config", config_path, "--seed", "7", "--threads", "2",
                         "--out", second, "--quiet"]) == 0

        names = sorted(os.listdir(first))
        expected = sorted([f"model_{model}_{domain}.csv" for model in ("I", "II", "III")
                           for domain in ("planar", "network")] + ["network.csv", "report.json"])
        assert names == expected
        assert sorted(os.listdir(second)) == names
        _, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
        assert not mismatch and not errors

        with open(os.path.join(first, "report.json"), encoding="utf-8") as f:
            report = json.load(f)
        assert abs(report["network"]["diameter"] - 250.0) < 1e-9
        assert len(pd.read_csv(os.path.join(first, "model_I_network.csv"))) == 6
    print("✓ 线程数 1 与 2 的复现实验输出逐字节相同")


def main():
    """主测试函数"""
    print("导入导出、配置与命令行测试")
    print("=" * 50)

    tests = [test_pattern_csv, test_network_files, test_curve_export, test_config,
             test_cli_exit_codes, test_cli_commands, test_repro_deterministic]
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
    print("✓ 导入导出、配置与命令行测试全部通过！")


if __name__ == "__main__":
    main()
