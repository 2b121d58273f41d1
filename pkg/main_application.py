"""
命令行主程序
summarize / envelope / simulate / distances / repro 五个子命令
"""

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np
from loguru import logger

from config_interface import (
    NULL_MODELS, OUTPUT_FORMATS, AppConfig, RunConfig, load_config,
    repro_config_from_args, run_config_from_args
)
from core_data_structures import Window
from envelope_system import csr_envelope, random_labeling_envelope
from exceptions import ConfigError, LinmarkError
from export_system import (
    ExportManager, curve_document, curve_frame, write_matrix, write_network, write_pattern
)
from import_system import read_network, read_pattern_csv
from mark_functions import available_test_functions
from monte_carlo_engine import (
    MARK_MODELS, RngSpec, binomial_planar, dendrite_like_network, mark_model, poisson_on_network,
    poisson_planar, rescale_network, uniform_on_network
)
from patterns import MarkedPattern
from reproduction_study import run_reproduction
from statistic_registry import StatisticOptions, available_statistics, bind_statistic, get_statistic


EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}"


class ArgumentParserError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """参数错误抛出异常而不是直接退出，由 cli_main 统一映射退出码"""

    def error(self, message):
        raise ArgumentParserError(message)


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    logger.remove()
    level = "DEBUG" if verbose else "WARNING" if quiet else "INFO"
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="配置文件（JSON 或 YAML），默认使用仓库根目录的 config.json")
    common.add_argument("--threads", type=int, help="并行线程数（默认取 LINMARK_THREADS 或 CPU 数）")
    common.add_argument("--seed", type=int, help="随机种子")
    common.add_argument("--out", help="输出文件或目录")
    common.add_argument("--format", choices=OUTPUT_FORMATS, help="输出格式")
    common.add_argument("--verbose", action="store_true", help="输出调试日志")
    common.add_argument("--quiet", action="store_true", help="只输出警告与错误")
    return common


def _statistic_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pattern", required=True, help="点模式 CSV（x,y[,type][,mark1][,mark2]）")
    parser.add_argument("--network", help="网络文件（线段 CSV 或 GeoJSON）；给出时点被吸附到网络上")
    parser.add_argument("--window", help="平面窗口 xmin,xmax,ymin,ymax（默认取点的包围盒）")
    parser.add_argument("--statistic", required=True, help="统计量名称")
    parser.add_argument("--testfn", help="检验函数名称（默认 stoyan）")
    parser.add_argument("--grid", help="距离网格 min:max:count")
    parser.add_argument("--bandwidth", type=float, help="核带宽")
    parser.add_argument("--i", help="类型 i（标签或编号）")
    parser.add_argument("--j", help="类型 j（标签或编号）")
    parser.add_argument("--correction", choices=("border", "translation", "isotropic", "none"),
                        help="平面边缘校正")
    parser.add_argument("--intensity", choices=("constant", "kernel", "lixel-kernel"),
                        help="强度估计方式")


def build_parser() -> argparse.ArgumentParser:
    common = _common_arguments()
    parser = CliParser(prog="linmark", description="平面与线性网络上带标记点过程的汇总统计量")
    commands = parser.add_subparsers(dest="command", parser_class=CliParser)
    commands.required = True

    summarize = commands.add_parser("summarize", parents=[common], help="计算一个汇总统计量")
    _statistic_arguments(summarize)

    envelope = commands.add_parser("envelope", parents=[common], help="蒙特卡洛逐点包络")
    _statistic_arguments(envelope)
    envelope.add_argument("--nsim", type=int, help="模拟次数（默认 199）")
    envelope.add_argument("--rank", type=int, help="取第 rank 个极值（默认 5）")
    envelope.add_argument("--null", choices=NULL_MODELS, help="零模型：随机重标记或 CSR")

    simulate = commands.add_parser("simulate", parents=[common], help="生成点模式或网络")
    simulate.add_argument("--network", help="在给定网络上生成；未给出时生成树突状网络")
    simulate.add_argument("--window", help="在平面窗口 xmin,xmax,ymin,ymax 内生成")
    simulate.add_argument("--n", type=int, help="点数（均匀放置）")
    simulate.add_argument("--lambda", dest="rate", type=float, help="泊松强度")
    simulate.add_argument("--model", choices=MARK_MODELS, help="网络标记模型")
    simulate.add_argument("--depth", type=int, help="树突网络层数")
    simulate.add_argument("--diameter", type=float, help="把网络缩放到给定直径")

    distances = commands.add_parser("distances", parents=[common], help="输出最短路径距离与圆周点计数")
    distances.add_argument("--pattern", required=True, help="点模式 CSV")
    distances.add_argument("--network", required=True, help="网络文件")

    repro = commands.add_parser("repro", parents=[common], help="树突网络上三种标记模型的复现实验")
    repro.add_argument("--nsim", type=int, help="每个模型的重复次数")
    repro.add_argument("--rank", type=int, help="包络的 rank")
    repro.add_argument("--grid", help="平面距离网格 0:max:count（网络网格按比例放大）")
    repro.add_argument("--testfn", help="检验函数名称")
    repro.add_argument("--labeling", action="store_true", help="同时输出随机重标记包络")

    commands.add_parser("list", help="列出统计量与检验函数")
    return parser


def _parse_window(text: Optional[str]) -> Optional[Window]:
    if not text:
        return None
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise ConfigError(f"无法解析窗口: {text!r}")
    if len(values) != 4 or values[0] >= values[1] or values[2] >= values[3]:
        raise ConfigError(f"窗口格式应为 xmin,xmax,ymin,ymax，实际为 {text!r}")
    return Window.rectangle(*values)


def _load_pattern(run: RunConfig, window_text: Optional[str] = None) -> MarkedPattern:
    network = read_network(run.network_path) if run.network_path else None
    return read_pattern_csv(run.pattern_path, network=network, window=_parse_window(window_text))


def _options(run: RunConfig) -> StatisticOptions:
    estimation = run.app.estimation
    return StatisticOptions(i=run.i, j=run.j, test_function=run.test_function,
                            bandwidth=run.bandwidth, kernel_coefficient=estimation.kernel_coefficient,
                            correction=run.correction, intensity=run.intensity, grid=run.grid,
                            grid_count=estimation.grid_count)


def _emit(curve, run: RunConfig) -> None:
    """有 --out 时写文件，否则打印到标准输出"""
    digits = run.app.export.float_digits
    if run.out:
        ExportManager(digits).export(curve, run.out, run.output_format)
        print(f"✓ 已写出 {run.out}")
    elif run.output_format == "json":
        print(json.dumps(curve_document(curve), indent=2, ensure_ascii=False, sort_keys=True))
    else:
        print(curve_frame(curve).to_csv(index=False, na_rep="", float_format=f"%.{digits}g",
                                        lineterminator="\n"), end="")


def command_summarize(run: RunConfig, args) -> int:
    if run.statistic is None:
        raise ConfigError("summarize 需要 --statistic")
    pattern = _load_pattern(run, args.window)
    curve = get_statistic(run.statistic)(pattern, _options(run))
    logger.info(f"{curve.label}: {len(curve)} 个网格点，{int(curve.masked.sum())} 个缺失")
    _emit(curve, run)
    return EXIT_OK


def command_envelope(run: RunConfig, args) -> int:
    if run.statistic is None:
        raise ConfigError("envelope 需要 --statistic")
    pattern = _load_pattern(run, args.window)
    statistic = bind_statistic(run.statistic, _options(run))
    builder = random_labeling_envelope if run.null == "labeling" else csr_envelope
    result = builder(pattern, statistic, n_sim=run.n_sim, rank=run.rank, rng=RngSpec(run.seed),
                     n_jobs=run.threads, progress=not args.quiet)
    print(f"{result.label}: exceed_fraction = {result.exceed_fraction:.4f} "
          f"(名义水平 {result.nominal_level:.4f})")
    _emit(result, run)
    return EXIT_OK


def command_simulate(run: RunConfig, args) -> int:
    app: AppConfig = run.app
    spec = RngSpec(run.seed)
    out_dir = run.out or "."
    os.makedirs(out_dir, exist_ok=True)
    digits = app.export.float_digits

    window = _parse_window(args.window)
    if window is not None:
        if args.rate is not None:
            pattern = poisson_planar(window, args.rate, spec.spawn(1))
        else:
            pattern = binomial_planar(window, args.n or 100, spec.spawn(1))
        write_pattern(pattern, os.path.join(out_dir, "pattern.csv"), digits)
        print(f"✓ 平面点模式 {pattern.n} 个点 → {out_dir}")
        return EXIT_OK

    if run.network_path:
        network = read_network(run.network_path)
    else:
        simulation = app.simulation
        network = dendrite_like_network(args.depth or simulation.dendrite_depth,
                                        simulation.branch_angle, simulation.length_decay,
                                        spec.spawn(0), simulation)
    if args.diameter:
        network = rescale_network(network, args.diameter)
    write_network(network, os.path.join(out_dir, "network.csv"), digits)

    if args.rate is not None:
        pattern = poisson_on_network(network, args.rate, spec.spawn(1))
    elif args.n is not None or args.model is not None:
        pattern = uniform_on_network(network, args.n if args.n is not None else 100, spec.spawn(1))
    else:
        print(f"✓ 网络 {network} → {out_dir}")
        return EXIT_OK
    if args.model is not None:
        pattern = mark_model(pattern, args.model, app.simulation)
    write_pattern(pattern, os.path.join(out_dir, "pattern.csv"), digits)
    print(f"✓ 网络 {network}，点模式 {pattern.n} 个点 → {out_dir}")
    return EXIT_OK


def command_distances(run: RunConfig, args) -> int:
    network = read_network(run.network_path)
    pattern = read_pattern_csv(run.pattern_path, network=network)
    engine = pattern.engine
    sites = np.arange(pattern.n)
    distances = engine.pairwise_distances(sites)
    counts = np.zeros_like(distances)
    for u in sites:
        positive = np.flatnonzero(np.isfinite(distances[u]) & (distances[u] > 0))
        if positive.size:
            counts[u, positive] = engine.perimeter_counts(int(u), distances[u, positive])

    digits = run.app.export.float_digits
    if run.out:
        os.makedirs(run.out, exist_ok=True)
        write_matrix(distances, os.path.join(run.out, "distances.csv"), float_digits=digits)
        write_matrix(counts, os.path.join(run.out, "perimeter_counts.csv"), float_digits=digits)
        print(f"✓ 距离矩阵与圆周点计数 → {run.out}")
    else:
        with np.printoptions(precision=digits, suppress=True, linewidth=160):
            print(distances)
            print(counts.astype(np.int64))
    return EXIT_OK


def command_repro(run: RunConfig, args) -> int:
    if not run.out:
        raise ConfigError("repro 需要 --out 输出目录")
    app = run.app
    config = repro_config_from_args(args, app)
    if config.test_function not in available_test_functions(network=True):
        raise ConfigError(f"复现实验的检验函数必须适用于网络: {config.test_function}")
    report = run_reproduction(run.out, config, app.simulation, seed=run.seed, n_jobs=run.threads,
                              format_type=run.output_format, progress=not args.quiet,
                              kernel_coefficient=app.estimation.kernel_coefficient,
                              float_digits=app.export.float_digits)
    for label, summary in sorted(report.curves.items()):
        print(f"{label}: 峰值 {summary.peak_value} @ {summary.peak_fraction}，"
              f"向下穿越 1 @ {summary.crossing_fraction}")
    print(f"✓ 共写出 {len(report.files)} 个文件与 report.json → {run.out}")
    return EXIT_OK


def command_list() -> int:
    print("平面统计量: " + ", ".join(available_statistics(network=False)))
    print("网络统计量: " + ", ".join(available_statistics(network=True)))
    print("检验函数: " + ", ".join(available_test_functions()))
    return EXIT_OK


HANDLERS = {
    "summarize": command_summarize,
    "envelope": command_envelope,
    "simulate": command_simulate,
    "distances": command_distances,
    "repro": command_repro,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """运行命令行，返回退出码：0 成功，1 运行错误，2 配置错误"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ArgumentParserError as error:
        setup_logging()
        logger.error(f"参数错误: {error}")
        return EXIT_CONFIG
    except SystemExit as error:
        # --help
        return int(error.code or 0)

    if args.command == "list":
        return command_list()

    setup_logging(args.verbose, args.quiet)
    try:
        app = load_config(args.config)
        run = run_config_from_args(args, app)
        return HANDLERS[run.command](run, args)
    except ConfigError as error:
        logger.error(f"配置错误: {error}")
        return EXIT_CONFIG
    except LinmarkError as error:
        logger.error(f"{type(error).__name__}: {error}")
        logger.opt(exception=error).debug("详细堆栈")
        return EXIT_RUNTIME
    except Exception as error:
        logger.error(f"运行失败: {error}")
        logger.opt(exception=error).debug("详细堆栈")
        return EXIT_RUNTIME


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
