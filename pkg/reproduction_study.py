"""
树突网络复现实验
三种依赖位置的标记模型下，平面 κ_mm 与网络 κ^L_mm 的重复模拟均值曲线与逐点包络
"""

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from scipy.stats import spearmanr
from tqdm import tqdm

from core_data_structures import LinearNetwork, SummaryCurve
from envelope_system import EnvelopeResult, envelope_from_curves
from exceptions import IoError, SimulationFailure, ZeroNormalizer
from export_system import ExportManager, write_network
from metric_engine import MetricEngine
from monte_carlo_engine import (
    RngSpec, SimulationConfig, dendrite_like_network, mark_model, random_label, rescale_network,
    uniform_on_network
)
from config_interface import ReproConfig
from patterns import MarkedPattern
from statistic_registry import StatisticOptions, get_statistic


# 每个模型占用的随机流区间
MODEL_STREAM_BLOCK = 1_000_000

DOMAINS = ("planar", "network")

# 前半段的 Spearman 秩相关不超过此值即视为下降趋势
DECREASING_TREND = -0.8


@dataclass
class CurveSummary:
    """一条均值曲线的形状特征（横轴位置同时给出绝对值与占轴比例）"""
    r_max: float
    valid_points: int
    share_above_one: float                 # 均值曲线大于 1 的网格点比例
    share_above_one_lower_half: float      # 前半段（r ≤ r_max/2）大于 1 的比例
    peak_r: Optional[float]
    peak_fraction: Optional[float]
    peak_value: Optional[float]
    crossing_r: Optional[float]            # 均值曲线首次由 >1 降到 ≤1 的位置（线性插值）
    crossing_fraction: Optional[float]
    lower_half_trend: Optional[float]      # 前半段均值与 r 的 Spearman 秩相关
    decreasing_lower_half: bool


@dataclass
class ReproductionReport:
    seed: int
    n_points: int
    n_sim: int
    rank: int
    test_function: str
    network: Dict[str, float]
    curves: Dict[str, CurveSummary] = field(default_factory=dict)
    labeling: Dict[str, Dict[str, float]] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


def summarize_mean_curve(r: np.ndarray, mean: np.ndarray) -> CurveSummary:
    """
    均值曲线的峰值、向下穿过 1 的位置与前半段趋势

    前半段是否下降按均值与 r 的秩相关判断，不逐点比较
    """
    r_max = float(r[-1])
    finite = np.isfinite(mean)
    summary = CurveSummary(r_max=r_max, valid_points=int(finite.sum()), share_above_one=0.0,
                           share_above_one_lower_half=0.0, peak_r=None, peak_fraction=None,
                           peak_value=None, crossing_r=None, crossing_fraction=None,
                           lower_half_trend=None, decreasing_lower_half=False)
    if not finite.any():
        return summary

    rr, values = r[finite], mean[finite]
    summary.share_above_one = float(np.mean(values > 1.0))
    lower = rr <= 0.5 * r_max
    if lower.any():
        summary.share_above_one_lower_half = float(np.mean(values[lower] > 1.0))
    peak = int(np.argmax(values))
    summary.peak_r = float(rr[peak])
    summary.peak_fraction = float(rr[peak] / r_max)
    summary.peak_value = float(values[peak])

    above = values > 1.0
    drops = np.flatnonzero(above[:-1] & ~above[1:])
    if drops.size:
        k = int(drops[0])
        t = (values[k] - 1.0) / (values[k] - values[k + 1])
        summary.crossing_r = float(rr[k] + t * (rr[k + 1] - rr[k]))
        summary.crossing_fraction = summary.crossing_r / r_max

    if lower.sum() >= 3 and np.ptp(values[lower]) > 0:
        trend = float(spearmanr(rr[lower], values[lower])[0])
        summary.lower_half_trend = trend
        summary.decreasing_lower_half = trend <= DECREASING_TREND
    return summary


class ReproductionStudy:
    """
    在缩放后的代理树突网络上：每个模型重复 n_sim 次
    （均匀放置 n_points 个点 → 标记模型 → 平面与网络 t_f 相关函数），
    输出每个模型、每个区域的均值曲线与逐点包络
    """

    def __init__(self, config: ReproConfig, simulation: Optional[SimulationConfig] = None,
                 seed: int = 0, n_jobs: int = 1, progress: bool = False,
                 kernel_coefficient: float = 0.15):
        self.config = config
        self.simulation = simulation or SimulationConfig()
        self.seed = int(seed)
        self.n_jobs = n_jobs
        self.progress = progress
        self.options = StatisticOptions(test_function=config.test_function,
                                        kernel_coefficient=kernel_coefficient)
        self.planar_r = np.linspace(0.0, config.planar_r_max, config.grid_count)
        self.network_r = config.ratio * self.planar_r
        self.network: Optional[LinearNetwork] = None
        self.base_engine: Optional[MetricEngine] = None

    # ---- 网络与单次实现 ----

    def build_network(self) -> LinearNetwork:
        simulation = self.simulation
        surrogate = dendrite_like_network(simulation.dendrite_depth, simulation.branch_angle,
                                          simulation.length_decay, RngSpec(self.seed, 0), simulation)
        self.network = rescale_network(surrogate, self.config.target_diameter)
        self.base_engine = MetricEngine(self.network, np.zeros(0, dtype=np.int64), np.zeros(0))
        logger.info(f"代理树突网络: {self.network}，直径 {self.base_engine.diameter():.6g}")
        return self.network

    def realization(self, model: str, replicate: int) -> MarkedPattern:
        index = self.config.models.index(model)
        spec = RngSpec(self.seed, 1 + index * MODEL_STREAM_BLOCK + replicate)
        points = uniform_on_network(self.network, self.config.n_points, spec, self.base_engine)
        return mark_model(points, model, self.simulation)

    def _curve(self, pattern: MarkedPattern, domain: str) -> SummaryCurve:
        name = "tf_correlation_network" if domain == "network" else "tf_correlation"
        r = self.network_r if domain == "network" else self.planar_r
        try:
            return get_statistic(name)(pattern, self.options, r)
        except ZeroNormalizer as error:
            # 标记全相同的实现没有定义，按缺失处理
            logger.warning(f"{pattern.metadata.get('mark_model')}: {error}，该次曲线记为缺失")
            return SummaryCurve(r=r, values=np.full(len(r), np.nan), theo=1.0, label=name)

    def replicate_curves(self, model: str, replicate: int) -> Dict[str, SummaryCurve]:
        """一次实现的平面与网络曲线；开启重标记时附带同一实现随机重标记后的曲线"""
        try:
            pattern = self.realization(model, replicate)
            curves = {domain: self._curve(pattern, domain) for domain in DOMAINS}
            if self.config.labeling:
                index = self.config.models.index(model)
                spec = RngSpec(self.seed, (len(self.config.models) + 1 + index) * MODEL_STREAM_BLOCK
                               + replicate)
                shuffled = random_label(pattern, spec)
                curves.update({f"labeling_{domain}": self._curve(shuffled, domain)
                               for domain in DOMAINS})
            return curves
        except Exception as error:
            raise SimulationFailure(replicate, error) from error

    # ---- 汇总 ----

    def model_envelopes(self, model: str) -> Dict[str, EnvelopeResult]:
        """
        每个区域的均值曲线与逐点包络

        开启重标记时另给出 labeling_model_* 包络：由各次实现重标记后的曲线构成，
        观测曲线为同一条均值曲线
        """
        n_sim = self.config.n_sim
        tasks = tqdm(range(n_sim), desc=f"模型 {model}", disable=not self.progress, leave=False)
        replicates = Parallel(n_jobs=self.n_jobs, backend="threading")(
            delayed(self.replicate_curves)(model, k) for k in tasks)

        results = {}
        for domain in DOMAINS:
            curves = [replicate[domain] for replicate in replicates]
            stack = np.vstack([curve.values for curve in curves])
            counts = np.isfinite(stack).sum(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                mean = np.where(counts > 0, np.nansum(stack, axis=0) / np.maximum(counts, 1), np.nan)
            observed = SummaryCurve(r=curves[0].r, values=mean, theo=curves[0].theo,
                                    label=f"model_{model}_{domain}",
                                    metadata={"model": model, "domain": domain,
                                              "statistic": curves[0].label,
                                              "test_function": self.config.test_function})
            results[observed.label] = envelope_from_curves(observed, curves, self.config.rank)

            if self.config.labeling:
                shuffled = [replicate[f"labeling_{domain}"] for replicate in replicates]
                labeled = envelope_from_curves(observed, shuffled, self.config.rank)
                labeled.label = f"labeling_model_{model}_{domain}"
                labeled.metadata.update(null="random-labeling")
                results[labeled.label] = labeled
        return results

    def run(self, out_dir: str, format_type: str = "csv", float_digits: int = 17) -> ReproductionReport:
        if self.network is None:
            self.build_network()
        config = self.config
        report = ReproductionReport(
            seed=self.seed, n_points=config.n_points, n_sim=config.n_sim, rank=config.rank,
            test_function=config.test_function,
            network={"vertices": self.network.n_vertices, "segments": self.network.n_segments,
                     "total_length": float(self.network.total_length),
                     "diameter": float(self.base_engine.diameter())})

        exporter = ExportManager(float_digits)
        curves: Dict[str, EnvelopeResult] = {}
        for model in config.models:
            for label, result in self.model_envelopes(model).items():
                curves[label] = result
                if label.startswith("labeling_"):
                    report.labeling[label] = {
                        "exceed_fraction": float(result.exceed_fraction),
                        "inside_fraction": float(1.0 - result.exceed_fraction)}
                else:
                    report.curves[label] = summarize_mean_curve(result.r, result.mean)
            logger.info(f"模型 {model} 完成")

        paths = exporter.export_multiple(curves, out_dir, format_type)
        network_path = os.path.join(out_dir, "network.csv")
        write_network(self.network, network_path, float_digits)
        report.files = sorted(os.path.basename(path) for path in paths + [network_path])
        self.write_report(report, os.path.join(out_dir, "report.json"))
        return report

    @staticmethod
    def write_report(report: ReproductionReport, path: str) -> None:
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(report.to_dict(), f, indent=2, ensure_ascii=False, sort_keys=True)
                f.write("\n")
        except OSError as error:
            raise IoError(f"无法写入 {path}: {error}")


def run_reproduction(out_dir: str, config: Optional[ReproConfig] = None,
                     simulation: Optional[SimulationConfig] = None, seed: int = 0,
                     n_jobs: int = 1, format_type: str = "csv", progress: bool = False,
                     kernel_coefficient: float = 0.15, float_digits: int = 17) -> ReproductionReport:
    study = ReproductionStudy(config or ReproConfig(), simulation, seed, n_jobs, progress,
                              kernel_coefficient)
    return study.run(out_dir, format_type, float_digits)


if __name__ == "__main__":
    import tempfile

    quick = ReproConfig(n_points=60, n_sim=9, rank=1, grid_count=21)
    with tempfile.TemporaryDirectory() as directory:
        result = run_reproduction(directory, quick, seed=7)
        for label, summary in sorted(result.curves.items()):
            print(f"{label}: 峰值位置 {summary.peak_fraction}, 穿越 {summary.crossing_fraction}")
