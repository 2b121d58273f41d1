"""
包络系统
蒙特卡洛逐点包络：任意汇总曲线 + 任意零模型生成器，独立随机流上并行重复
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from tqdm import tqdm

from core_data_structures import SummaryCurve
from exceptions import GridMismatch, InvalidRank, LinmarkError, NoMarks, SimulationFailure
from monte_carlo_engine import RngSpec, binomial_planar, random_label, uniform_on_network
from patterns import MarkedPattern


Statistic = Callable[[MarkedPattern], SummaryCurve]
NullGenerator = Callable[[MarkedPattern, np.random.Generator], MarkedPattern]

# 至少这么多比例的重复在某网格点上有值，该点的包络才有效
VALID_SHARE = 0.95


@dataclass
class EnvelopeResult:
    """逐点包络结果，无效网格点的 lo/hi/mean 为 NaN"""
    r: np.ndarray
    observed: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    mean: np.ndarray
    theo: np.ndarray
    n_sim: int
    rank: int
    exceed_fraction: float
    label: str = ""
    valid: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def nominal_level(self) -> float:
        """逐点名义水平 2·rank/(n_sim + 1)"""
        return 2.0 * self.rank / (self.n_sim + 1)

    def outside(self) -> np.ndarray:
        """观测曲线落在 [lo, hi] 之外的网格点（严格比较）"""
        with np.errstate(invalid="ignore"):
            return (self.observed < self.lo) | (self.observed > self.hi)

    def __len__(self) -> int:
        return len(self.r)


def check_rank(n_sim: int, rank: int) -> None:
    if rank < 1:
        raise InvalidRank(f"rank 必须至少为 1，实际为 {rank}")
    if n_sim < 2 * rank - 1:
        raise InvalidRank(f"n_sim={n_sim} 不足以取第 {rank} 个极值（需要 n_sim ≥ {2 * rank - 1}）")


def envelope_from_curves(observed: SummaryCurve, simulated: Sequence[SummaryCurve], rank: int = 5,
                         valid_share: float = VALID_SHARE) -> EnvelopeResult:
    """
    由观测曲线和模拟曲线归约出逐点包络

    每个网格点上 lo、hi 分别是有效模拟值中第 rank 小与第 rank 大的值；
    缺失（NaN）的模拟值不参与排序
    """
    n_sim = len(simulated)
    check_rank(n_sim, rank)
    for index, curve in enumerate(simulated):
        if curve.r.shape != observed.r.shape or not np.array_equal(curve.r, observed.r):
            raise GridMismatch(f"第 {index} 条模拟曲线的距离网格与观测曲线不一致")

    stack = np.vstack([curve.values for curve in simulated])
    finite = np.isfinite(stack)
    counts = finite.sum(axis=0)
    required = max(math.ceil(valid_share * n_sim - 1e-9), 2 * rank - 1)
    valid = counts >= required

    # NaN 排在末尾，前 counts 个即有效值
    ordered = np.sort(stack, axis=0)
    columns = np.arange(stack.shape[1])
    lo = np.full(stack.shape[1], np.nan)
    hi = np.full(stack.shape[1], np.nan)
    mean = np.full(stack.shape[1], np.nan)
    lo[valid] = ordered[rank - 1, columns[valid]]
    hi[valid] = ordered[counts[valid] - rank, columns[valid]]
    mean[valid] = np.where(finite, stack, 0.0).sum(axis=0)[valid] / counts[valid]

    result = EnvelopeResult(r=observed.r.copy(), observed=observed.values.copy(), lo=lo, hi=hi,
                            mean=mean, theo=observed.theo.copy(), n_sim=n_sim, rank=rank,
                            exceed_fraction=0.0, label=observed.label, valid=valid,
                            metadata=dict(observed.metadata))

    evaluable = valid & np.isfinite(observed.values)
    if evaluable.any():
        result.exceed_fraction = float(result.outside()[evaluable].mean())
    else:
        logger.warning(f"{observed.label}: 没有可比较的网格点，exceed_fraction 记为 0")
    if (~valid).any():
        logger.debug(f"{observed.label}: {int((~valid).sum())} 个网格点有效重复不足，包络被屏蔽")
    return result


def _rng_spec(rng: Union[RngSpec, int, None]) -> RngSpec:
    if rng is None:
        return RngSpec(0)
    if isinstance(rng, RngSpec):
        return rng
    return RngSpec(int(rng))


def simulate_curves(pattern: MarkedPattern, statistic: Statistic, null_generator: NullGenerator,
                    n_sim: int, rng: Union[RngSpec, int, None] = None, n_jobs: Optional[int] = None,
                    progress: bool = False, description: str = "模拟") -> List[SummaryCurve]:
    """
    在独立随机流上生成 n_sim 条零模型曲线

    第 k 次重复使用流 k + 1（流 0 留给观测数据本身的生成）；结果按重复编号排列
    """
    spec = _rng_spec(rng)

    def replicate(k: int) -> SummaryCurve:
        try:
            simulated = null_generator(pattern, spec.spawn(k + 1).generator())
            return statistic(simulated)
        except Exception as error:
            raise SimulationFailure(k, error) from error

    tasks = tqdm(range(n_sim), desc=description, disable=not progress, leave=False)
    return Parallel(n_jobs=n_jobs or 1, backend="threading")(delayed(replicate)(k) for k in tasks)


def pointwise_envelope(pattern: MarkedPattern, statistic: Statistic, null_generator: NullGenerator,
                       n_sim: int = 199, rank: int = 5, rng: Union[RngSpec, int, None] = None,
                       n_jobs: Optional[int] = None, progress: bool = False,
                       valid_share: float = VALID_SHARE) -> EnvelopeResult:
    """
    逐点蒙特卡洛包络

    n_sim=199、rank=5 时逐点名义水平为 5%
    """
    check_rank(n_sim, rank)
    observed = statistic(pattern)
    logger.info(f"包络: {observed.label}, n_sim={n_sim}, rank={rank}")
    simulated = simulate_curves(pattern, statistic, null_generator, n_sim, rng, n_jobs, progress,
                                description=observed.label or "模拟")
    result = envelope_from_curves(observed, simulated, rank, valid_share)
    logger.debug(f"{observed.label}: exceed_fraction={result.exceed_fraction:.4f}")
    return result


def random_labeling_envelope(pattern: MarkedPattern, statistic: Statistic, n_sim: int = 199,
                             rank: int = 5, rng: Union[RngSpec, int, None] = None,
                             n_jobs: Optional[int] = None, progress: bool = False,
                             independent: bool = False) -> EnvelopeResult:
    """标记独立零模型：位置固定，标记随机重分配"""
    if pattern.marks is None and pattern.types is None:
        raise NoMarks("随机重标记包络需要带标记或类型的点模式")

    def null_generator(source: MarkedPattern, generator: np.random.Generator) -> MarkedPattern:
        return random_label(source, generator, independent=independent)

    result = pointwise_envelope(pattern, statistic, null_generator, n_sim, rank, rng, n_jobs, progress)
    result.metadata["null"] = "random-labeling"
    return result


def csr_null(pattern: MarkedPattern, generator: np.random.Generator) -> MarkedPattern:
    """同一区域上的均匀放置，点数、类型与标记原样带上"""
    if pattern.is_network:
        placed = uniform_on_network(pattern.network, pattern.n, generator, base_engine=pattern.engine)
    else:
        placed = binomial_planar(pattern.window, pattern.n, generator)
    return placed.replace(types=pattern.types, type_labels=pattern.type_labels,
                          marks=pattern.marks, metadata=dict(pattern.metadata))


def csr_envelope(pattern: MarkedPattern, statistic: Statistic, n_sim: int = 199, rank: int = 5,
                 rng: Union[RngSpec, int, None] = None, n_jobs: Optional[int] = None,
                 progress: bool = False) -> EnvelopeResult:
    if pattern.n == 0:
        raise LinmarkError("空点模式无法构造 CSR 包络")
    result = pointwise_envelope(pattern, statistic, csr_null, n_sim, rank, rng, n_jobs, progress)
    result.metadata["null"] = "csr"
    return result


if __name__ == "__main__":
    from monte_carlo_engine import dendrite_like_network, mark_model
    from network_summaries import tf_correlation_network

    network = dendrite_like_network(depth=4, rng=RngSpec(3))
    pattern = mark_model(uniform_on_network(network, 60, RngSpec(3, 0)), "I")
    envelope = random_labeling_envelope(pattern, tf_correlation_network, n_sim=39, rank=1, rng=3)
    print(f"{envelope.label}: exceed_fraction = {envelope.exceed_fraction:.3f}")
