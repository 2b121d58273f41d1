"""
参数配置
config.json / YAML 配置文件加载、数据类校验与命令行参数覆盖
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml
from joblib import cpu_count
from loguru import logger

from exceptions import ConfigError
from monte_carlo_engine import MARK_MODELS, SimulationConfig


# 默认线程数的环境变量
THREADS_ENV = "LINMARK_THREADS"

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent / "config.json"

COMMANDS = ("summarize", "envelope", "simulate", "distances", "repro")
OUTPUT_FORMATS = ("csv", "json")
NULL_MODELS = ("labeling", "csr")


@dataclass
class EstimationConfig:
    """估计参数"""
    kernel_coefficient: float = 0.15        # 默认带宽系数：平面 c/sqrt(λ)，网络 c/λ
    grid_count: int = 129                   # 默认距离网格点数
    planar_correction: str = "translation"  # 平面边缘校正
    intensity: str = "constant"             # 强度估计：constant、kernel（平面）或 lixel-kernel（网络）

    def __post_init__(self):
        if self.kernel_coefficient <= 0:
            raise ConfigError("带宽系数必须为正")
        if self.grid_count < 2:
            raise ConfigError("距离网格至少需要 2 个点")
        if self.planar_correction not in ("border", "translation", "isotropic", "none"):
            raise ConfigError(f"未知边缘校正: {self.planar_correction}")
        if self.intensity not in ("constant", "kernel", "lixel-kernel"):
            raise ConfigError(f"未知强度模式: {self.intensity}")


@dataclass
class EnvelopeConfig:
    """包络参数"""
    n_sim: int = 199                 # 模拟次数
    rank: int = 5                    # 取第 rank 个极值
    valid_share: float = 0.95        # 网格点有效所需的重复比例
    threads: Optional[int] = None    # 并行线程数，None 时取环境变量或 CPU 数

    def __post_init__(self):
        if self.n_sim < 1:
            raise ConfigError("模拟次数至少为 1")
        if self.rank < 1 or self.n_sim < 2 * self.rank - 1:
            raise ConfigError(f"n_sim={self.n_sim} 与 rank={self.rank} 不相容")
        if not 0 < self.valid_share <= 1:
            raise ConfigError("有效比例必须在 (0, 1] 之间")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("线程数至少为 1")


@dataclass
class ReproConfig:
    """树突网络上三种标记模型的复现实验"""
    n_points: int = 100              # 每次实现的点数
    n_sim: int = 199                 # 每个模型的重复次数
    rank: int = 5
    planar_r_max: float = 200.0      # 平面距离上限
    network_r_max: float = 250.0     # 网络距离上限
    ratio: float = 1.25              # r_L = ratio · r
    grid_count: int = 51
    target_diameter: float = 250.0   # 代理网络缩放后的直径
    test_function: str = "stoyan"
    models: Tuple[str, ...] = MARK_MODELS
    labeling: bool = False           # 额外输出随机重标记包络：每次实现重标记一次，与均值曲线比较

    def __post_init__(self):
        self.models = tuple(self.models)
        if self.n_points < 2 or self.n_sim < 1 or self.grid_count < 2:
            raise ConfigError("点数至少为 2，模拟次数至少为 1，网格至少 2 个点")
        if self.rank < 1 or self.n_sim < 2 * self.rank - 1:
            raise ConfigError(f"n_sim={self.n_sim} 与 rank={self.rank} 不相容")
        if min(self.planar_r_max, self.ratio, self.target_diameter) <= 0:
            raise ConfigError("距离上限、比例与目标直径必须为正")
        if abs(self.network_r_max - self.ratio * self.planar_r_max) > 1e-9 * self.network_r_max:
            raise ConfigError(f"网络距离上限 {self.network_r_max} 应等于 "
                              f"{self.ratio} × 平面距离上限 {self.planar_r_max}")
        unknown = set(self.models) - set(MARK_MODELS)
        if unknown:
            raise ConfigError(f"未知标记模型: {sorted(unknown)}")


@dataclass
class ExportConfig:
    """导出参数"""
    float_digits: int = 17
    default_format: str = "csv"

    def __post_init__(self):
        if not 1 <= self.float_digits <= 17:
            raise ConfigError("有效数字位数必须在 1 到 17 之间")
        if self.default_format not in OUTPUT_FORMATS:
            raise ConfigError(f"未知输出格式: {self.default_format}")


@dataclass
class AppConfig:
    """配置文件的全部内容"""
    application: Dict[str, Any] = field(default_factory=dict)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    repro: ReproConfig = field(default_factory=ReproConfig)
    export: ExportConfig = field(default_factory=ExportConfig)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["repro"]["models"] = list(self.repro.models)
        return data


SECTIONS = {
    "estimation": EstimationConfig,
    "envelope": EnvelopeConfig,
    "simulation": SimulationConfig,
    "repro": ReproConfig,
    "export": ExportConfig,
}


@dataclass
class RunConfig:
    """一次命令行运行的完整参数"""
    command: str
    pattern_path: Optional[str] = None
    network_path: Optional[str] = None
    statistic: Optional[str] = None
    test_function: str = "stoyan"
    grid: Optional[Tuple[float, float, int]] = None      # (min, max, count)
    bandwidth: Optional[float] = None
    n_sim: int = 199
    rank: int = 5
    seed: int = 0
    out: Optional[str] = None
    output_format: str = "csv"
    threads: int = 1
    null: str = "labeling"
    i: Optional[str] = None                              # 类型 i（标签或编号）
    j: Optional[str] = None
    correction: str = "translation"
    intensity: str = "constant"
    app: AppConfig = field(default_factory=AppConfig, repr=False)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"未知子命令: {self.command}，可选 {COMMANDS}")
        if self.grid is not None and int(self.grid[2]) < 2:
            raise ConfigError("距离网格至少需要 2 个点")
        if self.n_sim < 1:
            raise ConfigError("模拟次数至少为 1")
        if self.rank < 1 or self.n_sim < 2 * self.rank - 1:
            raise ConfigError(f"n_sim={self.n_sim} 与 rank={self.rank} 不相容")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"未知输出格式: {self.output_format}，可选 {OUTPUT_FORMATS}")
        if self.null not in NULL_MODELS:
            raise ConfigError(f"未知零模型: {self.null}，可选 {NULL_MODELS}")
        if self.threads < 1:
            raise ConfigError("线程数至少为 1")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError(f"带宽必须为正，实际为 {self.bandwidth}")

        from mark_functions import TEST_FUNCTIONS
        from statistic_registry import STATISTICS
        if self.statistic is not None and self.statistic not in STATISTICS:
            raise ConfigError(f"未知统计量: {self.statistic}，可选 {sorted(STATISTICS)}")
        if self.test_function not in TEST_FUNCTIONS:
            raise ConfigError(f"未知检验函数: {self.test_function}，可选 {sorted(TEST_FUNCTIONS)}")


def default_threads() -> int:
    """环境变量 LINMARK_THREADS，未设置时取 CPU 数"""
    value = os.environ.get(THREADS_ENV)
    if value is None or value.strip() == "":
        return max(1, cpu_count())
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} 必须是整数，实际为 {value!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} 至少为 1，实际为 {threads}")
    return threads


def parse_grid_spec(text: str) -> Tuple[float, float, int]:
    """解析 'min:max:count'"""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"网格格式应为 min:max:count，实际为 {text!r}")
    try:
        r_min, r_max, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"无法解析网格: {text!r}")
    if count < 2:
        raise ConfigError("距离网格至少需要 2 个点")
    if not 0 <= r_min < r_max:
        raise ConfigError(f"网格需满足 0 ≤ min < max，实际为 {text!r}")
    return r_min, r_max, count


def _read_file(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
    except OSError as error:
        raise ConfigError(f"无法读取配置文件 {path}: {error}")
    except (json.JSONDecodeError, yaml.YAMLError) as error:
        raise ConfigError(f"配置文件 {path} 格式错误: {error}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"配置文件 {path} 顶层必须是对象")
    return data


def _build_section(name: str, values: Dict[str, Any]):
    cls = SECTIONS[name]
    known = {item.name for item in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"配置节 {name} 中有未知字段: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as error:
        raise ConfigError(f"配置节 {name} 无效: {error}")


def config_from_dict(data: Dict[str, Any]) -> AppConfig:
    unknown = set(data) - set(SECTIONS) - {"application"}
    if unknown:
        raise ConfigError(f"未知配置节: {sorted(unknown)}")
    sections = {name: _build_section(name, data.get(name) or {}) for name in SECTIONS}
    return AppConfig(application=dict(data.get("application") or {}), **sections)


def load_config(path: Optional[str] = None) -> AppConfig:
    """
    加载配置

    未指定路径时使用仓库根目录的 config.json（不存在则全部取默认值）
    """
    if path is None:
        if not DEFAULT_CONFIG_PATH.exists():
            return AppConfig()
        config_path = DEFAULT_CONFIG_PATH
    else:
        config_path = Path(path)
    config = config_from_dict(_read_file(config_path))
    logger.debug(f"已加载配置: {config_path}")
    return config


def save_config(config: AppConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if Path(path).suffix.lower() in (".yaml", ".yml"):
            yaml.safe_dump(config.to_dict(), f, allow_unicode=True, sort_keys=False)
        else:
            json.dump(config.to_dict(), f, indent=2, ensure_ascii=False)


def run_config_from_args(args, app: AppConfig) -> RunConfig:
    """
    命令行参数覆盖配置文件：只有显式给出的参数才覆盖
    """
    envelope = app.envelope
    values: Dict[str, Any] = {
        "command": args.command,
        "n_sim": envelope.n_sim,
        "rank": envelope.rank,
        "output_format": app.export.default_format,
        "correction": app.estimation.planar_correction,
        "intensity": app.estimation.intensity,
        "threads": envelope.threads or default_threads(),
    }
    overrides = {
        "pattern_path": getattr(args, "pattern", None),
        "network_path": getattr(args, "network", None),
        "statistic": getattr(args, "statistic", None),
        "test_function": getattr(args, "testfn", None),
        "grid": parse_grid_spec(args.grid) if getattr(args, "grid", None) else None,
        "bandwidth": getattr(args, "bandwidth", None),
        "n_sim": getattr(args, "nsim", None),
        "rank": getattr(args, "rank", None),
        "seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
        "output_format": getattr(args, "format", None),
        "threads": getattr(args, "threads", None),
        "null": getattr(args, "null", None),
        "i": getattr(args, "i", None),
        "j": getattr(args, "j", None),
        "correction": getattr(args, "correction", None),
        "intensity": getattr(args, "intensity", None),
    }
    values.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig(app=app, **values)


def repro_config_from_args(args, app: AppConfig) -> ReproConfig:
    """repro 子命令：--nsim/--rank/--grid 覆盖 repro 配置节"""
    changes: Dict[str, Any] = {}
    if getattr(args, "nsim", None) is not None:
        changes["n_sim"] = args.nsim
    if getattr(args, "rank", None) is not None:
        changes["rank"] = args.rank
    if getattr(args, "grid", None):
        _, r_max, count = parse_grid_spec(args.grid)
        changes.update(planar_r_max=r_max, network_r_max=app.repro.ratio * r_max, grid_count=count)
    if getattr(args, "testfn", None):
        changes["test_function"] = args.testfn
    if getattr(args, "labeling", False):
        changes["labeling"] = True
    return replace(app.repro, **changes)


if __name__ == "__main__":
    config = load_config()
    print(json.dumps(config.to_dict(), indent=2, ensure_ascii=False))
    print(f"默认线程数: {default_threads()}")
