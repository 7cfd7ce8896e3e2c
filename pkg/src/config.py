"""常數和配置設定."""

import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from dotenv import dotenv_values, load_dotenv

from .errors import ConfigError

# 環境變數（.env 可覆寫）
load_dotenv()

# 預設的 8 組本地振盪器失諧（MHz）
DEFAULT_DETUNINGS_MHZ = (-10.0, -5.0, 0.0, 3.0, 8.0, 13.0, 18.0, 23.0)

# 實驗量測的典型尺度
LAB_SAMPLES = 500_000
LAB_BIN_NS = 30.0
RABI_BIN_NS = 10.0
RABI_OMEGA_C_MHZ = 31.5

# 失諧換算慣例
ANGULAR_2PI = "2pi"
ANGULAR_DIRECT = "direct"
ANGULAR_CONVENTIONS = (ANGULAR_2PI, ANGULAR_DIRECT)

# 無雜訊模式的樣本數標記
EXACT = "exact"

# 正規化與數值容差
NORMALIZATION_TOL = 1e-10
TRACE_TOL = 1e-6
HERMITIAN_TOL = 1e-10
SMALL_TRACE = 1e-6
FIDELITY_IMAG_TOL = 1e-10

# 半正定投影的診斷門檻（以跡為單位的特徵值）
DEFAULT_PSD_TOL = 0.05

# 協方差檢查：低於此值視為模型錯誤
COVARIANCE_EIG_TOL = 1e-8
# 分解前的特徵值裁切門檻
FACTOR_EIG_TOL = 1e-10

# 重建
DEFAULT_PHASE_THRESHOLD = 0.05
CONDITION_LIMIT = 1e8

# 往返驗收門檻
ROUNDTRIP_MIN_FIDELITY = 1 - 1e-9
ROUNDTRIP_MAX_ELEMENT_ERROR = 1e-10
ROUNDTRIP_MIN_PURITY = 0.90
ROUNDTRIP_MIN_RAW_TRACE = 0.1

# 亂數區塊大小（每個 Philox 計數器區段的軌跡數）
BLOCK_SIZE = int(os.getenv("TBTOMO_BLOCK_SIZE", "4096"))

# 執行緒數量
MAX_WORKERS = int(os.getenv("TBTOMO_MAX_WORKERS", str(min(8, os.cpu_count() or 1))))

# 可用的 TMF 模型
TMF_MODELS = (
    "rabi",
    "exponential",
    "hermite_gauss",
    "time_bin",
    "tabulated",
    "joint_spectrum",
)

TRACE_FORMATS = ("none", "csv", "binary")


def _parse_bool(value: str) -> bool:
    text = value.strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"無法解析布林值: {value!r}")


def _parse_samples(value: str):
    text = value.strip().lower()
    if text == EXACT:
        return EXACT
    n = int(text)
    if n < 2:
        raise ValueError("n_samples 至少為 2")
    return n


def _parse_m(value: str) -> Optional[int]:
    text = value.strip().lower()
    if text == "auto":
        return None
    return int(text)


def _parse_detunings(value: str) -> tuple:
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if not parts:
        raise ValueError("失諧列表為空")
    return tuple(float(p) for p in parts)


def _parse_choice(choices: tuple):
    def parse(value: str) -> str:
        text = value.strip().lower()
        if text not in choices:
            raise ValueError(f"必須是 {', '.join(choices)} 之一")
        return text

    return parse


def _parse_seed(value: str) -> int:
    seed = int(value.strip())
    if not 0 <= seed < 2**64:
        raise ValueError("seed 必須是 u64")
    return seed


# 設定鍵 -> 解析函數
_PARSERS = {
    "tmf_model": _parse_choice(TMF_MODELS),
    "tmf_path": str.strip,
    "omega_c_mhz": float,
    "gamma13_per_ns": float,
    "gamma12_per_ns": float,
    "gamma_per_ns": float,
    "rise_ns": float,
    "hg_order": int,
    "hg_center_ns": float,
    "hg_width_ns": float,
    "bin_j": int,
    "bin_k": int,
    "bin_phase_rad": float,
    "t_start_ns": float,
    "dt_ns": float,
    "n_bins": int,
    "detunings_mhz": _parse_detunings,
    "angular_convention": _parse_choice(ANGULAR_CONVENTIONS),
    "eta": float,
    "n_samples": _parse_samples,
    "seed": _parse_seed,
    "out_dir": str.strip,
    "psd": _parse_bool,
    "phase_threshold": float,
    "m": _parse_m,
    "save_traces": _parse_choice(TRACE_FORMATS),
    "labels": str.strip,
}


@dataclass(frozen=True)
class RunConfig:
    """一次模擬/重建的完整設定.

    所有欄位都有預設值，只有 tmf_model 在模擬時必須提供。
    """

    tmf_model: Optional[str] = None
    tmf_path: Optional[str] = None
    omega_c_mhz: float = RABI_OMEGA_C_MHZ
    gamma13_per_ns: float = 0.003
    gamma12_per_ns: float = 0.003
    gamma_per_ns: float = 0.005
    rise_ns: float = 0.0
    hg_order: int = 0
    hg_center_ns: float = 300.0
    hg_width_ns: float = 60.0
    bin_j: int = 10
    bin_k: int = 20
    bin_phase_rad: float = 0.0
    t_start_ns: float = 0.0
    dt_ns: float = RABI_BIN_NS
    n_bins: int = 64
    detunings_mhz: tuple = DEFAULT_DETUNINGS_MHZ
    angular_convention: str = ANGULAR_2PI
    eta: float = 1.0
    n_samples: object = EXACT
    seed: int = 0
    out_dir: str = "tomo_out"
    psd: bool = False
    phase_threshold: float = DEFAULT_PHASE_THRESHOLD
    m: Optional[int] = None
    save_traces: str = "none"
    labels: str = ""

    @property
    def is_exact(self) -> bool:
        return self.n_samples == EXACT

    def to_mapping(self) -> dict:
        """轉成可寫入 manifest 的字串字典."""
        data = asdict(self)
        out = {}
        for key, value in data.items():
            if value is None:
                out[key] = "auto" if key == "m" else ""
            elif key == "detunings_mhz":
                out[key] = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, bool):
                out[key] = "true" if value else "false"
            else:
                out[key] = str(value)
        return out


def parse_config_mapping(mapping: dict) -> dict:
    """解析字串字典為 RunConfig 欄位值.

    Args:
        mapping: 鍵值字典（值為字串或 None）

    Returns:
        已轉型的欄位字典

    Raises:
        ConfigError: 未知鍵值或格式錯誤
    """
    unknown = sorted(set(mapping) - set(_PARSERS))
    if unknown:
        raise ConfigError(f"未知的設定鍵: {', '.join(unknown)}")

    parsed = {}
    for key, raw in mapping.items():
        if raw is None:
            raise ConfigError(f"設定鍵 {key} 缺少值")
        if key in ("tmf_path", "labels", "out_dir") and raw.strip() == "":
            continue
        try:
            parsed[key] = _PARSERS[key](raw)
        except ValueError as e:
            raise ConfigError(f"設定鍵 {key} 的值 {raw!r} 無效: {e}") from e
    return parsed


def load_run_config(path: Optional[Path] = None, overrides: Optional[dict] = None) -> RunConfig:
    """讀取 key = value 設定檔並套用覆寫值.

    Args:
        path: 設定檔路徑（None 表示只用預設值）
        overrides: 命令列覆寫值（字串字典，優先於設定檔）

    Returns:
        RunConfig

    Raises:
        ConfigError: 檔案不存在、未知鍵值或值無效
    """
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"找不到設定檔: {path}")
        values.update(parse_config_mapping(dict(dotenv_values(path))))
    if overrides:
        values.update(parse_config_mapping(overrides))

    config = RunConfig(**values)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if not 0.0 <= config.eta <= 1.0:
        raise ConfigError(f"eta 必須介於 0 與 1: {config.eta}")
    if config.dt_ns <= 0 or config.n_bins < 2:
        raise ConfigError("網格需要 dt_ns > 0 且 n_bins >= 2")
    if config.phase_threshold < 0:
        raise ConfigError("phase_threshold 不可為負")
    if config.tmf_model in ("tabulated", "joint_spectrum") and not config.tmf_path:
        raise ConfigError(f"tmf_model={config.tmf_model} 需要 tmf_path")
