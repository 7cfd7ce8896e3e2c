"""工具函數."""

from typing import Iterable, Sequence

import numpy as np

from .config import ANGULAR_2PI, ANGULAR_DIRECT
from .errors import InvalidArgumentError

# 1 MHz 對應的 rad/ns（不含 2π）
_MHZ_TO_PER_NS = 1e-3


def mhz_to_angular(values_mhz: Iterable[float], convention: str = ANGULAR_2PI) -> np.ndarray:
    """將 MHz 失諧轉成核心使用的角頻率（rad/ns）.

    Args:
        values_mhz: 失諧列表（MHz）
        convention: "2pi" 表示 Δω = 2π·Δν；"direct" 表示數字本身就是 Δω（10^6 rad/s）

    Returns:
        角頻率陣列（rad/ns）
    """
    values = np.asarray(list(values_mhz), dtype=float)
    if convention == ANGULAR_2PI:
        return 2 * np.pi * values * _MHZ_TO_PER_NS
    if convention == ANGULAR_DIRECT:
        return values * _MHZ_TO_PER_NS
    raise InvalidArgumentError(f"未知的角頻率慣例: {convention}")


def angular_to_mhz(values: Iterable[float], convention: str = ANGULAR_2PI) -> np.ndarray:
    """mhz_to_angular 的反函數."""
    values = np.asarray(list(values), dtype=float)
    if convention == ANGULAR_2PI:
        return values / (2 * np.pi * _MHZ_TO_PER_NS)
    if convention == ANGULAR_DIRECT:
        return values / _MHZ_TO_PER_NS
    raise InvalidArgumentError(f"未知的角頻率慣例: {convention}")


def wrap_phase(phase: np.ndarray) -> np.ndarray:
    """將相位收斂到 (−π, π]."""
    wrapped = np.angle(np.exp(1j * np.asarray(phase, dtype=float)))
    return np.where(wrapped <= -np.pi, np.pi, wrapped)


def phase_distance(a, b) -> np.ndarray:
    """兩個相位在圓上的距離（0 到 π）."""
    return np.abs(np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b)))))


def format_ratio(value: float) -> str:
    """格式化比例（如純度）為百分比.

    Args:
        value: 0 到 1 的比例

    Returns:
        百分比字串
    """
    return f"{value * 100:.2f}%"


def format_float(value: float) -> str:
    """以可還原的最短形式輸出浮點數."""
    return repr(float(value))


def format_detunings(values_mhz: Sequence[float]) -> str:
    """格式化失諧列表（MHz）."""
    return ", ".join(f"{v:g}" for v in values_mhz)
