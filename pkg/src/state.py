"""時間格基底下的密度矩陣運算.

索引慣例：ρ_ij = φ*(τ_i) φ(τ_j)。
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eigh, eigvalsh

from .config import (
    DEFAULT_PSD_TOL,
    FIDELITY_IMAG_TOL,
    HERMITIAN_TOL,
    NORMALIZATION_TOL,
    SMALL_TRACE,
    TRACE_TOL,
)
from .errors import DegenerateInputError, GridMismatchError, InvalidArgumentError
from .tmf import TemporalModeFunction, TimeGrid, make_time_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TimeBinDensityMatrix:
    """時間格密度矩陣 ρ_TM.

    diagnostics 記錄處理過程中的警告（小跡、大量裁切、無法辨識的元素）。
    """

    grid: TimeGrid
    elements: np.ndarray
    diagnostics: tuple = ()

    def __post_init__(self):
        elements = np.array(self.elements, dtype=complex)
        n = self.grid.n_bins
        if elements.shape != (n, n):
            raise InvalidArgumentError(f"矩陣形狀 {elements.shape} 與網格 {n}×{n} 不符")
        if not np.all(np.isfinite(elements)):
            raise InvalidArgumentError("矩陣包含 NaN 或 Inf")
        elements.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))

    @property
    def n_bins(self) -> int:
        return self.grid.n_bins

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.elements - self.elements.conj().T)) <= tol)

    def with_diagnostics(self, *messages: str) -> "TimeBinDensityMatrix":
        """回傳附加診斷訊息的新物件."""
        return TimeBinDensityMatrix(self.grid, self.elements, self.diagnostics + tuple(messages))


def density_from_elements(grid: TimeGrid, elements, diagnostics: Sequence[str] = ()) -> TimeBinDensityMatrix:
    """由任意複數矩陣建立密度矩陣物件（不做任何正規化）."""
    return TimeBinDensityMatrix(grid, elements, tuple(diagnostics))


def density_from_tmf(tmf: TemporalModeFunction) -> TimeBinDensityMatrix:
    """由純態 TMF 建立 ρ_ij = conj(φ_i) φ_j.

    Raises:
        InvalidArgumentError: TMF 未正規化
    """
    if not tmf.is_normalized(NORMALIZATION_TOL):
        raise InvalidArgumentError(f"TMF 未正規化: Σ|φ|² = {tmf.norm_sq:.15g}")
    phi = tmf.amplitudes
    return TimeBinDensityMatrix(tmf.grid, np.outer(phi.conj(), phi))


def maximally_mixed(grid: TimeGrid) -> TimeBinDensityMatrix:
    """最大混態 I/N."""
    return TimeBinDensityMatrix(grid, np.eye(grid.n_bins) / grid.n_bins)


def mixture(states: Sequence[TimeBinDensityMatrix], weights: Sequence[float]) -> TimeBinDensityMatrix:
    """密度矩陣的凸組合 Σ w_k ρ_k（權重需非負且總和為 1）."""
    if not states or len(states) != len(weights):
        raise InvalidArgumentError("states 與 weights 長度必須相同且非空")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1) > TRACE_TOL:
        raise InvalidArgumentError("權重需非負且總和為 1")
    grid = states[0].grid
    for state in states[1:]:
        _check_grid(grid, state.grid)
    elements = sum(w * s.elements for w, s in zip(weights, states))
    return TimeBinDensityMatrix(grid, elements)


def coarse_grain(rho: TimeBinDensityMatrix, factor: int) -> TimeBinDensityMatrix:
    """以較粗的偵測器時間解析度 factor·δτ 觀察同一個狀態.

    每 factor 個相鄰細格合成一個粗格；偵測器分辨不出光子落在粗格內的哪個
    細格，所以格內位置被追蹤掉：ρ'_IJ = Σ_a ρ_(I·f+a),(J·f+a)。
    粗格中心取所含細格中心的平均。

    Args:
        rho: 細網格上的密度矩陣
        factor: 每個粗格包含的細格數

    Returns:
        粗網格上的密度矩陣（跡不變）

    Raises:
        InvalidArgumentError: factor 不是正整數、不整除格數，或粗格少於 2 格
    """
    n = rho.n_bins
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError(f"factor 必須是正整數: {factor}")
    factor = int(factor)
    if n % factor or n // factor < 2:
        raise InvalidArgumentError(f"factor {factor} 無法把 {n} 格分成至少 2 個粗格")
    n_coarse = n // factor
    grid = rho.grid
    coarse = make_time_grid(grid.t_start + (factor - 1) * grid.dt / 2, grid.dt * factor, n_coarse)
    blocks = rho.elements.reshape(n_coarse, factor, n_coarse, factor)
    return TimeBinDensityMatrix(coarse, np.einsum("iaja->ij", blocks), rho.diagnostics)


def _check_grid(expected: TimeGrid, actual: TimeGrid) -> None:
    if not expected.same_as(actual):
        raise GridMismatchError(f"網格不一致: {expected} vs {actual}")


def _check_unit_trace(rho: TimeBinDensityMatrix) -> None:
    trace = rho.trace
    if abs(trace - 1) > TRACE_TOL:
        raise InvalidArgumentError(f"密度矩陣的跡偏離 1: Tr ρ = {trace:.6g}")


def purity(rho: TimeBinDensityMatrix) -> float:
    """時間純度 Tr(ρ²) = Σ_ij |ρ_ij|²（對 Hermitian ρ 成立）.

    Raises:
        InvalidArgumentError: 跡偏離 1 超過 1e-6
    """
    _check_unit_trace(rho)
    return float(np.sum(np.abs(rho.elements) ** 2))


def hermitize(rho: TimeBinDensityMatrix) -> TimeBinDensityMatrix:
    """(ρ + ρ†)/2."""
    elements = (rho.elements + rho.elements.conj().T) / 2
    return TimeBinDensityMatrix(rho.grid, elements, rho.diagnostics)


def trace_normalize(rho: TimeBinDensityMatrix) -> TimeBinDensityMatrix:
    """ρ / Tr ρ.

    Raises:
        DegenerateInputError: 跡非正
    """
    trace = rho.trace.real
    if not trace > 0:
        raise DegenerateInputError(f"密度矩陣的跡非正: Tr ρ = {trace:.6g}")
    messages = ()
    if trace < SMALL_TRACE:
        logger.warning("密度矩陣的跡很小 (%.3g)，正規化後雜訊會被放大", trace)
        messages = (f"small-trace: Tr = {trace:.3g}",)
    return TimeBinDensityMatrix(rho.grid, rho.elements / trace, rho.diagnostics + messages)


def eigenvalues(rho: TimeBinDensityMatrix) -> np.ndarray:
    """Hermitian 部分的特徵值（由小到大）."""
    return eigvalsh((rho.elements + rho.elements.conj().T) / 2)


def project_psd(rho: TimeBinDensityMatrix, tol: float = DEFAULT_PSD_TOL) -> TimeBinDensityMatrix:
    """投影到半正定錐：裁掉負特徵值後重新組合並正規化跡.

    沒有任何正特徵值時無法正規化，回傳零矩陣並標記 degenerate-projection。

    Args:
        rho: Hermitian 密度矩陣
        tol: 最負特徵值低於 −tol 時在 diagnostics 標記 heavily-clipped

    Raises:
        InvalidArgumentError: 輸入不是 Hermitian
    """
    if not rho.is_hermitian(HERMITIAN_TOL * max(1.0, float(np.max(np.abs(rho.elements))))):
        raise InvalidArgumentError("project_psd 需要 Hermitian 輸入")
    values, vectors = eigh(rho.elements)
    messages = ()
    if values[0] < -tol:
        logger.warning("半正定投影裁掉了大量負特徵值（最小 %.3g）", values[0])
        messages = (f"heavily-clipped: min eigenvalue = {values[0]:.3g}",)
    clipped = np.clip(values, 0.0, None)
    if not np.any(clipped > 0):
        logger.warning("半正定投影後沒有正特徵值，回傳零矩陣")
        messages += ("degenerate-projection: no positive eigenvalue",)
        return TimeBinDensityMatrix(rho.grid, np.zeros_like(rho.elements), rho.diagnostics + messages)
    elements = (vectors * clipped) @ vectors.conj().T
    projected = hermitize(TimeBinDensityMatrix(rho.grid, elements, rho.diagnostics + messages))
    return trace_normalize(projected)


def fidelity(rho: TimeBinDensityMatrix, tmf: TemporalModeFunction) -> float:
    """保真度 ⟨φ|ρ|φ⟩.

    依照 ρ_ij = conj(φ_i) φ_j 的索引慣例，⟨φ|ρ|φ⟩ = Σ_ij φ_i ρ_ij conj(φ_j)。

    Raises:
        GridMismatchError: 網格不一致
        InvalidArgumentError: TMF 未正規化
    """
    _check_grid(rho.grid, tmf.grid)
    if not tmf.is_normalized(NORMALIZATION_TOL):
        raise InvalidArgumentError("fidelity 需要正規化的 TMF")
    phi = tmf.amplitudes
    value = phi @ rho.elements @ phi.conj()
    if abs(value.imag) >= FIDELITY_IMAG_TOL:
        raise InvalidArgumentError(f"保真度的虛部過大 ({value.imag:.3g})，ρ 可能不是 Hermitian")
    return float(value.real)
