"""反問題：由多組 (Â^(k), Δω_k) 重建時間密度矩陣，並取出純度、振幅與相位.

模型對每個元素 (i, j) 是線性的：
    Â^(k)_ij = x cos(Δω_k Δt_ij) + y sin(Δω_k Δt_ij)，(x, y) = (Re ρ_ij, Im ρ_ij)
所以整體代價函數的最小化拆成 N² 個 2×2 正規方程，逐元素直接求解。
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .config import CONDITION_LIMIT, DEFAULT_PHASE_THRESHOLD, DEFAULT_PSD_TOL
from .errors import EmptyPhaseError, GridMismatchError, InvalidArgumentError
from .simulate import AutocorrelationMatrix
from .state import (
    TimeBinDensityMatrix,
    density_from_elements,
    hermitize,
    project_psd,
    purity,
    trace_normalize,
)
from .tmf import TimeGrid
from .utils import wrap_phase

logger = logging.getLogger(__name__)

RowIndex = Union[int, str, None]

WEIGHTING_MODES = ("auto", "stderr", "uniform")


@dataclass(frozen=True, eq=False)
class ElementFit:
    """逐元素最小平方法的原始解（尚未 Hermitian 化與正規化）."""

    grid: TimeGrid
    re: np.ndarray
    im: np.ndarray
    unidentifiable: np.ndarray
    re_unidentifiable: np.ndarray
    cost: float
    residual: float
    chi2_reduced: Optional[float]
    weighted: bool
    n_equations: int
    detunings: tuple


@dataclass(frozen=True, eq=False)
class HomodyneProfile:
    """Δω = 0 自相關矩陣的對角切面與第 m 列切面."""

    grid: TimeGrid
    amplitude_sq: np.ndarray
    re_phi_scaled: np.ndarray
    m_row: int


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """完整重建結果."""

    rho: TimeBinDensityMatrix
    purity: float
    purity_raw: float
    purity_psd: float
    amplitude_sq: np.ndarray
    amplitude_sq_clipped: np.ndarray
    phase: np.ndarray
    phase_valid: np.ndarray
    m_row: int
    residual: float
    chi2_reduced: Optional[float]
    raw_trace: float
    unidentifiable: np.ndarray
    psd_applied: bool
    detunings: tuple
    diagnostics: tuple = field(default=())

    @property
    def grid(self) -> TimeGrid:
        return self.rho.grid


def _stack_data(data: Sequence[AutocorrelationMatrix], grid: Optional[TimeGrid]):
    data = list(data)
    if not data:
        raise InvalidArgumentError("沒有任何自相關矩陣")
    grid = grid or data[0].grid
    for item in data:
        if not grid.same_as(item.grid):
            raise GridMismatchError(f"自相關矩陣的網格不一致: {item.grid} vs {grid}")
    values = np.stack([item.values for item in data])
    detunings = np.array([item.delta_omega for item in data])
    stderr = None
    if all(item.stderr is not None for item in data):
        stderr = np.stack([item.stderr for item in data])
    return grid, values, detunings, stderr


def _weights(stderr: Optional[np.ndarray], shape: tuple, weighting: str) -> tuple:
    if weighting not in WEIGHTING_MODES:
        raise InvalidArgumentError(f"未知的加權方式: {weighting}")
    usable = stderr is not None and bool(np.all(np.isfinite(stderr)) and np.all(stderr > 0))
    if weighting == "stderr" and not usable:
        raise InvalidArgumentError("stderr 加權需要每個矩陣都有正的標準誤差")
    if weighting == "uniform" or not usable:
        if weighting == "auto" and stderr is not None:
            logger.info("標準誤差含零或非有限值，改用均勻加權")
        return np.ones(shape), False
    return 1.0 / stderr ** 2, True


def fit_elements(
    data: Sequence[AutocorrelationMatrix],
    grid: Optional[TimeGrid] = None,
    weighting: str = "auto",
) -> ElementFit:
    """逐元素加權最小平方法.

    2×2 正規矩陣的條件數超過 1e8 時，該元素的虛部無法辨識：設為 0、
    只擬合實部並標記。若該元素所有失諧的 cos 項都消失，改為只擬合虛部，
    實部設為 0 並標記於 re_unidentifiable。對角元素的 sin 項恆為 0，因此實部即為加權平均。

    Args:
        data: 自相關矩陣列表（各自帶有 Δω）
        grid: 預期的網格（None 表示使用第一個矩陣的網格）
        weighting: "auto"（有標準誤差就用 1/σ²）、"stderr" 或 "uniform"

    Returns:
        ElementFit

    Raises:
        InvalidArgumentError: 沒有資料
        GridMismatchError: 網格不一致
    """
    grid, values, detunings, stderr = _stack_data(data, grid)
    w, weighted = _weights(stderr, values.shape, weighting)

    phase = detunings[:, None, None] * grid.lag_matrix()[None, :, :]
    c = np.cos(phase)
    s = np.sin(phase)

    scc = np.sum(w * c * c, axis=0)
    scs = np.sum(w * c * s, axis=0)
    sss = np.sum(w * s * s, axis=0)
    bc = np.sum(w * values * c, axis=0)
    bs = np.sum(w * values * s, axis=0)

    det = scc * sss - scs ** 2
    lam_max = (scc + sss) / 2 + np.sqrt(((scc - sss) / 2) ** 2 + scs ** 2)
    floor = (scc + sss) / CONDITION_LIMIT
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.where(det > 0, lam_max ** 2 / det, np.inf)
        singular = ~(condition <= CONDITION_LIMIT)
        x_full = (sss * bc - scs * bs) / det
        y_full = (scc * bs - scs * bc) / det
        x_only = np.where(scc > 0, bc / scc, 0.0)
        y_only = np.where(sss > 0, bs / sss, 0.0)

    # 奇異時優先只擬合實部；cos 項全部消失時改為只擬合虛部
    re_axis = singular & (scc > floor)
    im_axis = singular & ~re_axis & (sss > floor)
    x = np.where(singular, np.where(re_axis, x_only, 0.0), x_full)
    y = np.where(singular, np.where(im_axis, y_only, 0.0), y_full)

    off_diagonal = ~np.eye(grid.n_bins, dtype=bool)
    unidentifiable = singular & ~im_axis & off_diagonal
    re_unidentifiable = singular & ~re_axis

    residuals = values - x[None] * c - y[None] * s
    cost = float(np.sum(residuals ** 2))
    n_equations = residuals.size
    residual = float(np.sqrt(cost / n_equations))

    chi2_reduced = None
    if weighted:
        n_params = int(np.count_nonzero(~singular)) * 2 + int(np.count_nonzero(re_axis | im_axis))
        dof = n_equations - n_params
        if dof > 0:
            chi2_reduced = float(np.sum(w * residuals ** 2) / dof)

    return ElementFit(
        grid=grid,
        re=x,
        im=y,
        unidentifiable=unidentifiable,
        re_unidentifiable=re_unidentifiable,
        cost=cost,
        residual=residual,
        chi2_reduced=chi2_reduced,
        weighted=weighted,
        n_equations=n_equations,
        detunings=tuple(float(d) for d in detunings),
    )


def _raw_density(fit: ElementFit) -> TimeBinDensityMatrix:
    """擬合結果 → Hermitian（未正規化）的密度矩陣."""
    messages = []
    n_im = int(np.count_nonzero(np.triu(fit.unidentifiable)))
    if n_im:
        logger.warning("%d 個非對角元素的虛部無法由這些失諧辨識，已設為 0", n_im)
        messages.append(f"unidentifiable-im: {n_im} element pairs")
    n_re = int(np.count_nonzero(np.triu(fit.re_unidentifiable)))
    if n_re:
        logger.warning("%d 個元素的實部無法辨識，已設為 0", n_re)
        messages.append(f"unidentifiable-re: {n_re} element pairs")
    rho = density_from_elements(fit.grid, fit.re + 1j * fit.im, messages)
    return hermitize(rho)


def reconstruct_density(
    data: Sequence[AutocorrelationMatrix],
    grid: Optional[TimeGrid] = None,
    weighting: str = "auto",
) -> TimeBinDensityMatrix:
    """由多組自相關矩陣重建 ρ（Hermitian 化並使 Tr ρ = 1）.

    Raises:
        InvalidArgumentError: 沒有資料
        GridMismatchError: 網格不一致
        DegenerateInputError: 重建出的跡非正
    """
    return trace_normalize(_raw_density(fit_elements(data, grid, weighting)))


def extract_amplitude(rho: TimeBinDensityMatrix) -> tuple:
    """|φ(τ_i)|² = Re ρ_ii.

    Returns:
        (原始對角值, max(對角值, 0))
    """
    diagonal = np.real(np.diag(rho.elements)).copy()
    return diagonal, np.clip(diagonal, 0.0, None)


def resolve_row(diagonal: np.ndarray, m: RowIndex) -> int:
    """m 為 "auto" 或 None 時取對角值最大的格點."""
    if m is None or m == "auto":
        return int(np.argmax(diagonal))
    m = int(m)
    if not 0 <= m < diagonal.size:
        raise InvalidArgumentError(f"m 超出範圍: {m}")
    return m


def extract_phase(
    rho: TimeBinDensityMatrix,
    m: RowIndex = "auto",
    phase_threshold: float = DEFAULT_PHASE_THRESHOLD,
) -> tuple:
    """相位 θ_j = arg ρ_mj − arg ρ_mm，收斂到 (−π, π].

    |ρ_mj| <= phase_threshold·max|ρ| 的格點被遮蔽（相位為 NaN）。

    Returns:
        (相位陣列, 有效遮罩)

    Raises:
        EmptyPhaseError: 所有元素都低於門檻
    """
    elements = rho.elements
    m = resolve_row(np.real(np.diag(elements)), m)
    row = elements[m, :]
    reference = elements[m, m]
    theta = wrap_phase(np.arctan2(row.imag, row.real) - np.arctan2(reference.imag, reference.real))
    valid = np.abs(row) > phase_threshold * np.max(np.abs(elements))
    if not np.any(valid):
        raise EmptyPhaseError(f"第 {m} 列沒有任何元素超過相位門檻 {phase_threshold}")
    return np.where(valid, theta, np.nan), valid


def homodyne_profile(
    a: AutocorrelationMatrix,
    m: RowIndex = "auto",
    normalize_peak: bool = False,
) -> HomodyneProfile:
    """只用同差（Δω = 0）資料的切面：A_jj = |φ_j|²，A_mj = φ*(τ_m) Re φ(τ_j).

    Args:
        a: Δω = 0 的自相關矩陣
        m: 列索引或 "auto"（取 A_jj 最大者）
        normalize_peak: 以 max|A| 正規化，使最大元素為 1

    Raises:
        InvalidArgumentError: Δω 不為 0
    """
    if a.delta_omega != 0:
        raise InvalidArgumentError(f"homodyne_profile 需要 Δω = 0，收到 {a.delta_omega:g}")
    diagonal = np.diag(a.values).copy()
    m = resolve_row(diagonal, m)
    row = a.values[m, :].copy()
    if normalize_peak:
        peak = float(np.max(np.abs(a.values)))
        if peak > 0:
            diagonal = diagonal / peak
            row = row / peak
    return HomodyneProfile(a.grid, diagonal, row, m)


def purity_report(rho: TimeBinDensityMatrix) -> float:
    """Tr(ρ²)."""
    return purity(rho)


def reconstruct(
    data: Sequence[AutocorrelationMatrix],
    grid: Optional[TimeGrid] = None,
    psd: bool = False,
    psd_tol: float = DEFAULT_PSD_TOL,
    phase_threshold: float = DEFAULT_PHASE_THRESHOLD,
    m: RowIndex = "auto",
    weighting: str = "auto",
) -> ReconstructionResult:
    """完整重建流程：擬合 → Hermitian 化 → 正規化 →（選用）半正定投影 → 振幅與相位.

    原始與投影後的純度都會回報。

    Raises:
        DegenerateInputError: 重建出的跡非正（例如純真空資料）
    """
    fit = fit_elements(data, grid, weighting)
    raw = _raw_density(fit)
    raw_trace = float(raw.trace.real)
    rho_raw = trace_normalize(raw)
    projected = project_psd(rho_raw, psd_tol)
    rho = projected if psd else rho_raw

    amplitude_sq, clipped = extract_amplitude(rho)
    m_row = resolve_row(amplitude_sq, m)
    diagnostics = list(rho.diagnostics)
    if not psd:
        diagnostics.extend(d for d in projected.diagnostics if d.startswith("heavily-clipped"))
    try:
        phase, valid = extract_phase(rho, m_row, phase_threshold)
    except EmptyPhaseError as e:
        logger.warning("%s", e)
        phase = np.full(rho.n_bins, np.nan)
        valid = np.zeros(rho.n_bins, dtype=bool)
        diagnostics.append("empty-phase")

    return ReconstructionResult(
        rho=rho,
        purity=purity_report(rho),
        purity_raw=purity(rho_raw),
        purity_psd=purity(projected),
        amplitude_sq=amplitude_sq,
        amplitude_sq_clipped=clipped,
        phase=phase,
        phase_valid=valid,
        m_row=m_row,
        residual=fit.residual,
        chi2_reduced=fit.chi2_reduced,
        raw_trace=raw_trace,
        unidentifiable=fit.unidentifiable,
        psd_applied=psd,
        detunings=fit.detunings,
        diagnostics=tuple(dict.fromkeys(diagnostics)),
    )
