"""時間模式函數（TMF）的建構、正規化與求值.

單位：時間 ns、角頻率 rad/ns、速率 1/ns。所有 TMF 都在光子中心頻率的
旋轉座標系中表示，載波 e^(−iω₂₀τ) 不出現在陣列中。
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import eval_hermite

from .config import NORMALIZATION_TOL
from .errors import AliasingError, DegenerateInputError, InvalidArgumentError, RegimeError


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TimeGrid:
    """均勻的時間格點（第 i 格中心為 t_start + i·dt）."""

    t_start: float
    dt: float
    n_bins: int

    def __post_init__(self):
        if not np.isfinite(self.t_start) or not np.isfinite(self.dt):
            raise InvalidArgumentError("t_start 與 dt 必須是有限值")
        if self.dt <= 0:
            raise InvalidArgumentError(f"dt 必須為正: {self.dt}")
        if int(self.n_bins) != self.n_bins or self.n_bins < 2:
            raise InvalidArgumentError(f"n_bins 至少為 2: {self.n_bins}")
        object.__setattr__(self, "n_bins", int(self.n_bins))

    @property
    def centers(self) -> np.ndarray:
        """每一格的中心時間（ns）."""
        return self.t_start + self.dt * np.arange(self.n_bins)

    @property
    def t_end(self) -> float:
        """最後一格的中心時間."""
        return self.t_start + self.dt * (self.n_bins - 1)

    def lag_matrix(self) -> np.ndarray:
        """Δt_ij = t_i − t_j."""
        idx = np.arange(self.n_bins)
        return (idx[:, None] - idx[None, :]) * self.dt

    def same_as(self, other: "TimeGrid", rtol: float = 1e-9) -> bool:
        """判斷兩個網格是否相同（容許浮點誤差）."""
        if self.n_bins != other.n_bins:
            return False
        scale = max(abs(self.dt), abs(self.t_start), abs(other.t_start), 1.0)
        return (
            abs(self.dt - other.dt) <= rtol * abs(self.dt)
            and abs(self.t_start - other.t_start) <= rtol * scale
        )

    @classmethod
    def from_centers(cls, centers: Sequence[float]) -> "TimeGrid":
        """由格點中心還原網格（例如從 CSV 讀入時）."""
        centers = np.asarray(centers, dtype=float)
        if centers.size < 2:
            raise InvalidArgumentError("至少需要兩個格點中心")
        steps = np.diff(centers)
        dt = float(steps.mean())
        if not np.allclose(steps, dt, rtol=1e-6, atol=1e-9):
            raise InvalidArgumentError("格點中心不是等間距")
        return cls(float(centers[0]), dt, centers.size)


def make_time_grid(t_start: float, dt: float, n_bins: int) -> TimeGrid:
    """建立時間網格.

    Args:
        t_start: 第 0 格中心（ns）
        dt: 格寬 δτ（ns），必須為正
        n_bins: 格數，至少 2

    Returns:
        TimeGrid

    Raises:
        InvalidArgumentError: dt <= 0 或 n_bins < 2
    """
    return TimeGrid(float(t_start), float(dt), n_bins)


@dataclass(frozen=True, eq=False)
class TemporalModeFunction:
    """離散化的時間模式函數 φ(τ_i)."""

    grid: TimeGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen_array(self.amplitudes, complex)
        if amps.shape != (self.grid.n_bins,):
            raise InvalidArgumentError(
                f"振幅長度 {amps.shape} 與網格格數 {self.grid.n_bins} 不符"
            )
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("振幅包含 NaN 或 Inf")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_sq(self) -> float:
        """Σ|φ_i|²."""
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def intensity(self) -> np.ndarray:
        """|φ_i|²."""
        return np.abs(self.amplitudes) ** 2

    @property
    def phase(self) -> np.ndarray:
        """θ_i = arg φ_i."""
        return np.angle(self.amplitudes)

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return abs(self.norm_sq - 1.0) < tol


@dataclass(frozen=True, eq=False)
class JointSpectrum:
    """雙光子聯合頻譜 Φ(Ω)，Ω 為等間距遞增的角頻率（rad/ns）."""

    detunings: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        omega = _frozen_array(self.detunings, float)
        values = _frozen_array(self.values, complex)
        if omega.ndim != 1 or omega.size < 2:
            raise InvalidArgumentError("聯合頻譜至少需要兩個取樣點")
        if values.shape != omega.shape:
            raise InvalidArgumentError("頻率與頻譜值長度不符")
        steps = np.diff(omega)
        if np.any(steps <= 0):
            raise InvalidArgumentError("頻率必須嚴格遞增")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
            raise InvalidArgumentError("頻率必須等間距")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("頻譜值包含 NaN 或 Inf")
        object.__setattr__(self, "detunings", omega)
        object.__setattr__(self, "values", values)

    @property
    def step(self) -> float:
        """ΔΩ."""
        return float((self.detunings[-1] - self.detunings[0]) / (self.detunings.size - 1))


def _fix_gauge(amplitudes: np.ndarray) -> np.ndarray:
    """旋轉整體相位，使 |φ| 最大的格點振幅為非負實數."""
    peak = amplitudes[np.argmax(np.abs(amplitudes))]
    if peak == 0:
        return amplitudes
    return amplitudes * (np.conj(peak) / abs(peak))


def _normalized_amplitudes(amplitudes: np.ndarray) -> np.ndarray:
    norm_sq = float(np.sum(np.abs(amplitudes) ** 2))
    if not norm_sq > 0:
        raise DegenerateInputError("振幅全為零，無法正規化")
    return amplitudes / np.sqrt(norm_sq)


def normalize(tmf: TemporalModeFunction) -> TemporalModeFunction:
    """正規化使 Σ|φ_i|² = 1，相位不變.

    Raises:
        DegenerateInputError: 零向量
    """
    return TemporalModeFunction(tmf.grid, _normalized_amplitudes(tmf.amplitudes))


def _construct(grid: TimeGrid, amplitudes: np.ndarray) -> TemporalModeFunction:
    """建構子共用：正規化並固定整體相位."""
    return TemporalModeFunction(grid, _fix_gauge(_normalized_amplitudes(amplitudes)))


def rabi_tmf(omega_c: float, gamma13: float, gamma12: float, grid: TimeGrid) -> TemporalModeFunction:
    """Rabi 振盪區的封閉形式 φ(τ) ∝ e^(−γₑτ) sin(Ωₑτ/2).

    γₑ = (γ₁₃ + γ₁₂)/2，Ωₑ = √(Ω_c² − (γ₁₃ − γ₁₂)²)；τ < 0 的格點為零。

    Args:
        omega_c: 耦合光 Rabi 頻率 Ω_c（rad/ns）
        gamma13: 去相干率 γ₁₃（1/ns）
        gamma12: 去相干率 γ₁₂（1/ns）
        grid: 時間網格

    Returns:
        正規化的 TMF

    Raises:
        InvalidArgumentError: 速率為負
        RegimeError: 過阻尼（Ω_c² <= (γ₁₃ − γ₁₂)²）
        DegenerateInputError: 網格沒有落在 τ >= 0 的支撐上
    """
    if omega_c < 0 or gamma13 < 0 or gamma12 < 0:
        raise InvalidArgumentError("Ω_c 與去相干率不可為負")
    detuned = (gamma13 - gamma12) ** 2
    if omega_c ** 2 <= detuned:
        raise RegimeError(
            f"Ω_c = {omega_c:g} rad/ns 不足以進入欠阻尼區（|γ₁₃ − γ₁₂| = {np.sqrt(detuned):g}）"
        )
    gamma_e = (gamma13 + gamma12) / 2
    omega_e = np.sqrt(omega_c ** 2 - detuned)

    tau = grid.centers
    causal = tau >= 0
    amps = np.zeros(grid.n_bins, dtype=complex)
    amps[causal] = np.exp(-gamma_e * tau[causal]) * np.sin(omega_e * tau[causal] / 2)
    if not np.any(amps != 0):
        raise DegenerateInputError("Rabi TMF 在此網格上取樣全為零")
    return _construct(grid, amps)


def rabi_zero_crossing(omega_c: float, gamma13: float, gamma12: float) -> float:
    """Rabi TMF 第一個零點的時間 2π/Ωₑ（ns）."""
    omega_e = np.sqrt(omega_c ** 2 - (gamma13 - gamma12) ** 2)
    return 2 * np.pi / omega_e


def exponential_tmf(gamma: float, grid: TimeGrid, rise: float = 0.0) -> TemporalModeFunction:
    """指數衰減波形 φ ∝ (1 − e^(−τ/rise)) e^(−γτ)，rise = 0 時為階梯起始.

    實數且非負，相位在整個支撐上為常數。
    """
    if gamma < 0 or rise < 0:
        raise InvalidArgumentError("gamma 與 rise 不可為負")
    tau = grid.centers
    causal = tau >= 0
    amps = np.zeros(grid.n_bins, dtype=complex)
    envelope = np.exp(-gamma * tau[causal])
    if rise > 0:
        envelope = envelope * (1 - np.exp(-tau[causal] / rise))
    amps[causal] = envelope
    if not np.any(amps != 0):
        raise DegenerateInputError("指數 TMF 在此網格上取樣全為零")
    return _construct(grid, amps)


def hermite_gauss_tmf(order: int, center: float, width: float, grid: TimeGrid) -> TemporalModeFunction:
    """Hermite-Gauss 時間模式 H_n((τ−c)/w) e^(−(τ−c)²/(2w²)).

    Args:
        order: 階數 n >= 0
        center: 中心時間 c（ns）
        width: 寬度 w（ns），必須為正
        grid: 時間網格
    """
    if order < 0 or int(order) != order:
        raise InvalidArgumentError(f"階數必須是非負整數: {order}")
    if width <= 0:
        raise InvalidArgumentError(f"寬度必須為正: {width}")
    x = (grid.centers - center) / width
    amps = eval_hermite(int(order), x) * np.exp(-(x ** 2) / 2)
    return _construct(grid, amps.astype(complex))


def time_bin_superposition(grid: TimeGrid, j: int, k: int, relative_phase: float = 0.0) -> TemporalModeFunction:
    """時間格疊加態 (|1_j⟩ + e^(iα)|1_k⟩)/√2.

    α = 0、π、±π/2 分別對應 |1_j,0_k⟩ ± |0_j,1_k⟩ 與 |1_j,0_k⟩ ± i|0_j,1_k⟩。
    """
    if j == k:
        raise InvalidArgumentError("j 與 k 必須不同")
    for index in (j, k):
        if not 0 <= index < grid.n_bins:
            raise InvalidArgumentError(f"格點索引超出範圍: {index}")
    amps = np.zeros(grid.n_bins, dtype=complex)
    amps[j] = 1.0
    amps[k] = np.exp(1j * relative_phase)
    return _construct(grid, amps)


def tabulated_tmf(grid: TimeGrid, samples: Sequence[complex]) -> TemporalModeFunction:
    """由表列取樣建立 TMF（例如 EIT 群延遲區的外部波形）.

    Raises:
        InvalidArgumentError: 長度與網格不符或含非有限值
        DegenerateInputError: 全為零
    """
    values = np.asarray(samples, dtype=complex)
    if values.shape != (grid.n_bins,):
        raise InvalidArgumentError(f"取樣長度 {values.size} 與網格格數 {grid.n_bins} 不符")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("取樣包含 NaN 或 Inf")
    return _construct(grid, values)


def tmf_from_joint_spectrum(spectrum: JointSpectrum, grid: TimeGrid) -> TemporalModeFunction:
    """以傅立葉轉換由聯合頻譜求 TMF.

    φ(τ_i) = (1/√2π) Σ_k Φ(Ω_k) e^(−iΩ_kτ_i) ΔΩ，之後正規化。

    Raises:
        AliasingError: dt > π / max|Ω|
        DegenerateInputError: 轉換結果為零
    """
    omega = spectrum.detunings
    omega_max = float(np.max(np.abs(omega)))
    if omega_max > 0 and grid.dt > np.pi / omega_max * (1 + 1e-12):
        raise AliasingError(
            f"dt = {grid.dt:g} ns 超過 π/max|Ω| = {np.pi / omega_max:g} ns，頻譜會混疊"
        )
    kernel = np.exp(-1j * np.outer(grid.centers, omega))
    amps = kernel @ spectrum.values * spectrum.step / np.sqrt(2 * np.pi)
    return _construct(grid, amps)


def joint_spectrum_from_tmf(tmf: TemporalModeFunction, detunings: Sequence[float]) -> JointSpectrum:
    """反轉換 Φ(Ω_k) = (1/√2π) Σ_i φ_i e^(iΩ_kτ_i) δτ."""
    omega = np.asarray(detunings, dtype=float)
    kernel = np.exp(1j * np.outer(omega, tmf.grid.centers))
    values = kernel @ tmf.amplitudes * tmf.grid.dt / np.sqrt(2 * np.pi)
    return JointSpectrum(omega, values)
