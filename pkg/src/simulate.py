"""正向模型：由 ρ 與 Δω 計算自相關矩陣，並抽取有限樣本的正交分量軌跡.

⟨X_iX_j⟩ = δ_ij/2 + ηA_ij，其中 A_ij = Re ρ_ij cos(Δω(t_i−t_j)) + Im ρ_ij sin(Δω(t_i−t_j))。

抽樣採用與協方差一致的高斯分佈：真實的單光子正交分量分佈並非高斯，
但重建只使用二階矩。觸發抖動、電子雜訊與暗計數都不納入模型。
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigh, eigvalsh

from .config import (
    BLOCK_SIZE,
    COVARIANCE_EIG_TOL,
    EXACT,
    FACTOR_EIG_TOL,
    HERMITIAN_TOL,
    MAX_WORKERS,
    TRACE_TOL,
)
from .errors import InvalidArgumentError, ModelError
from .state import TimeBinDensityMatrix, density_from_tmf
from .tmf import TemporalModeFunction, TimeGrid

logger = logging.getLogger(__name__)

_VACUUM_VARIANCE = 0.5


@dataclass(frozen=True, eq=False)
class AutocorrelationMatrix:
    """約化自相關矩陣 A（已扣除真空項）.

    n_samples 為 None 代表由模型精確計算（無雜訊）。
    """

    grid: TimeGrid
    delta_omega: float
    values: np.ndarray
    stderr: Optional[np.ndarray] = None
    n_samples: Optional[int] = None

    def __post_init__(self):
        n = self.grid.n_bins
        values = np.array(self.values, dtype=float)
        if values.shape != (n, n):
            raise InvalidArgumentError(f"自相關矩陣形狀 {values.shape} 與網格不符")
        if not np.array_equal(values, values.T):
            raise InvalidArgumentError("自相關矩陣必須完全對稱")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "delta_omega", float(self.delta_omega))
        if self.stderr is not None:
            stderr = np.array(self.stderr, dtype=float)
            if stderr.shape != (n, n):
                raise InvalidArgumentError("標準誤差矩陣形狀與網格不符")
            stderr.setflags(write=False)
            object.__setattr__(self, "stderr", stderr)

    @property
    def is_exact(self) -> bool:
        return self.n_samples is None


@dataclass(frozen=True, eq=False)
class QuadratureTraceSet:
    """觸發後的正交分量軌跡（每列一條軌跡，真空變異數為 1/2）."""

    grid: TimeGrid
    delta_omega: float
    traces: np.ndarray
    seed: int
    eta: float
    stream: int = 0

    def __post_init__(self):
        traces = np.array(self.traces, dtype=float)
        if traces.ndim != 2 or traces.shape[1] != self.grid.n_bins:
            raise InvalidArgumentError(f"軌跡形狀 {traces.shape} 與網格格數 {self.grid.n_bins} 不符")
        if not np.all(np.isfinite(traces)):
            raise InvalidArgumentError("軌跡包含 NaN 或 Inf")
        traces.setflags(write=False)
        object.__setattr__(self, "traces", traces)

    @property
    def n_samples(self) -> int:
        return self.traces.shape[0]


StateLike = Union[TimeBinDensityMatrix, TemporalModeFunction]


def _as_density(source: StateLike) -> TimeBinDensityMatrix:
    if isinstance(source, TemporalModeFunction):
        return density_from_tmf(source)
    return source


def _validate_inputs(rho: TimeBinDensityMatrix, eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise InvalidArgumentError(f"η 必須介於 0 與 1: {eta}")
    scale = max(1.0, float(np.max(np.abs(rho.elements))))
    if not rho.is_hermitian(HERMITIAN_TOL * scale):
        raise InvalidArgumentError("ρ 必須是 Hermitian")
    if abs(rho.trace - 1) > TRACE_TOL:
        raise InvalidArgumentError(f"ρ 的跡必須為 1: {rho.trace:.6g}")


def autocorr_exact(rho: TimeBinDensityMatrix, delta_omega: float, eta: float = 1.0) -> AutocorrelationMatrix:
    """精確的約化自相關矩陣.

    A_ij = η(Re ρ_ij cos(Δω(t_i−t_j)) + Im ρ_ij sin(Δω(t_i−t_j)))

    Args:
        rho: Hermitian、跡為 1 的密度矩陣
        delta_omega: 本地振盪器失諧 Δω（rad/ns）
        eta: 預示效率，0 到 1

    Returns:
        標記為 exact 的 AutocorrelationMatrix
    """
    _validate_inputs(rho, eta)
    phase = delta_omega * rho.grid.lag_matrix()
    values = eta * (rho.elements.real * np.cos(phase) + rho.elements.imag * np.sin(phase))
    values = (values + values.T) / 2
    return AutocorrelationMatrix(rho.grid, delta_omega, values)


def covariance(rho: TimeBinDensityMatrix, delta_omega: float, eta: float = 1.0) -> np.ndarray:
    """正交分量的協方差 Σ = I/2 + A.

    Raises:
        ModelError: 最小特徵值 < −1e-8（ρ 不合法）
    """
    a = autocorr_exact(rho, delta_omega, eta).values
    sigma = _VACUUM_VARIANCE * np.eye(rho.n_bins) + a
    min_eig = float(eigvalsh(sigma)[0])
    if min_eig < -COVARIANCE_EIG_TOL:
        raise ModelError(f"協方差矩陣非半正定（最小特徵值 {min_eig:.3g}），請檢查 ρ")
    if min_eig < -FACTOR_EIG_TOL:
        logger.warning("協方差矩陣有微小負特徵值 %.3g", min_eig)
    return sigma


def _symmetric_factor(sigma: np.ndarray) -> np.ndarray:
    """對稱特徵分解 Σ = S S，S = V diag(√λ) Vᵀ."""
    values, vectors = eigh(sigma)
    if values[0] < -FACTOR_EIG_TOL:
        raise ModelError(f"協方差分解失敗：特徵值 {values[0]:.3g} 低於裁切門檻")
    root = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * root) @ vectors.T


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    """計數器式亂數流.

    Philox 的 128 位元金鑰由 (seed, stream) 組成，計數器的第三個字組為區塊編號，
    因此每個區塊（以及區塊內的每條軌跡）只取決於 (seed, stream, 軌跡索引)。
    """
    if not 0 <= seed < 2**64 or not 0 <= stream < 2**64:
        raise InvalidArgumentError("seed 與 stream 必須是 u64")
    key = int(seed) | (int(stream) << 64)
    counter = int(block) << 128
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _block_rows(n_samples: int, block_size: int) -> list:
    return [(start, min(block_size, n_samples - start)) for start in range(0, n_samples, block_size)]


def _draw_block(factor: np.ndarray, seed: int, stream: int, block: int, rows: int) -> np.ndarray:
    generator = block_generator(seed, stream, block)
    return generator.standard_normal((rows, factor.shape[0])) @ factor


def _partial_moments(x: np.ndarray) -> np.ndarray:
    """區塊的 [Σ X_iX_j, Σ X_i²X_j²]."""
    squares = x * x
    return np.stack([x.T @ x, squares.T @ squares])


def pairwise_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    """固定順序的兩兩樹狀加總."""
    parts = list(parts)
    if not parts:
        raise InvalidArgumentError("沒有可加總的區塊")
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def _autocorr_from_moments(
    moments: np.ndarray,
    n_samples: int,
    grid: TimeGrid,
    delta_omega: float,
) -> AutocorrelationMatrix:
    first, second = moments
    mean = first / n_samples
    mean = (mean + mean.T) / 2
    second = (second + second.T) / 2
    variance = np.clip((second - n_samples * mean ** 2) / (n_samples - 1), 0.0, None)
    stderr = np.sqrt(variance / n_samples)
    values = mean - _VACUUM_VARIANCE * np.eye(grid.n_bins)
    return AutocorrelationMatrix(grid, delta_omega, values, stderr, n_samples)


def sample_traces(
    rho: StateLike,
    delta_omega: float,
    eta: float = 1.0,
    n_samples: int = 1000,
    seed: int = 0,
    stream: int = 0,
) -> QuadratureTraceSet:
    """抽取 n_samples 條零均值高斯軌跡，協方差為 covariance(ρ, Δω, η).

    同一組 (輸入, seed, stream, n_samples) 永遠得到逐位元相同的結果，
    與執行緒數量無關。

    Raises:
        InvalidArgumentError: n_samples < 1
        ModelError: 協方差無法分解
    """
    if n_samples < 1:
        raise InvalidArgumentError(f"n_samples 至少為 1: {n_samples}")
    rho = _as_density(rho)
    factor = _symmetric_factor(covariance(rho, delta_omega, eta))
    blocks = _block_rows(n_samples, BLOCK_SIZE)

    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as executor:
        chunks = list(executor.map(
            lambda item: _draw_block(factor, seed, stream, item[0], item[1][1]),
            enumerate(blocks),
        ))

    return QuadratureTraceSet(rho.grid, delta_omega, np.vstack(chunks), seed, eta, stream)


def estimate_autocorr(traces: QuadratureTraceSet) -> AutocorrelationMatrix:
    """由軌跡估計 Â_ij = (1/n)Σ X_iX_j − δ_ij/2 與其標準誤差.

    Raises:
        InvalidArgumentError: 軌跡少於 2 條
    """
    n = traces.n_samples
    if n < 2:
        raise InvalidArgumentError(f"估計自相關至少需要 2 條軌跡: {n}")
    data = traces.traces
    blocks = _block_rows(n, BLOCK_SIZE)

    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as executor:
        parts = list(executor.map(
            lambda item: _partial_moments(data[item[0]:item[0] + item[1]]),
            blocks,
        ))

    return _autocorr_from_moments(pairwise_sum(parts), n, traces.grid, traces.delta_omega)


def _sampled_autocorr(
    factor: np.ndarray,
    grid: TimeGrid,
    delta_omega: float,
    n_samples: int,
    seed: int,
    stream: int,
) -> AutocorrelationMatrix:
    """邊抽樣邊累積，不保留全部軌跡；結果與 sample_traces + estimate_autocorr 相同."""
    blocks = _block_rows(n_samples, BLOCK_SIZE)

    def run_block(item):
        index, (_, rows) = item
        return _partial_moments(_draw_block(factor, seed, stream, index, rows))

    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as executor:
        parts = list(executor.map(run_block, enumerate(blocks)))

    return _autocorr_from_moments(pairwise_sum(parts), n_samples, grid, delta_omega)


def run_experiment(
    source: StateLike,
    detunings: Sequence[float],
    eta: float = 1.0,
    n_samples: Union[int, str] = EXACT,
    seed: int = 0,
) -> list:
    """對每個失諧 Δω_k 產生一個（估計或精確的）自相關矩陣.

    第 k 個失諧使用亂數流 (seed, k)。n_samples = "exact" 時直接回傳 autocorr_exact。

    Args:
        source: 密度矩陣或 TMF
        detunings: 失諧列表（rad/ns）
        eta: 預示效率
        n_samples: 每個失諧的軌跡數，或 "exact"
        seed: 亂數種子（u64）

    Returns:
        AutocorrelationMatrix 列表，順序與 detunings 相同
    """
    detunings = [float(d) for d in detunings]
    if not detunings:
        raise InvalidArgumentError("至少需要一個失諧")
    rho = _as_density(source)

    if n_samples == EXACT:
        return [autocorr_exact(rho, d, eta) for d in detunings]
    if not isinstance(n_samples, (int, np.integer)) or n_samples < 2:
        raise InvalidArgumentError(f"n_samples 必須是 >= 2 的整數或 'exact': {n_samples!r}")

    results = []
    for stream, delta_omega in enumerate(detunings):
        logger.info("抽樣 Δω = %.6g rad/ns（%d 條軌跡）", delta_omega, n_samples)
        factor = _symmetric_factor(covariance(rho, delta_omega, eta))
        results.append(_sampled_autocorr(factor, rho.grid, delta_omega, int(n_samples), seed, stream))
    return results


def simulate_trace_sets(
    source: StateLike,
    detunings: Sequence[float],
    eta: float = 1.0,
    n_samples: int = 1000,
    seed: int = 0,
) -> list:
    """與 run_experiment 相同的亂數流，但保留每個失諧的完整軌跡（用於輸出原始資料）."""
    rho = _as_density(source)
    return [
        sample_traces(rho, float(d), eta, n_samples, seed, stream)
        for stream, d in enumerate(detunings)
    ]


def moment_matched_traces(rho: StateLike, delta_omega: float, eta: float = 1.0) -> QuadratureTraceSet:
    """2N 條確定性軌跡，其經驗二階矩恰好等於 Σ.

    每個特徵向量 v_k 取 ±√(Nλ_k) v_k 兩條軌跡，(1/2N) Σ x xᵀ = Σ_k λ_k v_k v_kᵀ。
    """
    rho = _as_density(rho)
    sigma = covariance(rho, delta_omega, eta)
    values, vectors = eigh(sigma)
    rows = (vectors * np.sqrt(rho.n_bins * np.clip(values, 0.0, None))).T
    return QuadratureTraceSet(rho.grid, delta_omega, np.vstack([rows, -rows]), seed=0, eta=eta)
