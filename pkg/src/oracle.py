"""獨立的暴力檢查：不共用重建模組的任何解題程式碼.

brute_force_element_fit 以網格搜尋最小化單一元素的代價函數，
direct_forward_check 以純量複數運算計算正向模型。兩者只用於測試與 CLI 的 oracle 子命令。
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .reconstruct import fit_elements
from .simulate import AutocorrelationMatrix, autocorr_exact
from .state import density_from_tmf
from .tmf import TemporalModeFunction, make_time_grid, tabulated_tmf

logger = logging.getLogger(__name__)

MIN_GRID_STEPS = 100
REFINE_FACTOR = 10
REFINE_HALF_WIDTH = 3  # 精細搜尋涵蓋最佳粗格點前後各幾格

# cross_check 只接受正規矩陣條件數不超過此值的隨機實例
ACCEPT_CONDITION = 2.0


@dataclass(frozen=True)
class CrossCheckSummary:
    """oracle 與正規方程解的比對結果."""

    n_trials: int
    n_rejected: int
    max_deviation: float
    tolerance: float
    forward_max_error: float
    forward_tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance and self.forward_max_error <= self.forward_tolerance


def _cost_grid(xs: np.ndarray, ys: np.ndarray, a_values, cos_k, sin_k) -> np.ndarray:
    """在 (x, y) 網格上逐項累加 Σ_k (a_k − x cos_k − y sin_k)²."""
    x = xs[:, None]
    y = ys[None, :]
    total = np.zeros((xs.size, ys.size))
    for a, c, s in zip(a_values, cos_k, sin_k):
        total += (a - x * c - y * s) ** 2
    return total


def _argmin_tie_break(cost: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> tuple:
    """最小值；完全相同時取 |y| 最小，再取 |x| 最小."""
    ix, iy = np.nonzero(cost == cost.min())
    order = np.lexsort((np.abs(xs[ix]), np.abs(ys[iy])))
    best = order[0]
    return int(ix[best]), int(iy[best])


def _axis(center: float, step: float, half_cells: int) -> np.ndarray:
    axis = center + step * np.arange(-half_cells * REFINE_FACTOR, half_cells * REFINE_FACTOR + 1) / REFINE_FACTOR
    axis = axis[(axis >= -1.0 - 1e-12) & (axis <= 1.0 + 1e-12)]
    axis[np.abs(axis) < step / (4 * REFINE_FACTOR)] = 0.0
    return axis


def brute_force_element_fit(
    a_values: Sequence[float],
    detunings: Sequence[float],
    dt_ij: float,
    grid_steps: int = 200,
) -> tuple:
    """在 [−1, 1]² 上窮舉 (x, y)，再以 10 倍解析度在最佳格點附近精細搜尋一次.

    Args:
        a_values: 各失諧下的 A_ij
        detunings: 失諧 Δω_k（rad/ns）
        dt_ij: t_i − t_j（ns）
        grid_steps: 每軸的格數（解析度 2/grid_steps），至少 100

    Returns:
        (re, im)

    Raises:
        InvalidArgumentError: grid_steps < 100 或資料長度不符
    """
    if grid_steps < MIN_GRID_STEPS:
        raise InvalidArgumentError(f"grid_steps 至少為 {MIN_GRID_STEPS}: {grid_steps}")
    a_values = [float(a) for a in a_values]
    detunings = [float(d) for d in detunings]
    if not a_values or len(a_values) != len(detunings):
        raise InvalidArgumentError("a_values 與 detunings 長度必須相同且非空")

    cos_k = [math.cos(w * dt_ij) for w in detunings]
    sin_k = [math.sin(w * dt_ij) for w in detunings]

    step = 2.0 / grid_steps
    coarse = np.linspace(-1.0, 1.0, grid_steps + 1)
    coarse[np.abs(coarse) < step / 4] = 0.0
    ix, iy = _argmin_tie_break(_cost_grid(coarse, coarse, a_values, cos_k, sin_k), coarse, coarse)

    fine_x = _axis(coarse[ix], step, REFINE_HALF_WIDTH)
    fine_y = _axis(coarse[iy], step, REFINE_HALF_WIDTH)
    jx, jy = _argmin_tie_break(_cost_grid(fine_x, fine_y, a_values, cos_k, sin_k), fine_x, fine_y)
    return float(fine_x[jx]), float(fine_y[jy])


def refined_resolution(grid_steps: int) -> float:
    """精細搜尋的格距."""
    return 2.0 / grid_steps / REFINE_FACTOR


def direct_forward_check(tmf: TemporalModeFunction, delta_omega: float, i: int, j: int) -> float:
    """逐純量計算 Re[conj(φ_i) φ_j e^(−iΔω(t_i − t_j))].

    Raises:
        InvalidArgumentError: 索引超出範圍
    """
    n = tmf.grid.n_bins
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidArgumentError(f"索引超出範圍: ({i}, {j})，格數 {n}")
    phi_i = complex(tmf.amplitudes[i])
    phi_j = complex(tmf.amplitudes[j])
    lag = (i - j) * tmf.grid.dt
    return (phi_i.conjugate() * phi_j * cmath.exp(-1j * delta_omega * lag)).real


def _normal_condition(cos_k, sin_k) -> float:
    scc = sum(c * c for c in cos_k)
    sss = sum(s * s for s in sin_k)
    scs = sum(c * s for c, s in zip(cos_k, sin_k))
    half = (scc + sss) / 2
    spread = math.sqrt(((scc - sss) / 2) ** 2 + scs ** 2)
    low = half - spread
    return math.inf if low <= 0 else (half + spread) / low


def _solver_fit(a_values, detunings, dt_ij) -> tuple:
    """透過重建模組的逐元素最小平方法求單一元素（兩格網格的 (1, 0) 元素）."""
    grid = make_time_grid(0.0, dt_ij, 2)
    data = [
        AutocorrelationMatrix(grid, w, [[0.5, a], [a, 0.5]])
        for a, w in zip(a_values, detunings)
    ]
    fit = fit_elements(data, weighting="uniform")
    return float(fit.re[1, 0]), float(fit.im[1, 0])


def cross_check(
    n_trials: int = 1000,
    seed: int = 0,
    grid_steps: int = 200,
    n_detunings: int = 8,
    noise: float = 0.01,
) -> CrossCheckSummary:
    """隨機實例上比對暴力搜尋與正規方程解，並比對純量正向模型與 autocorr_exact.

    Args:
        n_trials: 接受的隨機實例數
        seed: 亂數種子
        grid_steps: 暴力搜尋的粗格數
        n_detunings: 每個實例的失諧數
        noise: 加在 a_k 上的高斯雜訊標準差

    Returns:
        CrossCheckSummary
    """
    rng = np.random.default_rng(seed)
    tolerance = refined_resolution(grid_steps)
    max_deviation = 0.0
    accepted = 0
    rejected = 0
    max_attempts = 100 * n_trials

    while accepted < n_trials:
        if accepted + rejected >= max_attempts:
            raise InvalidArgumentError("無法產生足夠的良態隨機實例")
        detunings = rng.uniform(-0.15, 0.15, n_detunings)
        dt_ij = float(rng.uniform(20.0, 200.0))
        cos_k = [math.cos(w * dt_ij) for w in detunings]
        sin_k = [math.sin(w * dt_ij) for w in detunings]
        if _normal_condition(cos_k, sin_k) > ACCEPT_CONDITION:
            rejected += 1
            continue
        x0, y0 = rng.uniform(-0.8, 0.8, 2)
        a_values = [x0 * c + y0 * s + noise * rng.standard_normal() for c, s in zip(cos_k, sin_k)]

        oracle = brute_force_element_fit(a_values, detunings, dt_ij, grid_steps)
        solver = _solver_fit(a_values, detunings, dt_ij)
        deviation = max(abs(oracle[0] - solver[0]), abs(oracle[1] - solver[1]))
        max_deviation = max(max_deviation, deviation)
        accepted += 1

    forward_max_error = _forward_cross_check(rng)
    logger.info("oracle 比對完成: %d 個實例，%d 個因病態被略過", accepted, rejected)
    return CrossCheckSummary(
        n_trials=accepted,
        n_rejected=rejected,
        max_deviation=max_deviation,
        tolerance=tolerance,
        forward_max_error=forward_max_error,
        forward_tolerance=1e-14,
    )


def _forward_cross_check(rng: np.random.Generator, n_bins: int = 12) -> float:
    grid = make_time_grid(0.0, 10.0, n_bins)
    tmf = tabulated_tmf(grid, rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins))
    rho = density_from_tmf(tmf)
    worst = 0.0
    for delta_omega in rng.uniform(-0.15, 0.15, 4):
        values = autocorr_exact(rho, float(delta_omega)).values
        for i in range(n_bins):
            for j in range(n_bins):
                worst = max(worst, abs(values[i, j] - direct_forward_check(tmf, float(delta_omega), i, j)))
    return worst
