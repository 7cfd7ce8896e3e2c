"""可直接繪圖的表格（pandas DataFrame）.

熱圖直接使用 ρ 的 CSV 對（rho.re.csv / rho.im.csv）；這裡產生的是一維切面：
對角線 |φ|²、第 m 列 Re/Im ρ_mj、同差切面、重建結果對真值的比較，
以及純度隨偵測器時間解析度的變化。
"""

from typing import Sequence

import numpy as np
import pandas as pd

from .reconstruct import HomodyneProfile, ReconstructionResult
from .state import TimeBinDensityMatrix, coarse_grain, purity
from .tmf import TemporalModeFunction


def profile_table(result: ReconstructionResult) -> pd.DataFrame:
    """profile.csv：tau_ns, amp_sq, amp_sq_clipped, phase_rad, phase_valid."""
    return pd.DataFrame({
        "tau_ns": result.grid.centers,
        "amp_sq": result.amplitude_sq,
        "amp_sq_clipped": result.amplitude_sq_clipped,
        "phase_rad": result.phase,
        "phase_valid": result.phase_valid.astype(int),
    })


def cuts_table(rho: TimeBinDensityMatrix, m_row: int) -> pd.DataFrame:
    """cuts.csv：對角線與第 m 列的切面.

    *_norm 欄位除以 max|ρ|，使最大元素為 1。
    """
    elements = rho.elements
    peak = float(np.max(np.abs(elements)))
    scale = peak if peak > 0 else 1.0
    diagonal = np.real(np.diag(elements))
    row = elements[m_row, :]
    return pd.DataFrame({
        "tau_ns": rho.grid.centers,
        "diag_re": diagonal,
        "row_m_re": row.real,
        "row_m_im": row.imag,
        "diag_norm": diagonal / scale,
        "row_m_re_norm": row.real / scale,
    })


def homodyne_table(profile: HomodyneProfile) -> pd.DataFrame:
    """homodyne_profile.csv：tau_ns, amp_sq, re_phi_scaled."""
    return pd.DataFrame({
        "tau_ns": profile.grid.centers,
        "amp_sq": profile.amplitude_sq,
        "re_phi_scaled": profile.re_phi_scaled,
    })


def comparison_table(result: ReconstructionResult, truth: TemporalModeFunction) -> pd.DataFrame:
    """重建結果與真值 TMF 逐格比較（振幅平方與相對第 m 格的相位）."""
    phi = truth.amplitudes
    reference = phi[result.m_row]
    true_phase = np.angle(phi * np.conj(reference)) if reference != 0 else np.angle(phi)
    return pd.DataFrame({
        "tau_ns": truth.grid.centers,
        "amp_sq_true": np.abs(phi) ** 2,
        "amp_sq": result.amplitude_sq,
        "phase_true_rad": true_phase,
        "phase_rad": result.phase,
        "phase_valid": result.phase_valid.astype(int),
    })



def resolution_table(rho: TimeBinDensityMatrix, factors: Sequence[int]) -> pd.DataFrame:
    """resolution.csv：偵測器時間解析度與粗化後的純度.

    Raises:
        InvalidArgumentError: 任一 factor 無法整除格數
    """
    rows = []
    for factor in factors:
        coarse = coarse_grain(rho, factor)
        rows.append({
            "factor": int(factor),
            "resolution_ns": coarse.grid.dt,
            "n_bins": coarse.n_bins,
            "purity": purity(coarse),
        })
    return pd.DataFrame(rows, columns=["factor", "resolution_ns", "n_bins", "purity"])
