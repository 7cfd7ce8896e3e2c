"""顯示邏輯函數：報告文字與終端摘要."""

import numpy as np

from .utils import angular_to_mhz, format_detunings, format_float, format_ratio


def format_report(result, labels: str = "", source: str = "") -> str:
    """report.txt 的內容.

    Args:
        result: ReconstructionResult
        labels: 產生端的標籤（例如 OD、Ω_p）
        source: 資料來源目錄

    Returns:
        純文字報告
    """
    grid = result.grid
    n_unidentifiable = int(np.count_nonzero(np.triu(result.unidentifiable)))
    chi2 = "-" if result.chi2_reduced is None else f"{result.chi2_reduced:.6g}"
    detunings = ", ".join(f"{d:.9g}" for d in result.detunings)

    lines = [
        "# 時間模式斷層掃描報告",
        "",
    ]
    if source:
        lines.append(f"資料來源: {source}")
    if labels:
        lines.append(f"標籤: {labels}")
    lines += [
        f"網格: t_start = {grid.t_start:g} ns, dt = {grid.dt:g} ns, N = {grid.n_bins}",
        f"失諧 (rad/ns): {detunings}",
        f"失諧 (Δω/2π, MHz): {format_detunings(angular_to_mhz(result.detunings))}",
        "",
        "## 結果",
        "| 項目 | 數值 |",
        "|------|------|",
        f"| 純度 Tr(ρ²) | {format_ratio(result.purity)} |",
        f"| 純度（原始） | {format_float(result.purity_raw)} |",
        f"| 純度（半正定投影） | {format_float(result.purity_psd)} |",
        f"| 半正定投影 | {'是' if result.psd_applied else '否'} |",
        f"| 參考列 m | {result.m_row} (τ = {grid.centers[result.m_row]:g} ns) |",
        f"| 殘差 RMS | {result.residual:.6g} |",
        f"| 約化 χ² | {chi2} |",
        f"| 原始跡 | {result.raw_trace:.6g} |",
        f"| 有效相位格點 | {int(result.phase_valid.sum())}/{grid.n_bins} |",
        f"| 虛部無法辨識的元素對 | {n_unidentifiable} |",
        "",
        "## 診斷",
    ]
    if result.diagnostics:
        lines += [f"- {d}" for d in result.diagnostics]
    else:
        lines.append("- 無")
    return "\n".join(lines) + "\n"


def format_summary(result) -> str:
    """reconstruct 子命令的終端摘要."""
    text = (
        f"純度: {format_ratio(result.purity)}"
        f"（原始 {result.purity_raw:.6f}，投影 {result.purity_psd:.6f}）\n"
        f"參考列 m = {result.m_row}，殘差 RMS = {result.residual:.3g}"
    )
    if result.diagnostics:
        text += "\n診斷: " + "; ".join(result.diagnostics)
    return text


def format_simulation(run) -> str:
    """simulate 子命令的終端摘要."""
    config = run.manifest["config"]
    mhz = [float(v) for v in config["detunings_mhz"].split(",")]
    return (
        f"TMF: {config['tmf_model']}，{run.tmf.grid.n_bins} 格 × {run.tmf.grid.dt:g} ns\n"
        f"失諧 (MHz): {format_detunings(mhz)}\n"
        f"樣本數: {config['n_samples']}，seed = {run.manifest['seed']}\n"
        f"輸出: {run.out_dir}（{len(run.manifest['files'])} 個檔案）"
    )


def format_roundtrip(report) -> str:
    """roundtrip 子命令的終端摘要."""
    mode = "exact" if report.exact else "sampled"
    lines = [f"模式: {mode}", f"原始跡: {report.raw_trace:.6g}"]
    if report.purity is not None:
        lines += [
            f"純度: {report.purity:.10f}",
            f"保真度: {report.fidelity:.12f}",
            f"最大元素誤差: {report.max_element_error:.3g}",
        ]
    if report.passed:
        lines.append("結果: PASS")
    else:
        lines += [f"未通過: {f}" for f in report.failures]
        lines.append("結果: FAIL")
    return "\n".join(lines)


def format_oracle(summary) -> str:
    """oracle 子命令的終端摘要."""
    return "\n".join([
        f"實例數: {summary.n_trials}（略過病態 {summary.n_rejected}）",
        f"暴力搜尋 vs 正規方程 最大差異: {summary.max_deviation:.3g}（容差 {summary.tolerance:.3g}）",
        f"純量正向模型 vs autocorr_exact 最大差異: {summary.forward_max_error:.3g}"
        f"（容差 {summary.forward_tolerance:.0e}）",
        f"結果: {'PASS' if summary.passed else 'FAIL'}",
    ])


def format_homodyne(profile, path) -> str:
    """analyze 子命令的終端摘要."""
    grid = profile.grid
    peak = int(np.argmax(profile.amplitude_sq))
    support = np.nonzero(profile.re_phi_scaled != 0)[0]
    crossings = np.nonzero(np.diff(np.sign(profile.re_phi_scaled[support])) != 0)[0]
    first = f"{grid.centers[support[crossings[0] + 1]]:g} ns" if crossings.size else "無"
    return (
        f"參考列 m = {profile.m_row}，|φ|² 峰值在 τ = {grid.centers[peak]:g} ns\n"
        f"Re φ 第一次變號: {first}\n"
        f"輸出: {path}"
    )


def format_resolution(table, path) -> str:
    """resolution 子命令的終端摘要."""
    lines = [
        "| δτ (ns) | 格數 | 純度 |",
        "|---------|------|------|",
    ]
    lines += [
        f"| {row.resolution_ns:g} | {row.n_bins} | {format_ratio(row.purity)} |"
        for row in table.itertuples(index=False)
    ]
    lines.append(f"輸出: {path}")
    return "\n".join(lines)
