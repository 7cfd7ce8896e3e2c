"""把設定串成完整流程：建立 TMF → 模擬 → 寫檔 → 重建 → 與真值比較.

CLI 只負責參數與輸出訊息，實際工作都在這裡。
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import (
    DEFAULT_PSD_TOL,
    ROUNDTRIP_MAX_ELEMENT_ERROR,
    ROUNDTRIP_MIN_FIDELITY,
    ROUNDTRIP_MIN_PURITY,
    ROUNDTRIP_MIN_RAW_TRACE,
    RunConfig,
)
from .display import format_report
from .errors import ConfigError, DegenerateInputError, InvalidArgumentError
from .figures import comparison_table, cuts_table, homodyne_table, profile_table, resolution_table
from .reconstruct import ReconstructionResult, homodyne_profile, reconstruct
from .simulate import estimate_autocorr, run_experiment, simulate_trace_sets
from .state import density_from_tmf, fidelity
from .storage import (
    GROUND_TRUTH_NAME,
    Dataset,
    autocorr_name,
    build_manifest,
    ensure_dir,
    load_dataset,
    read_spectrum_csv,
    read_tmf_csv,
    stderr_name,
    traces_name,
    write_autocorr,
    write_density,
    write_manifest,
    write_table,
    write_text,
    write_tmf_csv,
    write_traces_binary,
    write_traces_csv,
)
from .tmf import (
    TemporalModeFunction,
    TimeGrid,
    exponential_tmf,
    hermite_gauss_tmf,
    make_time_grid,
    rabi_tmf,
    tabulated_tmf,
    time_bin_superposition,
    tmf_from_joint_spectrum,
)
from .utils import mhz_to_angular

logger = logging.getLogger(__name__)

DEGENERATE_TRACE = "degenerate trace"
RESOLUTION_NAME = "resolution.csv"


@dataclass(frozen=True)
class SimulationRun:
    """一次模擬的結果與寫出的檔案."""

    out_dir: Path
    tmf: TemporalModeFunction
    data: list
    manifest: dict


@dataclass(frozen=True)
class RoundtripReport:
    """往返比較的指標與未通過的門檻."""

    exact: bool
    raw_trace: float
    purity: Optional[float] = None
    purity_raw: Optional[float] = None
    fidelity: Optional[float] = None
    max_element_error: Optional[float] = None
    failures: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return not self.failures


def build_grid(config: RunConfig) -> TimeGrid:
    return make_time_grid(config.t_start_ns, config.dt_ns, config.n_bins)


def detunings_rad(config: RunConfig) -> np.ndarray:
    """設定中的失諧（MHz）→ rad/ns."""
    return mhz_to_angular(config.detunings_mhz, config.angular_convention)


def build_tmf(config: RunConfig) -> TemporalModeFunction:
    """依 tmf_model 建立真值 TMF.

    tabulated 模型的網格由檔案決定；其餘模型使用設定中的網格。

    Raises:
        ConfigError: 沒有指定 tmf_model
    """
    model = config.tmf_model
    if model is None:
        raise ConfigError("缺少 tmf_model")
    grid = build_grid(config)

    if model == "rabi":
        omega_c = float(mhz_to_angular([config.omega_c_mhz], config.angular_convention)[0])
        return rabi_tmf(omega_c, config.gamma13_per_ns, config.gamma12_per_ns, grid)
    if model == "exponential":
        return exponential_tmf(config.gamma_per_ns, grid, config.rise_ns)
    if model == "hermite_gauss":
        return hermite_gauss_tmf(config.hg_order, config.hg_center_ns, config.hg_width_ns, grid)
    if model == "time_bin":
        return time_bin_superposition(grid, config.bin_j, config.bin_k, config.bin_phase_rad)
    if model == "tabulated":
        file_grid, samples = read_tmf_csv(config.tmf_path)
        if not file_grid.same_as(grid):
            logger.info("表列 TMF 使用檔案中的網格 %s", file_grid)
        return tabulated_tmf(file_grid, samples)
    if model == "joint_spectrum":
        return tmf_from_joint_spectrum(read_spectrum_csv(config.tmf_path), grid)
    raise ConfigError(f"未知的 tmf_model: {model}")


def run_simulation(config: RunConfig, out_dir: Optional[Path] = None) -> SimulationRun:
    """模擬所有失諧並寫出自相關矩陣、真值 TMF 與 manifest.

    保存軌跡時先抽出完整軌跡再估計；不保存時邊抽樣邊累積。
    兩條路徑使用相同的亂數流，結果逐位元相同。
    """
    out_dir = ensure_dir(out_dir or config.out_dir)
    tmf = build_tmf(config)
    detunings = detunings_rad(config)
    files = [write_tmf_csv(out_dir / GROUND_TRUTH_NAME, tmf).name]
    trace_files = {}

    if not config.is_exact and config.save_traces != "none":
        trace_sets = simulate_trace_sets(tmf, detunings, config.eta, config.n_samples, config.seed)
        data = []
        for index, traces in enumerate(trace_sets):
            path = out_dir / traces_name(index, config.save_traces)
            if config.save_traces == "binary":
                write_traces_binary(path, traces)
            else:
                write_traces_csv(path, traces)
            trace_files[index] = path.name
            data.append(estimate_autocorr(traces))
    else:
        data = run_experiment(tmf, detunings, config.eta, config.n_samples, config.seed)

    entries = []
    for index, (a, mhz) in enumerate(zip(data, config.detunings_mhz)):
        files.extend(write_autocorr(out_dir, index, a))
        entry = {
            "index": index,
            "detuning_mhz": float(mhz),
            "delta_omega_rad_per_ns": a.delta_omega,
            "file": autocorr_name(index),
            "stderr_file": stderr_name(index) if a.stderr is not None else None,
            "n_samples": "exact" if a.is_exact else a.n_samples,
            "stream": index,
        }
        if index in trace_files:
            entry["traces_file"] = trace_files[index]
            files.append(trace_files[index])
        entries.append(entry)

    manifest = build_manifest(config.to_mapping(), tmf.grid, entries, files, config.seed)
    write_manifest(out_dir, manifest)
    logger.info("模擬完成：%d 個失諧，輸出到 %s", len(data), out_dir)
    return SimulationRun(out_dir, tmf, data, manifest)


def reconstruct_dataset(
    dataset: Dataset,
    psd: bool = False,
    phase_threshold: Optional[float] = None,
    m=None,
    psd_tol: float = DEFAULT_PSD_TOL,
) -> ReconstructionResult:
    kwargs = {} if phase_threshold is None else {"phase_threshold": phase_threshold}
    return reconstruct(dataset.data, dataset.grid, psd=psd, psd_tol=psd_tol, m="auto" if m is None else m, **kwargs)


def homodyne_only(data: list) -> bool:
    """資料只有一個 Δω = 0 矩陣."""
    return len(data) == 1 and data[0].delta_omega == 0


def zero_detuning(data: list):
    """取出 Δω = 0 的矩陣.

    Raises:
        InvalidArgumentError: 沒有 Δω = 0 的資料
    """
    for a in data:
        if a.delta_omega == 0:
            return a
    raise InvalidArgumentError("資料中沒有 Δω = 0 的自相關矩陣")


def write_reconstruction(
    out_dir: Path,
    result: ReconstructionResult,
    data: list,
    labels: str = "",
    source: str = "",
) -> list:
    """寫出 rho.re.csv、rho.im.csv、profile.csv、cuts.csv、report.txt（同差資料另寫 homodyne_profile.csv）."""
    out_dir = ensure_dir(out_dir)
    written = [p.name for p in write_density(out_dir / "rho", result.rho)]
    written.append(write_table(out_dir / "profile.csv", profile_table(result)).name)
    written.append(write_table(out_dir / "cuts.csv", cuts_table(result.rho, result.m_row)).name)
    if homodyne_only(data):
        profile = homodyne_profile(data[0], result.m_row)
        written.append(write_table(out_dir / "homodyne_profile.csv", homodyne_table(profile)).name)
    written.append(write_text(out_dir / "report.txt", format_report(result, labels=labels, source=source)).name)
    return written


def run_reconstruction(
    in_dir: Path,
    out_dir: Optional[Path] = None,
    psd: bool = False,
    phase_threshold: Optional[float] = None,
    m=None,
) -> tuple:
    """載入資料目錄、重建並寫出結果.

    Returns:
        (ReconstructionResult, 寫出的檔名列表)
    """
    dataset = load_dataset(in_dir)
    result = reconstruct_dataset(dataset, psd, phase_threshold, m)
    labels = dataset.manifest.get("config", {}).get("labels", "")
    files = write_reconstruction(Path(out_dir or in_dir), result, dataset.data, labels, str(in_dir))
    return result, files


def evaluate_roundtrip(
    result: Optional[ReconstructionResult],
    truth: TemporalModeFunction,
    exact: bool,
) -> RoundtripReport:
    """與真值比較並檢查門檻.

    result 為 None 代表重建時跡非正（例如 η = 0）。
    """
    if result is None:
        return RoundtripReport(exact=exact, raw_trace=0.0, failures=(DEGENERATE_TRACE,))
    if not result.raw_trace >= ROUNDTRIP_MIN_RAW_TRACE:
        return RoundtripReport(exact=exact, raw_trace=result.raw_trace, failures=(DEGENERATE_TRACE,))

    truth_rho = density_from_tmf(truth)
    f = fidelity(result.rho, truth)
    max_error = float(np.max(np.abs(result.rho.elements - truth_rho.elements)))
    failures = []
    if exact:
        if f < ROUNDTRIP_MIN_FIDELITY:
            failures.append(f"fidelity {f:.12f} < {ROUNDTRIP_MIN_FIDELITY:.12f}")
        if max_error > ROUNDTRIP_MAX_ELEMENT_ERROR:
            failures.append(f"max element error {max_error:.3g} > {ROUNDTRIP_MAX_ELEMENT_ERROR:g}")
    elif result.purity < ROUNDTRIP_MIN_PURITY:
        failures.append(f"purity {result.purity:.4f} < {ROUNDTRIP_MIN_PURITY}")

    return RoundtripReport(
        exact=exact,
        raw_trace=result.raw_trace,
        purity=result.purity,
        purity_raw=result.purity_raw,
        fidelity=f,
        max_element_error=max_error,
        failures=tuple(failures),
    )


def run_roundtrip(config: RunConfig, out_dir: Optional[Path] = None) -> tuple:
    """模擬 → 重建 → 比較，所有檔案都寫到同一個目錄.

    Returns:
        (RoundtripReport, ReconstructionResult 或 None)
    """
    run = run_simulation(config, out_dir)
    try:
        result = reconstruct(
            run.data,
            run.tmf.grid,
            psd=config.psd,
            phase_threshold=config.phase_threshold,
            m="auto" if config.m is None else config.m,
        )
    except DegenerateInputError as e:
        logger.warning("重建失敗：%s", e)
        return evaluate_roundtrip(None, run.tmf, config.is_exact), None

    write_reconstruction(run.out_dir, result, run.data, config.labels, str(run.out_dir))
    write_table(run.out_dir / "comparison.csv", comparison_table(result, run.tmf))
    return evaluate_roundtrip(result, run.tmf, config.is_exact), result


def run_analysis(
    in_dir: Path,
    out_dir: Optional[Path] = None,
    m=None,
    normalize_peak: bool = False,
) -> tuple:
    """只用 Δω = 0 矩陣的同差切面分析.

    Returns:
        (HomodyneProfile, 寫出的檔案路徑)
    """
    dataset = load_dataset(in_dir)
    profile = homodyne_profile(zero_detuning(dataset.data), "auto" if m is None else m, normalize_peak)
    out = ensure_dir(out_dir or in_dir)
    return profile, write_table(out / "homodyne_profile.csv", homodyne_table(profile))


def run_resolution_scan(
    config: RunConfig,
    factors: Sequence[int],
    out_dir: Optional[Path] = None,
) -> tuple:
    """真值 TMF 在不同偵測器時間解析度下的純度.

    Returns:
        (DataFrame, 寫出的 resolution.csv 路徑)
    """
    rho = density_from_tmf(build_tmf(config))
    table = resolution_table(rho, factors)
    out = ensure_dir(out_dir or config.out_dir)
    logger.info("解析度掃描: %d 個 factor", len(table))
    return table, write_table(out / RESOLUTION_NAME, table)
