"""檔案格式：TMF/頻譜 CSV、矩陣 CSV、軌跡（CSV 或 TMQT 二進位）、manifest.json.

矩陣 CSV：第一列為格點中心（ns），之後 N 列各 N 個值，無標頭，數值以 %.17g 輸出，
因此相同輸入重跑會得到逐位元相同的檔案。
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .config import BLOCK_SIZE
from .errors import GridMismatchError, StorageError
from .simulate import AutocorrelationMatrix, QuadratureTraceSet
from .state import TimeBinDensityMatrix
from .tmf import JointSpectrum, TemporalModeFunction, TimeGrid

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
GROUND_TRUTH_NAME = "tmf.csv"

TMF_COLUMNS = ("tau_ns", "re", "im")
SPECTRUM_COLUMNS = ("omega_rad_per_ns", "re", "im")

# TMQT 二進位標頭：magic、版本、樣本數、格數、保留欄位，共 32 bytes，little-endian
TMQT_MAGIC = b"TMQT"
TMQT_VERSION = 1
TMQT_HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("n_samples", "<u8"),
    ("n_bins", "<u8"),
    ("reserved", "<u8"),
])

# 近似對稱的外部矩陣允許的不對稱量（相對於最大值）
_SYMMETRY_TOL = 1e-12


def autocorr_name(index: int) -> str:
    return f"autocorr_{index:02d}.csv"


def stderr_name(index: int) -> str:
    return f"autocorr_{index:02d}.stderr.csv"


def traces_name(index: int, fmt: str) -> str:
    return f"traces_{index:02d}.{'bin' if fmt == 'binary' else 'csv'}"


@dataclass(frozen=True)
class Dataset:
    """由 manifest 載入的資料目錄."""

    path: Path
    grid: TimeGrid
    data: list
    manifest: dict

    @property
    def ground_truth_path(self) -> Optional[Path]:
        name = self.manifest.get("ground_truth")
        return self.path / name if name else None


def ensure_dir(path: PathLike) -> Path:
    """建立輸出目錄.

    Raises:
        StorageError: 無法建立
    """
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"無法建立輸出目錄 {path}: {e}") from e
    return path


def _read_csv(path: Path, **kwargs) -> pd.DataFrame:
    if not path.is_file():
        raise StorageError(f"找不到檔案: {path}")
    try:
        return pd.read_csv(path, float_precision="round_trip", **kwargs)
    except (OSError, ValueError) as e:
        raise StorageError(f"無法讀取 {path}: {e}") from e


def write_table(path: PathLike, df: pd.DataFrame) -> Path:
    """以固定格式寫出 DataFrame（有標頭，無索引）."""
    path = Path(path)
    try:
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    except OSError as e:
        raise StorageError(f"無法寫入 {path}: {e}") from e
    return path


def write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise StorageError(f"無法寫入 {path}: {e}") from e
    return path


# ---------- TMF 與聯合頻譜 ----------

def _complex_columns(df: pd.DataFrame, columns: tuple, path: Path) -> tuple:
    names = tuple(str(c).strip() for c in df.columns)
    if names != columns:
        raise StorageError(f"{path} 的標頭必須是 {','.join(columns)}，收到 {','.join(names)}")
    values = df.to_numpy(dtype=float)
    if values.shape[0] < 2:
        raise StorageError(f"{path} 至少需要兩列資料")
    return values[:, 0], values[:, 1] + 1j * values[:, 2]


def read_tmf_csv(path: PathLike) -> tuple:
    """讀取 tau_ns,re,im 格式的表列 TMF.

    Returns:
        (TimeGrid, 複數取樣陣列)

    Raises:
        StorageError: 檔案不存在或格式錯誤
    """
    path = Path(path)
    tau, samples = _complex_columns(_read_csv(path), TMF_COLUMNS, path)
    try:
        grid = TimeGrid.from_centers(tau)
    except ValueError as e:
        raise StorageError(f"{path}: {e}") from e
    return grid, samples


def write_tmf_csv(path: PathLike, tmf: TemporalModeFunction) -> Path:
    df = pd.DataFrame({
        "tau_ns": tmf.grid.centers,
        "re": tmf.amplitudes.real,
        "im": tmf.amplitudes.imag,
    })
    return write_table(path, df)


def read_spectrum_csv(path: PathLike) -> JointSpectrum:
    """讀取 omega_rad_per_ns,re,im 格式的聯合頻譜."""
    path = Path(path)
    omega, values = _complex_columns(_read_csv(path), SPECTRUM_COLUMNS, path)
    try:
        return JointSpectrum(omega, values)
    except ValueError as e:
        raise StorageError(f"{path}: {e}") from e


def write_spectrum_csv(path: PathLike, spectrum: JointSpectrum) -> Path:
    df = pd.DataFrame({
        "omega_rad_per_ns": spectrum.detunings,
        "re": spectrum.values.real,
        "im": spectrum.values.imag,
    })
    return write_table(path, df)


# ---------- 矩陣 ----------

def write_matrix_csv(path: PathLike, centers: np.ndarray, values: np.ndarray) -> Path:
    """第一列為格點中心，其餘為矩陣列."""
    path = Path(path)
    table = pd.DataFrame(np.vstack([np.asarray(centers, dtype=float)[None, :], values]))
    try:
        table.to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise StorageError(f"無法寫入 {path}: {e}") from e
    return path


def read_matrix_csv(path: PathLike, square: bool = True) -> tuple:
    """讀取矩陣 CSV.

    Returns:
        (TimeGrid, 數值陣列)

    Raises:
        StorageError: 檔案不存在或形狀錯誤
    """
    path = Path(path)
    table = _read_csv(path, header=None)
    try:
        values = table.to_numpy(dtype=float)
        grid = TimeGrid.from_centers(values[0])
    except ValueError as e:
        raise StorageError(f"{path}: {e}") from e
    body = values[1:]
    if square and body.shape != (grid.n_bins, grid.n_bins):
        raise StorageError(f"{path} 的矩陣形狀 {body.shape} 與 {grid.n_bins} 個格點不符")
    if not np.all(np.isfinite(body)):
        raise StorageError(f"{path} 包含 NaN 或 Inf")
    return grid, body


def density_paths(prefix: PathLike) -> tuple:
    prefix = Path(prefix)
    return prefix.with_name(prefix.name + ".re.csv"), prefix.with_name(prefix.name + ".im.csv")


def write_density(prefix: PathLike, rho: TimeBinDensityMatrix) -> tuple:
    """寫出 <prefix>.re.csv 與 <prefix>.im.csv."""
    re_path, im_path = density_paths(prefix)
    centers = rho.grid.centers
    write_matrix_csv(re_path, centers, rho.elements.real)
    write_matrix_csv(im_path, centers, rho.elements.imag)
    return re_path, im_path


def read_density(prefix: PathLike) -> TimeBinDensityMatrix:
    re_path, im_path = density_paths(prefix)
    grid, re = read_matrix_csv(re_path)
    im_grid, im = read_matrix_csv(im_path)
    if not grid.same_as(im_grid):
        raise GridMismatchError(f"{re_path} 與 {im_path} 的格點不一致")
    return TimeBinDensityMatrix(grid, re + 1j * im)


def _symmetric(values: np.ndarray, path: Path) -> np.ndarray:
    if np.array_equal(values, values.T):
        return values
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.max(np.abs(values - values.T)) > _SYMMETRY_TOL * scale:
        raise StorageError(f"{path} 的自相關矩陣不對稱")
    return (values + values.T) / 2


def write_autocorr(directory: Path, index: int, a: AutocorrelationMatrix) -> list:
    centers = a.grid.centers
    files = [write_matrix_csv(directory / autocorr_name(index), centers, a.values).name]
    if a.stderr is not None:
        files.append(write_matrix_csv(directory / stderr_name(index), centers, a.stderr).name)
    return files


def read_autocorr(
    path: Path,
    delta_omega: float,
    stderr_path: Optional[Path] = None,
    n_samples: Optional[int] = None,
    expected: Optional[TimeGrid] = None,
) -> AutocorrelationMatrix:
    """讀取自相關矩陣（與選用的標準誤差）.

    expected 不為 None 時，檔案的格點必須與之相同，且回傳的物件使用 expected 網格。
    """
    grid, values = read_matrix_csv(path)
    if expected is not None:
        if not expected.same_as(grid):
            raise GridMismatchError(f"{path.name} 的格點與 manifest 不一致: {grid} vs {expected}")
        grid = expected
    stderr = None
    if stderr_path is not None:
        stderr_grid, stderr = read_matrix_csv(stderr_path)
        if not grid.same_as(stderr_grid):
            raise GridMismatchError(f"{stderr_path} 與 {path} 的格點不一致")
    return AutocorrelationMatrix(grid, delta_omega, _symmetric(values, path), stderr, n_samples)


# ---------- 軌跡 ----------

def write_traces_csv(path: PathLike, traces: QuadratureTraceSet) -> Path:
    """第一列為格點中心，每列一條軌跡."""
    return write_matrix_csv(path, traces.grid.centers, traces.traces)


def read_traces_csv(path: PathLike, delta_omega: float = 0.0, seed: int = 0, eta: float = 1.0) -> QuadratureTraceSet:
    grid, body = read_matrix_csv(path, square=False)
    if body.shape[1] != grid.n_bins:
        raise StorageError(f"{path} 的軌跡長度與格點數不符")
    return QuadratureTraceSet(grid, delta_omega, body, seed, eta)


def write_traces_binary(path: PathLike, traces: QuadratureTraceSet) -> Path:
    """TMQT 格式：32 bytes 標頭後接 little-endian float64 的列優先軌跡."""
    path = Path(path)
    header = np.zeros(1, dtype=TMQT_HEADER)
    header["magic"] = TMQT_MAGIC
    header["version"] = TMQT_VERSION
    header["n_samples"] = traces.n_samples
    header["n_bins"] = traces.grid.n_bins
    try:
        with open(path, "wb") as f:
            f.write(header.tobytes())
            f.write(np.ascontiguousarray(traces.traces, dtype="<f8").tobytes())
    except OSError as e:
        raise StorageError(f"無法寫入 {path}: {e}") from e
    return path


def read_traces_binary(
    path: PathLike,
    grid: TimeGrid,
    delta_omega: float = 0.0,
    seed: int = 0,
    eta: float = 1.0,
) -> QuadratureTraceSet:
    """讀取 TMQT 檔（二進位格式不含格點中心，需由 manifest 提供網格）.

    Raises:
        StorageError: magic、版本或長度不符
    """
    path = Path(path)
    if not path.is_file():
        raise StorageError(f"找不到檔案: {path}")
    raw = path.read_bytes()
    if len(raw) < TMQT_HEADER.itemsize:
        raise StorageError(f"{path} 太短，不是 TMQT 檔")
    header = np.frombuffer(raw[:TMQT_HEADER.itemsize], dtype=TMQT_HEADER)[0]
    if header["magic"] != TMQT_MAGIC:
        raise StorageError(f"{path} 的 magic 不是 TMQT")
    if int(header["version"]) != TMQT_VERSION:
        raise StorageError(f"不支援的 TMQT 版本: {int(header['version'])}")
    n_samples = int(header["n_samples"])
    n_bins = int(header["n_bins"])
    if n_bins != grid.n_bins:
        raise GridMismatchError(f"{path} 有 {n_bins} 個格點，manifest 為 {grid.n_bins}")
    body = np.frombuffer(raw[TMQT_HEADER.itemsize:], dtype="<f8")
    if body.size != n_samples * n_bins:
        raise StorageError(f"{path} 的資料長度 {body.size} 與標頭 {n_samples}×{n_bins} 不符")
    return QuadratureTraceSet(grid, delta_omega, body.reshape(n_samples, n_bins), seed, eta)


# ---------- manifest ----------

def build_manifest(
    config: dict,
    grid: TimeGrid,
    datasets: Sequence[dict],
    files: Sequence[str],
    seed: int,
    ground_truth: Optional[str] = GROUND_TRUTH_NAME,
) -> dict:
    """組出 manifest 內容（不含時間戳，重跑時內容相同）."""
    return {
        "format_version": MANIFEST_VERSION,
        "config": dict(config),
        "seed": int(seed),
        "block_size": BLOCK_SIZE,
        "grid": {"t_start_ns": grid.t_start, "dt_ns": grid.dt, "n_bins": grid.n_bins},
        "datasets": list(datasets),
        "ground_truth": ground_truth,
        "files": sorted(set(files) | {MANIFEST_NAME}),
    }


def write_manifest(directory: PathLike, manifest: dict) -> Path:
    path = Path(directory) / MANIFEST_NAME
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise StorageError(f"無法寫入 {path}: {e}") from e
    return path


def read_manifest(directory: PathLike) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise StorageError(f"找不到 {MANIFEST_NAME}: {directory}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise StorageError(f"無法讀取 {path}: {e}") from e
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise StorageError(f"不支援的 manifest 版本: {manifest.get('format_version')}")
    return manifest


def _manifest_grid(manifest: dict) -> TimeGrid:
    try:
        layout = manifest["grid"]
        return TimeGrid(float(layout["t_start_ns"]), float(layout["dt_ns"]), int(layout["n_bins"]))
    except (KeyError, TypeError, ValueError) as e:
        raise StorageError(f"manifest 的 grid 欄位無效: {e}") from e


def load_dataset(directory: PathLike) -> Dataset:
    """依 manifest 載入全部自相關矩陣.

    Raises:
        StorageError: manifest 或矩陣檔缺失、格式錯誤
        GridMismatchError: 矩陣的格點與 manifest 不一致
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    grid = _manifest_grid(manifest)
    entries = manifest.get("datasets") or []
    if not entries:
        raise StorageError(f"{directory} 的 manifest 沒有任何資料集")

    data = []
    for entry in entries:
        try:
            name = entry["file"]
            delta_omega = float(entry["delta_omega_rad_per_ns"])
        except (KeyError, TypeError, ValueError) as e:
            raise StorageError(f"manifest 的資料集項目無效: {entry!r}") from e
        stderr_file = entry.get("stderr_file")
        n_samples = entry.get("n_samples")
        a = read_autocorr(
            directory / name,
            delta_omega,
            directory / stderr_file if stderr_file else None,
            None if n_samples in (None, "exact") else int(n_samples),
            expected=grid,
        )
        data.append(a)

    logger.info("載入 %d 個自相關矩陣: %s", len(data), directory)
    return Dataset(directory, grid, data, manifest)
