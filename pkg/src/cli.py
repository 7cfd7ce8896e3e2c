"""命令列介面：simulate、reconstruct、analyze、roundtrip、oracle、resolution.

結束碼：0 成功；1 驗收門檻未通過；2 用法或輸入錯誤。
"""

import logging
from pathlib import Path
from typing import Optional

import click

from .config import ANGULAR_CONVENTIONS, TMF_MODELS, TRACE_FORMATS, RunConfig, load_run_config
from .display import (
    format_homodyne,
    format_oracle,
    format_resolution,
    format_roundtrip,
    format_simulation,
    format_summary,
)
from .errors import TomographyError
from .oracle import cross_check
from .pipeline import run_analysis, run_reconstruction, run_resolution_scan, run_roundtrip, run_simulation

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1


class TomographyCLIError(click.ClickException):
    """輸入或資料錯誤，結束碼 2."""

    exit_code = 2


def _overrides(**options) -> dict:
    """命令列選項 → 設定鍵的字串覆寫值（未提供的選項不覆寫）."""
    mapping = {
        "out": "out_dir",
        "seed": "seed",
        "samples": "n_samples",
        "detunings": "detunings_mhz",
        "angular_convention": "angular_convention",
        "phase_threshold": "phase_threshold",
        "m": "m",
        "tmf": "tmf_model",
        "tmf_path": "tmf_path",
        "eta": "eta",
        "save_traces": "save_traces",
    }
    out = {}
    for option, key in mapping.items():
        value = options.get(option)
        if value is not None:
            out[key] = str(value)
    if options.get("psd"):
        out["psd"] = "true"
    return out


def _load_config(config_path: Optional[Path], **options) -> RunConfig:
    try:
        return load_run_config(config_path, _overrides(**options))
    except TomographyError as e:
        raise TomographyCLIError(str(e)) from e


def _require_tmf(config: RunConfig) -> None:
    if config.tmf_model is None:
        raise click.UsageError("缺少 TMF 設定：請在設定檔指定 tmf_model 或使用 --tmf")


def _run(func, *args, **kwargs):
    """呼叫流程函數，把函式庫錯誤轉成結束碼 2."""
    try:
        return func(*args, **kwargs)
    except TomographyError as e:
        raise TomographyCLIError(str(e)) from e


def config_options(func):
    """simulate 與 roundtrip 共用的設定選項."""
    options = [
        click.option("--config", "config_path", type=click.Path(path_type=Path), help="key = value 設定檔"),
        click.option("--out", help="輸出目錄"),
        click.option("--seed", help="亂數種子 (u64)"),
        click.option("--samples", help="每個失諧的軌跡數，或 exact"),
        click.option("--detunings", help="失諧列表 (MHz)，以逗號分隔"),
        click.option("--angular-convention", type=click.Choice(ANGULAR_CONVENTIONS), help="MHz 換算方式"),
        click.option("--tmf", type=click.Choice(TMF_MODELS), help="TMF 模型"),
        click.option("--tmf-path", help="表列 TMF 或聯合頻譜 CSV"),
        click.option("--eta", help="預示效率 η"),
        click.option("--save-traces", type=click.Choice(TRACE_FORMATS), help="是否保存原始軌跡"),
        click.option("--psd", is_flag=True, default=False, help="重建後投影到半正定錐"),
        click.option("--phase-threshold", help="相位遮罩門檻（相對 max|ρ|）"),
        click.option("--m", help="相位參考列索引，或 auto"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option("-v", "--verbose", is_flag=True, default=False, help="顯示除錯訊息")
def main(verbose: bool):
    """時間格單光子時間模式斷層掃描."""
    level = logging.DEBUG if verbose else logging.WARNING
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    root.setLevel(level)


@main.command()
@config_options
def simulate(config_path, **options):
    """模擬各失諧的自相關矩陣並寫入輸出目錄."""
    config = _load_config(config_path, **options)
    _require_tmf(config)
    run = _run(run_simulation, config)
    click.echo(format_simulation(run))


@main.command("reconstruct")
@click.argument("directory", type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="key = value 設定檔")
@click.option("--out", help="輸出目錄（預設為資料目錄）")
@click.option("--psd", is_flag=True, default=False, help="重建後投影到半正定錐")
@click.option("--phase-threshold", help="相位遮罩門檻（相對 max|ρ|）")
@click.option("--m", help="相位參考列索引，或 auto")
def reconstruct_cmd(directory, config_path, out, psd, phase_threshold, m):
    """由資料目錄重建密度矩陣."""
    config = _load_config(config_path, psd=psd, phase_threshold=phase_threshold, m=m)
    out_dir = Path(out) if out else directory
    result, files = _run(
        run_reconstruction,
        directory,
        out_dir,
        psd=config.psd,
        phase_threshold=config.phase_threshold,
        m=config.m,
    )
    click.echo(format_summary(result))
    click.echo(f"輸出: {out_dir}（{', '.join(files)}）")


@main.command()
@click.argument("directory", type=click.Path(path_type=Path))
@click.option("--out", help="輸出目錄（預設為資料目錄）")
@click.option("--m", help="列索引，或 auto")
@click.option("--normalize-peak", is_flag=True, default=False, help="以 max|A| 正規化")
def analyze(directory, out, m, normalize_peak):
    """只用 Δω = 0 資料的同差切面分析."""
    config = _load_config(None, m=m)
    profile, path = _run(run_analysis, directory, Path(out) if out else None, config.m, normalize_peak)
    click.echo(format_homodyne(profile, path))


@main.command()
@config_options
@click.pass_context
def roundtrip(ctx, config_path, **options):
    """模擬 → 重建 → 與真值比較，門檻未通過時結束碼為 1."""
    config = _load_config(config_path, **options)
    _require_tmf(config)
    report, _ = _run(run_roundtrip, config)
    click.echo(format_roundtrip(report))
    if not report.passed:
        ctx.exit(EXIT_FAILURE)


@main.command()
@click.option("--trials", default=1000, show_default=True, type=click.IntRange(min=1), help="隨機實例數")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0), help="亂數種子")
@click.option("--grid-steps", default=200, show_default=True, type=click.IntRange(min=100), help="粗格數")
@click.pass_context
def oracle(ctx, trials, seed, grid_steps):
    """比對暴力搜尋與正規方程解，以及純量正向模型."""
    summary = _run(cross_check, trials, seed, grid_steps)
    click.echo(format_oracle(summary))
    if not summary.passed:
        ctx.exit(EXIT_FAILURE)


def _parse_factors(text: str) -> list:
    try:
        factors = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise TomographyCLIError(f"factor 列表必須是整數: {text}") from e
    if not factors:
        raise TomographyCLIError("factor 列表是空的")
    return factors


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="key = value 設定檔")
@click.option("--tmf", type=click.Choice(TMF_MODELS), help="TMF 模型")
@click.option("--tmf-path", help="表列 TMF 或聯合頻譜 CSV")
@click.option("--out", help="輸出目錄")
@click.option("--factors", default="1,2,4,8", show_default=True, help="每個偵測器格包含的細格數，以逗號分隔")
def resolution(config_path, tmf, tmf_path, out, factors):
    """真值 TMF 在較粗偵測器時間解析度下的純度."""
    config = _load_config(config_path, tmf=tmf, tmf_path=tmf_path, out=out)
    _require_tmf(config)
    table, path = _run(run_resolution_scan, config, _parse_factors(factors))
    click.echo(format_resolution(table, path))
