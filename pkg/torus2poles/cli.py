"""CLI入口模块 - 命令行界面"""
import sys
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from .config import EXPERIMENT_NAMES, ExperimentConfig, get_settings, load_config
from .errors import EXIT_CONFIG_ERROR, EXIT_OK, ConfigError, Torus2PolesError

app = typer.Typer(
    name="torus2poles",
    help="class A Lorentz 2-环面上的类时极点、闭测地线与 Busemann 函数数值实验",
    add_completion=False,
)
console = Console()


def set_quiet(quiet: bool) -> None:
    """统一开关所有模块的控制台输出"""
    from . import artifacts, causal, dynamics, experiments, figures, horocycle, lattice, poles

    for module in (sys.modules[__name__], artifacts, causal, dynamics, experiments, figures, horocycle, lattice, poles):
        module.console.quiet = quiet


def show_summary(report, output_dir: Path) -> None:
    """以表格显示检查结果"""
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("检查")
    table.add_column("结果")
    table.add_column("数值", justify="right")
    table.add_column("容差", justify="right")
    for check in report.checks:
        mark = "[green]通过[/green]" if check.passed else "[red]失败[/red]"
        table.add_row(check.name, mark, f"{check.value:.3e}", f"{check.tolerance:.1e}")
    console.print()
    console.print(table)
    console.print(f"   目录: {output_dir}")
    if report.error:
        console.print(f"[bold red]运行中止: {report.error}[/bold red]")
    elif report.failed:
        console.print(f"[bold red]{len(report.failed)}/{len(report.checks)} 项检查失败[/bold red]")
    else:
        console.print(f"[bold green]全部 {len(report.checks)} 项检查通过[/bold green]")


def resolve_config(
    config_path: Optional[Path],
    out: Optional[Path],
    seed: Optional[int],
    experiment: Optional[str],
) -> ExperimentConfig:
    """
    合并配置来源：命令行 > 配置文件 > .env / 环境变量 > 内置默认值

    Raises:
        ConfigError: 配置文件或参数无效
    """
    settings = get_settings()
    config = load_config(config_path) if config_path is not None else ExperimentConfig()
    if experiment is not None and experiment not in EXPERIMENT_NAMES:
        raise ConfigError([f"<cli>: --experiment 必须是 {', '.join(EXPERIMENT_NAMES)} 之一，实际为 {experiment!r}"])
    if seed is None and "seed" not in config.experiment.model_fields_set:
        seed = settings.seed
    output_dir = out
    if output_dir is None and config.experiment.output_dir is None:
        output_dir = settings.output_dir
    return config.with_overrides(name=experiment, seed=seed, output_dir=output_dir)


@app.command()
def main(
    config: Optional[Path] = typer.Option(None, "--config", help="实验配置文件（INI 格式）"),
    out: Optional[Path] = typer.Option(None, "--out", help="输出目录"),
    seed: Optional[int] = typer.Option(None, "--seed", help="随机种子"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="网格扫描进程数"),
    experiment: Optional[str] = typer.Option(None, "--experiment", help="实验名称（覆盖配置文件）"),
    quiet: bool = typer.Option(False, "--quiet", help="只输出错误"),
):
    """
    运行一个数值实验并写出 results.json、CSV 表格与 SVG 图形

    退出码：0 全部通过，1 检查失败，2 配置错误，3 求解器不一致
    """
    from .experiments import run_experiment

    settings = get_settings()
    set_quiet(quiet or settings.quiet)
    try:
        experiment_config = resolve_config(config, out, seed, experiment)
    except ConfigError as e:
        for line in e.diagnostics:
            console.print(f"[red]{escape(line)}[/red]", soft_wrap=True)
        if console.quiet:
            for line in e.diagnostics:
                typer.echo(line, err=True)
        raise typer.Exit(EXIT_CONFIG_ERROR)

    output_dir = Path(experiment_config.experiment.output_dir)
    workers = threads if threads is not None else settings.threads
    try:
        report = run_experiment(experiment_config, output_dir, workers)
    except Torus2PolesError as e:
        console.print(f"[red]错误: {escape(str(e))}[/red]")
        raise typer.Exit(e.exit_code)
    except KeyboardInterrupt:
        console.print("\n[yellow]用户中断操作[/yellow]")
        raise typer.Exit(130)

    show_summary(report, output_dir)
    if report.exit_code != EXIT_OK:
        raise typer.Exit(report.exit_code)


if __name__ == "__main__":
    app()
