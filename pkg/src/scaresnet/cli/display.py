"""Human-readable summaries on the error stream, rendered with rich."""

from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.live import Live
from rich.panel import Panel
from rich.table import Table

from scaresnet.nn import ParamCountReport, ShapeTrace

# stdout carries the JSON document
console = Console(stderr=True)


def _shape(shape) -> str:
    return "x".join(str(v) for v in shape)


def show_levels(solutions: List[Dict[str, int]], max_abcd: int) -> None:
    table = Table(title=f"SPPR level sets (a, b, c, d <= {max_abcd})")
    for column in ("x", "y", "z", "w"):
        table.add_column(column, justify="right", style="cyan")
    for s in solutions:
        table.add_row(str(s["x"]), str(s["y"]), str(s["z"]), str(s["w"]))
    console.print(table)


def show_pool_params(h: int, l: int, params: Dict[str, Any]) -> None:
    console.print(
        f"[bold]h={h} -> l={l}[/]: kernel {params['kernel']}, stride {params['stride']}, "
        f"padding {params['padding']} ({params['branch']}, t={params['t']})"
    )


def show_sweep(runs: List[Dict[str, Any]]) -> None:
    for run in runs:
        failures = len(run["failures"])
        style = "green" if not failures else "red"
        console.print(
            f"[{style}]{run['interpretation']}[/]: {run['checked']} pairs checked, "
            f"{failures} failures"
        )


def show_trace(trace: ShapeTrace, preset: str) -> None:
    table = Table(title=f"Shape trace ({preset})")
    table.add_column("Layer", style="cyan")
    table.add_column("Input", style="dim")
    table.add_column("Output", style="green")
    table.add_column("Params", justify="right")
    table.add_column("Mult-adds", justify="right")
    for row in trace.rows + [trace.total_row()]:
        table.add_row(
            row.layer,
            _shape(row.input_shape),
            _shape(row.output_shape),
            f"{row.params:,}",
            f"{row.mult_adds:,}",
        )
    console.print(table)


def show_param_count(report: ParamCountReport) -> None:
    console.print(
        f"[bold]{report.preset}[/] at {_shape(report.input_shape)}: "
        f"{report.total_params:,} parameters, {report.total_mult_adds:,} mult-adds"
    )
    if report.plain is not None:
        plain = report.plain
        console.print(
            f"DSEConv weights {plain.dse_params:,} vs plain {plain.plain_params:,} "
            f"(ratio {plain.ratio:.3f})"
        )


def show_grad_checks(results: List[Dict[str, Any]]) -> None:
    table = Table(title="Gradient checks")
    table.add_column("Module", style="cyan")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Threshold", justify="right", style="dim")
    table.add_column("Checked", justify="right", style="dim")
    table.add_column("Result")
    for r in results:
        verdict = "[green]pass[/]" if r["passed"] else "[red]FAIL[/]"
        table.add_row(
            r["module"],
            f"{r['max_rel_err']:.2e}",
            f"{r['threshold']:.0e}",
            str(r["checked"]),
            verdict,
        )
    console.print(table)


def show_dataset(summary: Dict[str, Any]) -> None:
    console.print(
        f"Wrote {summary['n']} samples ({summary['positives']} positive, sizes "
        f"{summary['size_min']}..{summary['size_max']}) to [bold]{summary['path']}[/]"
    )


def show_train_summary(report: Dict[str, Any]) -> None:
    console.print(
        Panel(
            f"loss {report['initial_loss']:.4f} -> {report['final_loss']:.4f}\n"
            f"training accuracy {report['final_accuracy']:.3f}\n"
            f"{len(report['losses'])} steps in {report['wall_clock_seconds']:.1f}s",
            title="train-demo",
        )
    )


def show_ablation(rows: List[Dict[str, Any]]) -> None:
    table = Table(title="Ablation")
    table.add_column("Variant", style="cyan")
    table.add_column("Params", justify="right")
    table.add_column("Initial loss", justify="right", style="dim")
    table.add_column("Final loss", justify="right")
    table.add_column("Accuracy", justify="right", style="green")
    table.add_column("Time", justify="right", style="dim")
    for row in rows:
        table.add_row(
            row["variant"],
            f"{row['parameters']:,}",
            f"{row['initial_loss']:.4f}",
            f"{row['final_loss']:.4f}",
            f"{row['final_accuracy']:.3f}",
            f"{row['wall_clock_seconds']:.1f}s",
        )
    console.print(table)


def show_config(config: Dict[str, Any]) -> None:
    table = Table(title="Effective configuration")
    table.add_column("Key", style="cyan")
    table.add_column("Value")
    for key in sorted(config):
        table.add_row(key, str(config[key]))
    console.print(table)


def show_error(message: str) -> None:
    console.print(f"[bold red]Error:[/] {message}")


class TrainingRenderer:
    """In-place progress line for train-demo using rich.Live."""

    def __init__(self, steps: int):
        self.steps = steps
        self.label = ""
        self.live: Optional[Live] = None

    def _line(self, step: int, loss: Optional[float]) -> str:
        loss_text = "-" if loss is None else f"{loss:.4f}"
        return f"{self.label}step {step}/{self.steps}  monitor loss {loss_text}"

    def start_live(self) -> None:
        self.live = Live(self._line(0, None), console=console, refresh_per_second=4, transient=True)
        self.live.start()

    def update(self, step: int, loss: float) -> None:
        if self.live:
            self.live.update(self._line(step + 1, loss))

    def stop_live(self) -> None:
        if self.live:
            self.live.stop()
            self.live = None

    def restart(self, label: str) -> None:
        """Reset the line for the next ablation variant."""
        self.label = f"{label}: "
        if self.live:
            self.live.update(self._line(0, None))
