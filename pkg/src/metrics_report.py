from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List
from src.csv_processor import save_runs_csv, save_summary_csv, save_timings_csv
from src.exceptions import ReportError
from src.logging_config import logger
from src.metrics import failure_counts, summarize_runs
from src.schemas import METRICS, RunRecord

METRIC_LABELS = {'error_rate': "Error rate (%)", 'nll': "NLL", 'rmse': "RMSE"}


def format_mean_sd(metric: str, mean: float, sd: float) -> str:
    """`mean(sd)`; error rates are shown in percent."""
    if metric == 'error_rate':
        return f"{100 * mean:.1f}({100 * sd:.1f})"
    return f"{mean:.3f}({sd:.3f})"


def generate_summary_markdown(summary: List[Dict[str, Any]], failures: Dict[str, int],
                              output_path: str) -> str:
    """Human-readable method x metric table."""
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    metrics = [m for m in METRICS if any(row['metric'] == m for row in summary)]
    cells = {(row['method'], row['metric']): row for row in summary}

    report = f"""# Experiment Summary
Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}

Values are mean(sd) over successful runs.

| Method | """ + " | ".join(METRIC_LABELS[m] for m in metrics) + " | Runs | Failed |\n"
    report += "|---|" + "---|" * len(metrics) + "---|---|\n"

    for method, failed in failures.items():
        row_cells = []
        n_runs = 0
        for metric in metrics:
            cell = cells.get((method, metric))
            if cell is None:
                row_cells.append("-")
            else:
                row_cells.append(format_mean_sd(metric, cell['mean'], cell['sd']))
                n_runs = max(n_runs, cell['n_runs'])
        report += f"| {method} | " + " | ".join(row_cells) + f" | {n_runs} | {failed} |\n"

    if any(failures.values()):
        report += "\nSome runs failed; see the `error` column of runs.csv.\n"

    with open(output_path, 'w', encoding='utf-8') as f:
        f.write(report)
    return report


def emit_report(runs: List[RunRecord], out_dir: str) -> List[Dict[str, Any]]:
    """Write runs.csv, timings.csv, summary.csv and summary.md into `out_dir`."""
    if not any(r.status == "ok" for r in runs):
        raise ReportError("no successful runs; summary not written")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError(f"cannot create output directory {out_dir}: {e}")

    summary = summarize_runs(runs)
    try:
        save_runs_csv(runs, str(out / 'runs.csv'))
        save_timings_csv(runs, str(out / 'timings.csv'))
        save_summary_csv(summary, str(out / 'summary.csv'))
        generate_summary_markdown(summary, failure_counts(runs), str(out / 'summary.md'))
    except OSError as e:
        raise ReportError(f"cannot write report in {out_dir}: {e}")
    logger.info(f"Report written to {out}")
    return summary
