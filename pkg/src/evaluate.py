import csv
import statistics
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List
from src.csv_processor import load_runs_csv, save_summary_csv
from src.exceptions import ReportError
from src.logging_config import logger
from src.metrics import failure_counts
from src.metrics_report import generate_summary_markdown
from src.schemas import METRICS


def recompute_summary(runs_path: str) -> List[Dict[str, Any]]:
    """Summary rows rebuilt straight from runs.csv text, without the numpy summary path."""
    groups: "OrderedDict[tuple, List[float]]" = OrderedDict()
    with open(runs_path, 'r', encoding='utf-8', newline='') as f:
        for row in csv.DictReader(f):
            if row['status'] != 'ok':
                continue
            for metric in METRICS:
                if row[metric] != '':
                    groups.setdefault((row['method'], metric), []).append(float(row[metric]))

    # method-major order, metrics in their fixed order
    methods = list(OrderedDict.fromkeys(method for method, _ in groups))
    rows = []
    for method in methods:
        for metric in METRICS:
            values = groups.get((method, metric))
            if not values:
                continue
            rows.append({
                'method': method,
                'metric': metric,
                'mean': statistics.fmean(values),
                'sd': statistics.stdev(values) if len(values) > 1 else 0.0,
                'n_runs': len(values),
            })
    return rows


def run_evaluation(runs_path: str, output_dir: str = 'output') -> List[Dict[str, Any]]:
    """Recompute summary.csv and summary.md from a runs.csv."""
    if not Path(runs_path).is_file():
        raise ReportError(f"runs file not found: {runs_path}")
    summary = recompute_summary(runs_path)
    if not summary:
        raise ReportError(f"no successful runs with metrics in {runs_path}")
    try:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        save_summary_csv(summary, f'{output_dir}/summary.csv')
        generate_summary_markdown(summary, failure_counts(load_runs_csv(runs_path)), f'{output_dir}/summary.md')
    except OSError as e:
        raise ReportError(f"cannot write summary in {output_dir}: {e}")
    logger.info(f"Evaluation complete. Summary saved to {output_dir}")
    return summary


if __name__ == '__main__':
    import argparse

    parser = argparse.ArgumentParser(description='Recompute an experiment summary from runs.csv')
    parser.add_argument('--runs', required=True, help='runs.csv file')
    parser.add_argument('--out', default='output', help='Output directory')

    args = parser.parse_args()
    run_evaluation(args.runs, args.out)
