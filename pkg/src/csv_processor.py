import csv
from pathlib import Path
from typing import Any, Dict, List
import numpy as np
from src.data_loader import Dataset
from src.exceptions import ReportError
from src.schemas import RUN_COLUMNS, STAGES, SUMMARY_COLUMNS, TIMING_COLUMNS, RunRecord


def format_float(value) -> str:
    '''17 significant digits, enough to round-trip a double exactly.'''
    if value is None:
        return ''
    return f"{float(value):.17g}"


def _open_for_write(output_path: str):
    path = Path(output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, 'w', encoding='utf-8', newline='')


def save_dataset_csv(dataset: Dataset, output_path: str):
    '''Write `x1..xp,label` rows; unlabeled rows carry an empty label field.'''
    with _open_for_write(output_path) as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow([f"x{j + 1}" for j in range(dataset.p)] + ["label"])
        for i, point in enumerate(dataset.cloud.points):
            label = format_float(dataset.labels[i]) if i < dataset.m else ''
            writer.writerow([format_float(v) for v in point] + [label])


def _run_row(run: RunRecord) -> Dict[str, Any]:
    row = run.model_dump()
    out = {}
    for column in RUN_COLUMNS:
        value = row.get(column)
        if isinstance(value, float):
            value = format_float(value)
        out[column] = '' if value is None else value
    return out


def save_runs_csv(runs: List[RunRecord], output_path: str):
    '''One row per method x repetition in the fixed RUN_COLUMNS order.'''
    with _open_for_write(output_path) as f:
        writer = csv.DictWriter(f, fieldnames=RUN_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for run in runs:
            writer.writerow(_run_row(run))


def save_timings_csv(runs: List[RunRecord], output_path: str):
    '''Wall-clock seconds per stage, kept apart from the deterministic runs file.'''
    with _open_for_write(output_path) as f:
        writer = csv.DictWriter(f, fieldnames=TIMING_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for run in runs:
            row = {'method': run.method, 'repetition': run.repetition, 'seed': run.seed}
            for stage in STAGES:
                row[f"time_{stage}"] = f"{run.timings.get(stage, 0.0):.6f}"
            row['time_total'] = f"{sum(run.timings.values()):.6f}"
            writer.writerow(row)


def save_summary_csv(rows: List[Dict[str, Any]], output_path: str):
    '''Write (method, metric, mean, sd, n_runs) rows.'''
    with _open_for_write(output_path) as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({
                'method': row['method'],
                'metric': row['metric'],
                'mean': format_float(row['mean']),
                'sd': format_float(row['sd']),
                'n_runs': row['n_runs'],
            })


def load_runs_csv(csv_path: str) -> List[RunRecord]:
    '''Read runs.csv back into records (timings are not part of this file).'''
    path = Path(csv_path)
    if not path.is_file():
        raise ReportError(f"runs file not found: {csv_path}")
    runs = []
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        missing = set(RUN_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ReportError(f"{csv_path} lacks columns {sorted(missing)}")
        for row in reader:
            runs.append(RunRecord(**{k: (v if v != '' else None) for k, v in row.items() if k in RUN_COLUMNS}))
    return runs


def load_summary_csv(csv_path: str) -> List[Dict[str, Any]]:
    '''Read summary.csv with numeric columns parsed.'''
    with open(csv_path, 'r', encoding='utf-8', newline='') as f:
        return [
            {
                'method': row['method'],
                'metric': row['metric'],
                'mean': float(row['mean']),
                'sd': float(row['sd']),
                'n_runs': int(row['n_runs']),
            }
            for row in csv.DictReader(f)
        ]


def save_prior_csv(points: np.ndarray, values: np.ndarray, reference: int, output_path: str):
    '''Covariance with a reference point next to coordinates, ready for plotting.'''
    with _open_for_write(output_path) as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(["index"] + [f"x{j + 1}" for j in range(points.shape[1])] + ["covariance", "reference"])
        for i, (point, value) in enumerate(zip(points, values)):
            writer.writerow([i] + [format_float(v) for v in point] + [format_float(value), int(i == reference)])


def save_block_csv(rows: np.ndarray, cols: np.ndarray, values: np.ndarray, output_path: str):
    '''Covariance block as `row,col,value` triples, rows outermost.'''
    with _open_for_write(output_path) as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(["row", "col", "value"])
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                writer.writerow([int(i), int(j), format_float(values[a, b])])
