"""heatflow - heat-kernel Gaussian processes on point clouds via reduced-rank graph Laplacians"""

__version__ = "1.0.0"

from src.logging_config import logger
from src.data_loader import Dataset, PointCloud, generate_concentric_circles, generate_spiral, load_csv_dataset
from src.train import FitReport, fit_egp_baseline, fit_flgp, fit_glgp_baseline, fit_nystrom_baseline
from src.experiment import run_experiment

__all__ = [
    'logger',
    'Dataset',
    'PointCloud',
    'generate_concentric_circles',
    'generate_spiral',
    'load_csv_dataset',
    'FitReport',
    'fit_flgp',
    'fit_egp_baseline',
    'fit_glgp_baseline',
    'fit_nystrom_baseline',
    'run_experiment',
]
