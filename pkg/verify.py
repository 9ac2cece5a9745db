#!/usr/bin/env python
"""
Environment check for heatflow.
Run this before a long experiment to confirm the install and sample configs are usable.
"""

import json
import sys
from pathlib import Path
from datetime import datetime

# ANSI colors
GREEN = '\033[92m'
RED = '\033[91m'
YELLOW = '\033[93m'
RESET = '\033[0m'

def check_mark(condition, message):
    """Print check mark or X based on condition."""
    if condition:
        print(f"{GREEN}OK{RESET}   {message}")
        return True
    else:
        print(f"{RED}FAIL{RESET} {message}")
        return False

def print_section(title):
    """Print section header."""
    print(f"\n{YELLOW}{'=' * 60}{RESET}")
    print(f"{YELLOW}{title}{RESET}")
    print(f"{YELLOW}{'=' * 60}{RESET}\n")

def verify_files():
    """Verify source modules and documentation exist."""
    print_section("1. FILES")

    required_files = {
        'Source Modules': [
            'src/__init__.py',
            'src/config.py',
            'src/logging_config.py',
            'src/exceptions.py',
            'src/schemas.py',
            'src/data_loader.py',
            'src/subsample.py',
            'src/basekernel.py',
            'src/graph.py',
            'src/spectral.py',
            'src/heatkernel.py',
            'src/gp.py',
            'src/train.py',
            'src/experiment.py',
            'src/csv_processor.py',
            'src/metrics.py',
            'src/metrics_report.py',
            'src/evaluate.py',
            'src/main.py',
        ],
        'Documentation': [
            'README.md',
            'QUICKSTART.md',
            'docs/pipeline.md',
            'docs/evaluation.md',
        ],
    }

    all_exist = True
    for category, files in required_files.items():
        print(f"\n{category}:")
        for file_path in files:
            exists = Path(file_path).is_file()
            all_exist = all_exist and exists
            check_mark(exists, file_path)

    return all_exist

def verify_dependencies():
    """Check if required packages can be imported."""
    print_section("2. DEPENDENCY CHECK")

    dependencies = [
        ('numpy', 'NumPy'),
        ('scipy', 'SciPy'),
        ('sklearn', 'scikit-learn'),
        ('pydantic', 'Pydantic'),
        ('dotenv', 'python-dotenv'),
        ('pytest', 'pytest'),
    ]

    results = []
    for package_name, description in dependencies:
        try:
            __import__(package_name)
            results.append(check_mark(True, f"{description}: {package_name}"))
        except ImportError:
            check_mark(False, f"{description}: {package_name} (not installed)")
            results.append(False)

    return all(results)

def verify_imports():
    """Verify the library modules import."""
    print_section("3. IMPORT VERIFICATION")

    modules = ['src.config', 'src.data_loader', 'src.spectral', 'src.train', 'src.experiment', 'src.main']
    results = []
    for module_name in modules:
        try:
            __import__(module_name)
            results.append(check_mark(True, module_name))
        except Exception as e:
            check_mark(False, f"{module_name}: {str(e)[:60]}")
            results.append(False)

    return all(results)

def verify_sample_configs():
    """Validate every sample experiment config."""
    print_section("4. SAMPLE CONFIGS")

    from src.schemas import load_experiment_config

    results = []
    for path in sorted(Path('data/samples').glob('*.json')):
        try:
            config = load_experiment_config(json.loads(path.read_text(encoding='utf-8')))
            results.append(check_mark(True, f"{path} ({config.experiment}, methods={config.methods})"))
        except Exception as e:
            check_mark(False, f"{path}: {str(e)[:80]}")
            results.append(False)

    return bool(results) and all(results)

def verify_smoke_run():
    """Fit one small model end to end."""
    print_section("5. SMOKE RUN")

    from src.data_loader import generate_concentric_circles
    from src.schemas import FLGPConfig
    from src.train import fit_flgp

    dataset = generate_concentric_circles(600, 50, seed=0)
    report = fit_flgp(dataset, FLGPConfig(s=100, r=3, M=30), method="skflgp")
    return check_mark(report.metrics['error_rate'] is not None,
                      f"skflgp on 600 circle points: error rate {100 * report.metrics['error_rate']:.1f}%")

def main():
    """Run all verifications."""
    print(f"\n{YELLOW}{'#' * 60}{RESET}")
    print(f"{YELLOW}# HEATFLOW - ENVIRONMENT VERIFICATION{RESET}")
    print(f"{YELLOW}# {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}{RESET}")
    print(f"{YELLOW}{'#' * 60}{RESET}\n")

    checks = [
        ('Files', verify_files),
        ('Dependencies', verify_dependencies),
        ('Import Verification', verify_imports),
        ('Sample Configs', verify_sample_configs),
        ('Smoke Run', verify_smoke_run),
    ]

    results = {}
    for check_name, check_func in checks:
        try:
            results[check_name] = check_func()
        except Exception as e:
            print(f"\n{RED}{check_name} failed with error: {e}{RESET}")
            results[check_name] = False

    print_section("VERIFICATION SUMMARY")

    passed = sum(1 for v in results.values() if v)
    total = len(results)

    for check_name, result in results.items():
        status = f"{GREEN}PASS{RESET}" if result else f"{RED}FAIL{RESET}"
        print(f"{status} {check_name}")

    print(f"\n{YELLOW}Overall: {passed}/{total} checks passed{RESET}\n")
    return 0 if passed == total else 1

if __name__ == '__main__':
    sys.exit(main())
