#!/usr/bin/env python3
"""
System Validation Script for the Incidental Regression toolkit

This script validates that all components are importable and working, and
provides diagnostic information for troubleshooting.
"""

import importlib
import json
import sys
from pathlib import Path


class Colors:
    """ANSI color codes."""
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'


def print_test(name, passed, details=""):
    """Print test result."""
    status = f"{Colors.OKGREEN}✓ PASS{Colors.ENDC}" if passed else f"{Colors.FAIL}✗ FAIL{Colors.ENDC}"
    print(f"  {status} - {name}")
    if details and not passed:
        print(f"         {details}")


def print_section(name):
    """Print section header."""
    print(f"\n{Colors.BOLD}{'='*70}{Colors.ENDC}")
    print(f"{Colors.BOLD}{name}{Colors.ENDC}")
    print(f"{Colors.BOLD}{'='*70}{Colors.ENDC}")


def check_python_version():
    """Check Python version."""
    version = sys.version_info
    passed = version.major >= 3 and version.minor >= 8
    details = f"Python {version.major}.{version.minor}.{version.micro}"
    return passed, details


def check_module(module_name):
    """Check if a Python module can be imported."""
    try:
        importlib.import_module(module_name)
        return True, ""
    except ImportError as e:
        return False, str(e)


def check_dependencies():
    """Check all runtime dependencies."""
    dependencies = ['numpy', 'pandas', 'scipy', 'sklearn', 'joblib', 'dotenv']
    return {dep: check_module(dep) for dep in dependencies}


def check_package():
    """Check that every submodule of the package imports."""
    submodules = ['data_models', 'exceptions', 'linalg_core', 'penalized_estimator', 'inference',
                  'lambda_select', 'simulation', 'config', 'reporting']
    for name in submodules:
        passed, details = check_module(f'incidental_regression.{name}')
        if not passed:
            return False, f"{name}: {details}"
    return True, f"{len(submodules)} submodules imported successfully"


def check_files():
    """Check if required files exist."""
    required_files = [
        'requirements.txt',
        'cli.py',
        'example_usage.py',
        'incidental_regression/__init__.py',
        'incidental_regression/penalized_estimator.py',
        'incidental_regression/inference.py',
        'incidental_regression/lambda_select.py',
        'incidental_regression/simulation.py',
        'configs/smoke.json',
    ]
    return {file_path: Path(file_path).exists() for file_path in required_files}


def check_configs():
    """Check that every shipped experiment config validates."""
    try:
        from incidental_regression import load_experiment_config
        paths = sorted(Path('configs').glob('*.json'))
        for path in paths:
            load_experiment_config(path)
        return True, f"{len(paths)} configs valid"
    except Exception as e:
        return False, str(e)


def run_functional_test():
    """Fit a contaminated dataset and check the estimate and interval."""
    try:
        import numpy as np
        from incidental_regression import (
            Dataset, Penalty, component_interval, fit, kkt_check, two_step_fit,
        )

        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 2))
        Y = X @ np.array([1.0, 1.0]) + rng.normal(size=200)
        Y[:10] += 25.0

        result = fit(Dataset(X, Y), Penalty.soft(3.0))
        assert result.converged
        assert set(range(10)) <= set(result.active_set)
        assert kkt_check(Dataset(X, Y), result, 3.0).max_violation < 1e-6

        interval = component_interval(two_step_fit(Dataset(X, Y), result), 0, alpha=0.001)
        assert interval.contains(1.0)
        return True, "Fit, KKT conditions and interval correct"
    except Exception as e:
        return False, str(e)


def run_cli_smoke():
    """Run the smoke experiment through the CLI."""
    try:
        import tempfile
        from cli import main as cli_main

        with tempfile.TemporaryDirectory() as out:
            code = cli_main(['experiment', '--config', 'configs/smoke.json', '--threads', '1', '--out', out])
            record = json.loads((Path(out) / 'run_record.json').read_text(encoding='utf-8'))
        if code != 0:
            return False, f"exit code {code}: {record.get('error')}"
        return True, f"{len(record['artifacts'])} artifacts written"
    except Exception as e:
        return False, str(e)


def main():
    """Main validation function."""
    print(f"\n{Colors.BOLD}{'='*70}{Colors.ENDC}")
    print(f"{Colors.BOLD}Incidental Regression - Validation{Colors.ENDC}")
    print(f"{Colors.BOLD}{'='*70}{Colors.ENDC}\n")

    all_passed = True

    # 1. Python version
    print_section("Python Environment")
    passed, details = check_python_version()
    print_test("Python Version (>=3.8)", passed, details if not passed else "")
    if passed:
        print(f"         {details}")
    all_passed &= passed

    # 2. Dependencies
    print_section("Dependencies")
    for dep, (passed, details) in check_dependencies().items():
        print_test(dep, passed, details)
        all_passed &= passed

    # 3. Required files
    print_section("Required Files")
    for file_path, exists in check_files().items():
        print_test(file_path, exists, f"File not found: {file_path}")
        all_passed &= exists

    # 4. Package
    print_section("incidental_regression Package")
    for name, check in (("Module import", check_package), ("Experiment configs", check_configs)):
        passed, details = check()
        print_test(name, passed, details)
        if passed:
            print(f"         {details}")
        all_passed &= passed

    # 5. Functional tests
    print_section("Functional Tests")
    for name, check in (("Estimation pipeline", run_functional_test), ("CLI smoke experiment", run_cli_smoke)):
        passed, details = check()
        print_test(name, passed, details)
        if passed:
            print(f"         {details}")
        all_passed &= passed

    # Summary
    print_section("Summary")

    if all_passed:
        print(f"\n{Colors.OKGREEN}{Colors.BOLD}✓ All critical tests passed!{Colors.ENDC}")
        print(f"{Colors.OKGREEN}The toolkit is ready to use.{Colors.ENDC}\n")

        print(f"{Colors.BOLD}Next steps:{Colors.ENDC}")
        print("  1. Run example: python example_usage.py")
        print("  2. Run the test suite: python test_system.py")
        print("  3. Use CLI: python cli.py --help")
        print()

        return 0
    else:
        print(f"\n{Colors.FAIL}{Colors.BOLD}✗ Some tests failed!{Colors.ENDC}")
        print(f"{Colors.WARNING}Please check the errors above and ensure all dependencies are installed.{Colors.ENDC}\n")

        print(f"{Colors.BOLD}To fix issues:{Colors.ENDC}")
        print("  1. Install dependencies: pip install -r requirements.txt")
        print("  2. Run from the repository root so configs/ is found")
        print("  3. Rerun with details: python cli.py experiment --config configs/smoke.json --verbose")
        print()

        return 1


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print(f"\n{Colors.WARNING}Validation interrupted by user{Colors.ENDC}")
        sys.exit(1)
    except Exception as e:
        print(f"\n{Colors.FAIL}Unexpected error: {e}{Colors.ENDC}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
