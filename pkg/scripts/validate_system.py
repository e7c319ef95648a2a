#!/usr/bin/env python3
"""
System validation script for the adaptive-sampling simulator.
Run this script to check that the dependencies are installed and the
output directory is writable before starting a batch.
"""

import sys
import os
import logging

# Add the repository root to the path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import config
from src.error_handler import initialize_error_handling, get_system_validator


def main():
    """Run comprehensive system validation."""
    print("Adaptive Sampling Simulator - System Validation")
    print("=" * 40)

    # Set up basic logging
    logging.basicConfig(
        level=logging.INFO,
        format='%(levelname)s: %(message)s'
    )

    output_dir = sys.argv[1] if len(sys.argv) > 1 else config.OUTPUT_DIR

    try:
        print(f"Validating environment (output directory: {output_dir})...")
        passed = initialize_error_handling(output_dir)

        validator = get_system_validator()
        print("\n" + validator.get_validation_report())

        print("\nConfiguration:")
        print("-" * 20)
        print(f"  sizes: {config.ENVIRONMENT_SIZES}")
        print(f"  maps per size: {config.MAPS_PER_SIZE}")
        print(f"  policies: {config.POLICY_RULES}")
        print(f"  base seed: {config.BASE_SEED}")
        print(f"  workers: {config.WORKERS}")

        print("\n" + "=" * 40)
        if passed:
            print("✅ System validation PASSED - the simulator is ready to run")
            print("\nTo run the default experiment:")
            print("  python main.py run")
        else:
            print("❌ System validation FAILED - Please fix the issues above")
            print("\nCommon solutions:")
            print("  - Install missing dependencies: pip install -r requirements.txt")
            print("  - Point OUTPUT_DIR at a writable directory")

        return passed

    except Exception as e:
        print(f"❌ Validation failed with error: {e}")
        return False


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
