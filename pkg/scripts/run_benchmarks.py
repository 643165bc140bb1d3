#!/usr/bin/env python3
"""Run the shipped benchmark configs, export CSVs and plots, print metrics.

Usage: python scripts/run_benchmarks.py [output_dir]
"""

import sys
from pathlib import Path

from imsmc import compute_metrics, export_csv, load_config, run_experiment
from imsmc.cli import main as cli_main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results")
    out_dir.mkdir(parents=True, exist_ok=True)
    for config_path in sorted(CONFIG_DIR.glob("*.json")):
        name = config_path.stem
        cfg = load_config(config_path)
        for kind in ("robust", "imsmc"):
            variant = cfg.with_controller_type(kind)
            log = run_experiment(variant)
            csv_path = out_dir / f"{name}_{kind}.csv"
            export_csv(log, csv_path)
            metrics = compute_metrics(log, variant)
            print(f"{name} [{kind}]: settling={metrics.settling_time} "
                  f"band_entry={metrics.band_entry_time} "
                  f"chattering={metrics.chattering_index:.4g}")
            cli_main(["plot", str(csv_path), "--out-prefix", str(out_dir / f"{name}_{kind}")])
    return 0


if __name__ == "__main__":
    sys.exit(main())
