#!/usr/bin/env python3
"""Build the offline demo workspace and run a full review through the CLI.

Creates (or reuses) a workspace directory containing the bundled
three-page schematic, synthetic datasheets, a CSV part library, the mock
fixture set, and a run config; then invokes the CLI in full-analysis
mode and, if requested, design-review mode against the bundled base.

    python scripts/run_demo.py [workdir] [--design-review] [--time-limit SECS]
"""

import argparse
import shutil
import sys
from pathlib import Path

from schemreview.cli import main as cli_main
from schemreview.config import load_config
from schemreview.demo import generate_fixtures, write_demo_workspace
from schemreview.pipeline import run_pipeline


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("workdir", nargs="?", default="demo_workspace")
    parser.add_argument("--design-review", action="store_true",
                        help="also run design-review mode against the base variant")
    parser.add_argument("--time-limit", type=float,
                        help="run with a time budget to demonstrate partial results")
    args = parser.parse_args()

    work = Path(args.workdir)
    paths = write_demo_workspace(work)
    print(f"workspace ready at {work.resolve()}")

    cfg = load_config(paths["config"])

    def run():
        shutil.rmtree(work / "cache", ignore_errors=True)
        shutil.rmtree(work / "out", ignore_errors=True)
        return run_pipeline(cfg, paths["schematic"])

    print("generating mock fixtures...")
    generate_fixtures(run, paths["fixtures"])
    shutil.rmtree(work / "cache", ignore_errors=True)
    shutil.rmtree(work / "out", ignore_errors=True)

    cli_args = ["--schematic", str(paths["schematic"]),
                "--config", str(paths["config"])]
    if args.design_review:
        cli_args += ["--mode", "design-review", "--base", str(paths["base"])]
    if args.time_limit is not None:
        cli_args += ["--time-limit-secs", str(args.time_limit)]

    print(f"\n$ schemreview {' '.join(cli_args)}\n")
    code = cli_main(cli_args)
    print(f"\nreview comments: {paths['out'] / 'comments'}")
    print(f"overlays:        {paths['out'] / 'overlays'}")
    print(f"manifest:        {paths['out'] / 'manifest.json'}")
    print(f"trace:           {paths['trace']}")
    print(f"exit code:       {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
