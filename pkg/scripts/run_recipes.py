#!/usr/bin/env python3
"""Run every bundled recipe end to end against the toy data and mock endpoint.

Usage (from the repo root):
    python3 scripts/run_recipes.py [--cache-dir .ragkit_cache]

For each recipe this runs process -> infer -> eval (where configured) and
prints the global metrics, then the training exports. Everything is
offline: inference uses the echo mock and the judge metrics use the
built-in offline judges.
"""

import argparse
import sys
from pathlib import Path

import yaml

from ragkit.cli import main as ragkit_main

RECIPES = [
    ("baseline", "configs/process_baseline.yaml", "configs/infer_baseline.yaml", None),
    ("rag", "configs/process_rag.yaml", "configs/infer_rag.yaml", "configs/eval_rag.yaml"),
    ("cot", "configs/process_cot.yaml", "configs/infer_cot.yaml", "configs/eval_cot.yaml"),
    ("rag-sft", "configs/process_rag_sft.yaml", None, None),
    ("cot-sft", "configs/process_cot_sft.yaml", None, None),
]

EXPORTS = [
    ("rag-sft", "configs/export_rag_sft.yaml", "out/rag_sft_train.jsonl"),
    ("cot-sft", "configs/export_cot_sft.yaml", "out/cot_sft_train.jsonl"),
]


def run(argv):
    code = ragkit_main(argv)
    if code != 0:
        print(f"command failed ({code}): {' '.join(argv)}", file=sys.stderr)
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cache-dir", default=".ragkit_cache")
    args = parser.parse_args()

    if not Path("configs").is_dir():
        sys.exit("run this from the repository root (configs/ not found)")

    for name, process, infer, evaluate in RECIPES:
        print(f"=== {name} ===")
        run(["process", "-c", process, "--cache-dir", args.cache_dir])
        if infer:
            run(["infer", "-c", infer])
        if evaluate:
            run(["eval", "-c", evaluate])
            results = yaml.safe_load(open(yaml.safe_load(open(evaluate))["results_file"]))
            for metric, value in results["global"].items():
                print(f"  {metric}: {value}")

    for name, config, output in EXPORTS:
        print(f"=== export {name} ===")
        run(["export-train", "-c", config])
        print(f"  wrote {output} (+ manifest)")


if __name__ == "__main__":
    main()
