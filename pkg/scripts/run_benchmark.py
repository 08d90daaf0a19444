#!/usr/bin/env python3
"""Run the synthetic benchmark end to end and report per-seed metrics.

For each seed this generates a fresh knowledge base and dataset, trains
the parser with iterative ML followed by augmented REINFORCE, and prints
dev/test metrics plus the pseudo-gold store coverage. The last line
reports medians across seeds, which is how the benchmark is scored.
"""

import argparse
import json
import statistics
import sys
import time

from lisplab import programmer, taskgen, trainer


def run_seed(seed: int, config: trainer.TrainConfig) -> dict:
    start = time.time()
    kb = taskgen.gen_kb(seed=seed)
    train_items, dev_items, test_items = taskgen.gen_dataset(kb, seed=seed)
    model = programmer.build_model(kb, train_items, seed=seed)
    store, _ = trainer.train(model, kb, train_items, dev_items, config)
    dev = trainer.evaluate(model, kb, dev_items, config.max_expressions)
    test = trainer.evaluate(model, kb, test_items, config.max_expressions)
    return {
        "seed": seed,
        "dev_f1": dev.avg_f1,
        "test_f1": test.avg_f1,
        "dev_accuracy_at_1": dev.accuracy_at_1,
        "coverage": store.coverage([item.qid for item in train_items]),
        "seconds": round(time.time() - start, 1),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--out", help="also write results as JSON to this path")
    args = parser.parse_args(argv)

    results = []
    for seed in args.seeds:
        result = run_seed(seed, trainer.TrainConfig(seed=seed))
        results.append(result)
        print(
            f"seed {result['seed']}: dev F1 {result['dev_f1']:.3f}  "
            f"test F1 {result['test_f1']:.3f}  coverage {result['coverage']:.3f}  "
            f"{result['seconds']:.0f}s",
            flush=True,
        )

    summary = {
        "median_dev_f1": statistics.median(r["dev_f1"] for r in results),
        "median_test_f1": statistics.median(r["test_f1"] for r in results),
        "median_coverage": statistics.median(r["coverage"] for r in results),
        "total_seconds": round(sum(r["seconds"] for r in results), 1),
    }
    print(
        f"median: dev F1 {summary['median_dev_f1']:.3f}  "
        f"test F1 {summary['median_test_f1']:.3f}  "
        f"coverage {summary['median_coverage']:.3f}  "
        f"total {summary['total_seconds']:.0f}s"
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"runs": results, "summary": summary}, fh, indent=2)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
