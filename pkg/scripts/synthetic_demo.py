#!/usr/bin/env python3
"""End-to-end demo on a synthetic access log.

Generates traffic for a small site whose hub page behaves differently
depending on the entry page (the kind of history effect a first-order chain
cannot express), then runs the full pipeline: sessionize, build, trails,
summarize, predict. All artifacts land in --out-dir.

    python3 scripts/synthetic_demo.py --out-dir demo_run
"""

import argparse
import random
import sys

from navchain.cli import main as navchain_main


def synthesize_log(path, seed, visitors):
    """Write a raw CSV log: source,timestamp,url,status.

    Entry via /promo sends hub readers to /signup, entry via /docs sends them
    to /reference; organic entries split evenly. A sprinkle of asset requests
    and failed requests exercises the filters upstream of sessionization.
    """
    rng = random.Random(seed)
    t = 1_000_000
    lines = []
    for visitor in range(visitors):
        host = f"10.0.{visitor // 250}.{visitor % 250}"
        entry = rng.choice(["/promo", "/docs", "/", "/promo", "/docs"])
        t += rng.randint(30, 7200)
        session = [entry, "/hub"]
        if entry == "/promo":
            follow = "/signup" if rng.random() < 0.85 else "/reference"
        elif entry == "/docs":
            follow = "/reference" if rng.random() < 0.85 else "/signup"
        else:
            follow = rng.choice(["/signup", "/reference"])
        session.append(follow)
        if rng.random() < 0.4:
            session.append("/thanks" if follow == "/signup" else "/examples")
        ts = t
        for url in session:
            lines.append(f"{host},{ts},{url},200")
            ts += rng.randint(5, 120)
            if rng.random() < 0.3:
                lines.append(f"{host},{ts},/static/style.css,200")
                ts += 1
            if rng.random() < 0.05:
                lines.append(f"{host},{ts},/broken,404")
                ts += 1
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    return len(lines)


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_run")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--visitors", type=int, default=400)
    parser.add_argument("--order", type=int, default=2)
    parser.add_argument("--gamma", default="0.05")
    args = parser.parse_args(argv)

    import os

    os.makedirs(args.out_dir, exist_ok=True)
    log_path = os.path.join(args.out_dir, "access.log")
    n_requests = synthesize_log(log_path, args.seed, args.visitors)
    print(f"wrote {n_requests} raw requests to {log_path}")

    common = ["--out-dir", args.out_dir, "--num-visits", "0"]
    steps = [
        [
            "sessionize",
            "--input",
            log_path,
            "--input-kind",
            "raw",
            "--exclude-suffixes",
            ".css,.js,.png",
            "--exclude-status-classes",
            "4,5",
        ],
        [
            "build",
            "--input",
            os.path.join(args.out_dir, "sessions.tsv"),
            "--order",
            str(args.order),
            "--gamma",
            args.gamma,
        ],
        [
            "trails",
            "--model",
            os.path.join(args.out_dir, "model.txt"),
            "--lambda",
            "0.005",
            "--mtl",
            "3",
            "--top-m",
            "15",
        ],
        [
            "report",
            "--input",
            os.path.join(args.out_dir, "sessions.tsv"),
            "--order",
            str(args.order),
            "--gamma",
            args.gamma,
            "--mtl",
            "3",
            "--length-mode",
            "both",
            "--folds",
            "5",
        ],
    ]
    for step in steps:
        print(f"$ navchain {' '.join(step + common)}")
        status = navchain_main(step + common)
        if status != 0:
            return status
    print(f"artifacts: sessions.tsv model.txt state_counts.csv trails.csv "
          f"summarize.csv predict.csv in {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(run())
