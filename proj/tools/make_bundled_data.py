#!/usr/bin/env python3
"""Regenerates the bundled example workspace under data/.

The numbers are synthetic. Latencies are shaped so that, at S_L = 63, the
cost coefficients of a hexacore CPU + single-shader GPU platform produce the
decision structure shown in the README; the acceptance traces are
built so their per-sample percentiles land exactly on chosen values
(translation task, 81 samples per configuration, so the median and p90 are
order statistics 40 and 72).
"""

import math
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"
SEQ_LENS = [16, 32, 48, 63, 80, 96, 128]
ANCHOR = 63

# Latencies in ms at S_L = 63, indexed by available CPU cores.
TARGET_CPU = {1: 1000.0, 2: 489.0, 3: 330.0, 4: 260.0, 5: 220.0, 6: 195.0}
DRAFTER_CPU = {1: 800.0, 2: 464.55, 3: 306.9, 4: 252.2, 5: 189.794, 6: 191.1}
DRAFTER_GPU = 357.8
# The GPU lacks INT8 kernels; the promoted target is stored as fp32.
TARGET_GPU = 180.0


def scale(base, s, fixed, slope):
    return round(base * (fixed + slope * s / ANCHOR), 3)


def write_platform():
    text = (
        "#specmap platform v1\n"
        "# hexacore Cortex-A55 class CPU and a single-shader mobile GPU\n"
        "partition_count=2\n"
        "unit_id,kind,resource_count\n"
        "cpu,cpu,6\n"
        "gpu,gpu,1\n"
    )
    (ROOT / "edge_soc" / "platform.csv").write_text(text)


def write_profiles():
    rows = []
    for s in SEQ_LENS:
        for k in range(1, 7):
            rows.append(("target", "cpu", k, "w8a8", s, scale(TARGET_CPU[k], s, 0.85, 0.15)))
            rows.append(("drafter", "cpu", k, "fp16", s, scale(DRAFTER_CPU[k], s, 0.8, 0.2)))
        rows.append(("drafter", "gpu", 1, "fp16", s, scale(DRAFTER_GPU, s, 0.6, 0.4)))
        rows.append(("target", "gpu", 1, "fp32", s, scale(TARGET_GPU, s, 0.85, 0.15)))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[4]))
    lines = ["#specmap profiles v1", "model_role,unit_id,allocation,quantization,seq_len,latency_ms"]
    for r in rows:
        lines.append(f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]},{r[5]:g}")
    (ROOT / "edge_soc" / "profiles.csv").write_text("\n".join(lines) + "\n")


def fraction_in(rng, lo, hi):
    """accepted/drafted with lo <= ratio <= hi."""
    while True:
        drafted = rng.randint(20, 120)
        accepted = rng.randint(max(0, math.floor(lo * drafted)), min(drafted, math.ceil(hi * drafted)))
        if lo <= accepted / drafted <= hi:
            return drafted, accepted


def pinned_translation(rng, median, p90, low, high):
    """81 samples whose sorted positions 40 and 72 are exactly median and p90."""
    samples = [(100, round(median * 100)), (100, round(p90 * 100))]
    samples += [fraction_in(rng, low, median) for _ in range(40)]
    samples += [fraction_in(rng, median, p90) for _ in range(31)]
    samples += [fraction_in(rng, p90, high) for _ in range(8)]
    rng.shuffle(samples)
    return samples


def write_traces():
    rng = random.Random(20251016)
    configs = {
        # drafter/target quantization: (median, p90, low, high) for translation
        "fp16/fp16": (0.58, 0.97, 0.05, 1.0),
        "fp16/w8a8": (0.17, 0.90, 0.0, 1.0),
        "w8a8/w8a8": (0.02, 0.15, 0.0, 0.5),
    }
    other_tasks = ["multi_turn", "summarization", "qa", "math_reasoning", "rag"]
    spread = {"fp16/fp16": (0.2, 0.95), "fp16/w8a8": (0.0, 0.7), "w8a8/w8a8": (0.0, 0.12)}
    lines = ["#specmap traces v1", "task,sample_id,config,drafted,accepted"]
    for config, (median, p90, low, high) in configs.items():
        for i, (d, a) in enumerate(pinned_translation(rng, median, p90, low, high)):
            lines.append(f"translation,translation-{i:03d},{config},{d},{a}")
        lo, hi = spread[config]
        for task in other_tasks:
            for i in range(80):
                d, a = fraction_in(rng, lo, hi)
                lines.append(f"{task},{task}-{i:03d},{config},{d},{a}")
    (ROOT / "edge_soc" / "traces.csv").write_text("\n".join(lines) + "\n")


def write_toy():
    draft = "#specmap markov v1\n0.5 0.3 0.2\n0.2 0.5 0.3\n0.3 0.3 0.4\n"
    target = "#specmap markov v1\n0.6 0.2 0.2\n0.1 0.7 0.2\n0.25 0.25 0.5\n"
    (ROOT / "toy" / "draft.txt").write_text(draft)
    (ROOT / "toy" / "target.txt").write_text(target)


def main():
    (ROOT / "edge_soc").mkdir(parents=True, exist_ok=True)
    (ROOT / "toy").mkdir(parents=True, exist_ok=True)
    write_platform()
    write_profiles()
    write_traces()
    write_toy()


if __name__ == "__main__":
    main()
