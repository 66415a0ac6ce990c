"""Compare the compiled and NumPy kernel backends on synthetic score columns.

    python benchmarks/bench_kernels.py [--columns 2000] [--frames 156] [--repeat 5]
"""
import argparse
import math
import time

import numpy as np

from sebbkit import kernels
from sebbkit.synth import SynthSpec, generate


def columns(n, frames, seed):
    spec = SynthSpec(clips=math.ceil(n / 10), classes=10, clip_duration_s=frames * 0.064,
                     events_per_class=(0, 2), event_duration_s=(0.3, min(3.0, frames * 0.064 / 3)),
                     min_gap_s=0.3, noise_level=0.1, seed=seed)
    ms, _ = generate(spec)
    return [m.scores[:, c].copy() for m in ms for c in range(m.n_classes)][:n]


def run(backend, cols, h, repeat):
    pad = h + 1
    padded = [np.pad(s, pad, mode="edge") for s in cols]
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for sp, s in zip(padded, cols):
            backend.decode_column(sp, h, pad, s.shape[0], 2.0, math.nan, True, 1e-9, 1e-8)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--columns", type=int, default=2000)
    ap.add_argument("--frames", type=int, default=156)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cols = columns(args.columns, args.frames, args.seed)
    names = sorted(kernels.BACKENDS)
    print(f"{len(cols)} columns x {args.frames} frames, best of {args.repeat}")
    print(f"{'h':>3} " + " ".join(f"{n:>12}" for n in names) + "  speedup")
    for h in (3, 4, 5, 6):
        times = {n: run(kernels.BACKENDS[n], cols, h, args.repeat) for n in names}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{h:>3} " + " ".join(f"{times[n] * 1e3:>10.1f}ms" for n in names) + f"  {speed:6.1f}x")


if __name__ == "__main__":
    main()
