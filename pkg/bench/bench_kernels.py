"""Time each hot kernel under the compiled and the pure-Python backend.

    python3 bench/bench_kernels.py [--repeat 7] [--json out.json]

Inputs are sized like one tick of real work: 4096-sample PD segments through
the wavelet and peak kernels, a 10 s window of 1 ms occurrence bins for the ACF, and a
2 km DTS frame for the Kalman update.
"""

import argparse
import json
import timeit

import numpy as np

from cablemon import kernels
from cablemon.dsp.wavelet import DB4_HI, DB4_LO


def workloads(rng):
    segments = rng.normal(size=(32, 4096))
    coeffs = [kernels.dwt_step(segments, DB4_LO, DB4_HI)]
    trace = np.abs(rng.normal(size=200_000))
    trace[rng.integers(0, trace.size, 400)] += 20.0
    peaks = kernels.find_peaks(trace, 6.0, 50)
    train = (rng.random(10_000) < 0.005).astype(np.float64)
    n = 4000
    est, var = rng.normal(30, 1, n), np.full(n, 0.2)
    z, pred = est + rng.normal(0, 1, n), est.copy()
    return {
        "dwt_step": lambda k: k.dwt_step(segments, DB4_LO, DB4_HI),
        "idwt_step": lambda k: k.idwt_step(*coeffs[0], DB4_LO, DB4_HI),
        "find_peaks": lambda k: k.find_peaks(trace, 6.0, 50),
        "half_widths": lambda k: k.half_widths(trace, peaks),
        "occurrence_acf": lambda k: k.occurrence_acf(train, train.size - 1),
        "kalman_step": lambda k: k.kalman_step(est, var, z, pred, 0.05, 1.0, 5.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args()

    backends = kernels.backends()
    jobs = workloads(np.random.default_rng(0))
    rows = {}
    print(f"{'kernel':<16}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for name, job in jobs.items():
        best = {}
        for backend, mod in backends.items():
            timer = timeit.Timer(lambda: job(mod))
            loops, _ = timer.autorange()
            best[backend] = min(timer.repeat(args.repeat, loops)) / loops
        rows[name] = best
        speedup = best["python"] / best["compiled"] if "compiled" in best else float("nan")
        print(f"{name:<16}" + "".join(f"{best[b] * 1e3:>11.3f} ms" for b in backends) + f"{speedup:>9.1f}x")
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend was timed")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"backends": list(backends), "seconds": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
