"""Time the compiled and pure-Python orthant kernels against each other.

Run ``python3 benchmarks/bench_kernels.py``.  For each workload the script
reports the median wall time per call for every available backend, the
speedup of the compiled kernel and the largest difference between the
backends' results.
"""

import argparse
import statistics
import timeit

import numpy as np

from selbias import ModelParams, available_backends, selection_bias, using_backend
from selbias.mvn import mvn_cdf_equicorr


def _random_cdf_calls(n_calls, dim, seed):
    rng = np.random.default_rng(seed)
    calls = []
    for _ in range(n_calls):
        c, d = rng.uniform(0.3, 3.0), rng.uniform(0.0, 3.0)
        upper = rng.uniform(-1.0, 2.5, dim) * np.sqrt(c + d)
        calls.append((c, d, upper))
    return calls


def workloads(seed):
    ref_params = ModelParams.from_squares(10, 0.5, 1.0, 2.0)
    grid = np.linspace(-1.0, 6.0, 15)
    cdf5 = _random_cdf_calls(20, 5, seed)
    cdf20 = _random_cdf_calls(20, 20, seed + 1)
    return {
        "orthant, 20 calls, n=5 distinct bounds": lambda: [
            mvn_cdf_equicorr(5, 0.0, c, d, u) for c, d, u in cdf5],
        "orthant, 20 calls, n=20 distinct bounds": lambda: [
            mvn_cdf_equicorr(20, 0.0, c, d, u) for c, d, u in cdf20],
        "bias at 15 winner values, p=10": lambda: [
            selection_bias(ref_params, x).delta for x in grid],
    }


def time_call(fn, repeat, number):
    times = timeit.repeat(fn, repeat=repeat, number=number)
    return statistics.median(times) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    parser.add_argument("--number", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernel not built; timing the Python kernel only")
    for name, fn in workloads(args.seed).items():
        timings, outputs = {}, {}
        for backend in backends:
            with using_backend(backend):
                outputs[backend] = np.asarray(fn())
                timings[backend] = time_call(fn, args.repeat, args.number)
        cells = "  ".join(f"{b}={t * 1e3:8.3f} ms" for b, t in timings.items())
        line = f"{name:42s} {cells}"
        if len(timings) == 2:
            speedup = timings["python"] / timings["compiled"]
            diff = np.max(np.abs(outputs["python"] - outputs["compiled"]))
            line += f"  speedup {speedup:5.1f}x  max |diff| {diff:.1e}"
        print(line)


if __name__ == "__main__":
    main()
