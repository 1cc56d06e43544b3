"""Time forest training and prediction on the compiled and numpy kernels.

    python3 benchmarks/bench_kernels.py [--samples 10000] [--trees 20] [--repeat 3]

Both backends grow identical trees, so the script also checks that the two
forests predict the same probabilities.
"""

import argparse
import statistics
import time
from contextlib import contextmanager

import numpy as np

from steersim.config import RunConfig
from steersim.mlcore import Dataset, ForestParams, radio_matrix, radio_schema_id, train_forest
from steersim.mlcore import _kernels_py, forest
from steersim.radioenv import calibrate_environment, gen_radio_samples


@contextmanager
def backend(module):
    saved = forest.kernels
    forest.kernels = module
    try:
        yield
    finally:
        forest.kernels = saved


def timed(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--trees", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    try:
        from steersim.mlcore import _kernels as compiled
    except ImportError:
        raise SystemExit("compiled kernels not built; run `pip install --no-build-isolation -e .` first")

    env = calibrate_environment(RunConfig.from_dict({}).env)
    samples = gen_radio_samples(env, args.samples)
    X = radio_matrix(samples)
    data = Dataset(X, np.array([s.covered for s in samples]), radio_schema_id(len(samples[0].primary_rsrp)))
    params = ForestParams(n_trees=args.trees, seed=1)

    rows, preds = [], {}
    for name, module in (("cython", compiled), ("python", _kernels_py)):
        with backend(module):
            fit_s, model = timed(lambda: train_forest(data, params), args.repeat)
            pred_s, preds[name] = timed(lambda: model.predict_batch(X), args.repeat)
        rows.append((name, fit_s, pred_s))

    print(f"{args.samples} samples x {X.shape[1]} features, {args.trees} trees, median of {args.repeat}")
    print(f"{'backend':<8} {'train s':>9} {'predict s':>10}")
    for name, fit_s, pred_s in rows:
        print(f"{name:<8} {fit_s:>9.3f} {pred_s:>10.3f}")
    (_, fc, pc), (_, fp, pp) = rows
    print(f"speed-up  {fp / fc:>8.1f}x {pp / pc:>9.1f}x")
    print("identical predictions:", bool(np.array_equal(preds["cython"], preds["python"])))


if __name__ == "__main__":
    main()
