"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Times each kernel on agent-sized inputs, then one full replay update
(forward, backward, Adam) with each backend swapped in.
"""

import argparse
import timeit

import numpy as np

from dqnfraud import _backend, _pykernels
from dqnfraud import neuralnet
from dqnfraud.agent import AgentConfig, DqnAgent


def kernel_cases(rng):
    n_params = 33 * 128 + 129 * 128 + 129 * 2  # [32, 128, 128, 2]
    params = rng.normal(size=n_params)
    grads = rng.normal(size=n_params) * 1e-3
    m = np.zeros(n_params)
    v = np.zeros(n_params)
    pred = rng.normal(size=32)
    target = rng.normal(size=32)
    actions = rng.integers(0, 2, 50000)
    labels = (rng.random(50000) < 0.02).astype(np.int64)
    return {
        "adam_update (18.9k params)": lambda k: k.adam_update(params, grads, m, v, 0.005, 0.9, 0.999, 1e-8, 0.1, 0.001),
        "huber (batch 32)": lambda k: k.huber(pred, target, 1.0),
        "rolling_rates (50k, k=4000)": lambda k: k.rolling_rates(actions, labels, 4000, 500, False),
    }


def replay_step(kern, rng):
    agent = DqnAgent(32, AgentConfig(), seed=0)
    for _ in range(64):
        agent.memory.push(rng.normal(size=32), int(rng.integers(2)), float(rng.normal()), rng.normal(size=32), False)
    saved = neuralnet._backend
    neuralnet._backend = kern

    def step():
        agent.replay_update()

    try:
        step()
        return step, lambda: setattr(neuralnet, "_backend", saved)
    except Exception:
        neuralnet._backend = saved
        raise


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e6


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)]
    if _backend.BACKEND == "cython":
        backends.insert(0, ("cython", _backend.kernels))
    else:
        print("compiled kernels unavailable; timing the fallback only")

    print(f"{'case':34s}" + "".join(f"{name:>14s}" for name, _ in backends) + "   speedup")
    for label, fn in kernel_cases(rng).items():
        times = [best_of(lambda: fn(k), args.repeat) for _, k in backends]
        ratio = f"{times[-1] / times[0]:8.1f}x" if len(times) == 2 else ""
        print(f"{label:34s}" + "".join(f"{t:12.1f}us" for t in times) + "  " + ratio)

    times = []
    for _, k in backends:
        step, restore = replay_step(k, np.random.default_rng(1))
        try:
            times.append(best_of(step, args.repeat))
        finally:
            restore()
    ratio = f"{times[-1] / times[0]:8.1f}x" if len(times) == 2 else ""
    print(f"{'replay update [32,128,128,2]':34s}" + "".join(f"{t:12.1f}us" for t in times) + "  " + ratio)


if __name__ == "__main__":
    main()
