"""Compare the compiled reconstruction kernel against the numpy fallback.

Runs the same reconstructions through both backends and reports time per
iteration plus the agreement of the final states. Run with

    python benchmarks/bench_mle.py
"""

import importlib
import time

import numpy as np

from sepstruct import _mle_py
from sepstruct.povm import joint_distribution, joint_effects
from sepstruct.qmath import classically_correlated_state, smolin_state

try:
    from sepstruct import _mle_cy
except ImportError:
    _mle_cy = None

CASES = [
    ("rho1  (k=2)", classically_correlated_state("rho1"), 163840),
    ("rho2  (k=3)", classically_correlated_state("rho2"), 163840),
    ("rho3  (k=4)", classically_correlated_state("rho3"), 163840),
    ("smolin (k=4)", smolin_state(), 163840),
]

MLE_ARGS = dict(epsilon=0.5, max_iters=5000, tol_per_shot=1e-9, prob_floor=1e-12)


def run(backend, packed, freqs, d, repeats):
    rho0 = np.eye(d, dtype=complex) / d
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        rho, trace, converged = backend.run_mle(packed, freqs, rho0, **MLE_ARGS)
        best = min(best, time.perf_counter() - t0)
    iters = len(trace) - 1
    return rho, trace, converged, iters, best


def main():
    rng = np.random.Generator(np.random.PCG64(0))
    print(f"{'case':<14} {'iters':>6} {'python':>12} {'cython':>12} {'speedup':>8}   agreement")
    for name, state, m_shots in CASES:
        effects = joint_effects(state.labels)
        packed = _mle_py.pack_effects(effects.matrices)
        freqs = rng.multinomial(m_shots, joint_distribution(state)).astype(float)
        d = state.dim
        repeats = 3 if d <= 8 else 1
        rho_py, trace_py, _, iters, t_py = run(_mle_py, packed, freqs, d, repeats)
        if _mle_cy is None:
            print(f"{name:<14} {iters:>6} {t_py:>10.3f} s {'n/a':>12}")
            continue
        rho_cy, trace_cy, _, iters_cy, t_cy = run(_mle_cy, packed, freqs, d, repeats)
        agreement = np.abs(rho_py - rho_cy).max()
        print(
            f"{name:<14} {iters:>6} {1e6 * t_py / iters:>9.2f} us {1e6 * t_cy / iters_cy:>9.2f} us "
            f"{t_py / t_cy:>7.1f}x   max|drho|={agreement:.2e} (iters {iters} vs {iters_cy})"
        )
    if _mle_cy is None:
        print("compiled kernel not built; install with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
