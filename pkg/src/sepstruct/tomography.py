"""Maximum-likelihood reconstruction of subsystem states from outcome counts.

The estimator is the diluted fixed-point iteration
rho <- N[(I + eps R) rho (I + eps R)],  R = (1/M) sum_m f_m / Tr[rho Pi_m] Pi_m,
started from the maximally mixed state. Small eps guarantees likelihood
ascent; a step that would decrease the log-likelihood retries with eps
halved (the configured eps is restored for the next iteration).

The inner loop runs in a compiled extension when available and falls
back to a numpy implementation otherwise; set SEPSTRUCT_MLE_BACKEND to
"python" or "cython" to force one. Both produce the same iteration, so
results agree to floating-point reordering error.
"""

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _mle_py
from .povm import EffectSet, OutcomeCounts, ShotRecord, joint_effects, marginalize
from .qmath import DensityMatrix, make_physical


def _load_backend():
    choice = os.environ.get("SEPSTRUCT_MLE_BACKEND", "auto")
    if choice == "python":
        return _mle_py
    try:
        from . import _mle_cy

        return _mle_cy
    except ImportError:
        if choice == "cython":
            raise ImportError("compiled kernel requested but sepstruct._mle_cy is not built")
        return _mle_py


_kernel = _load_backend()
MLE_BACKEND = _kernel.BACKEND


@dataclass(frozen=True)
class MleConfig:
    """Free parameters of the reconstruction.

    convergence_tol is the per-shot log-likelihood gain (gain divided by
    the number of copies M) below which the iteration stops; the raw
    log-likelihood scales linearly with M, so an absolute threshold
    would mean different things at different shot counts.
    """

    max_iters: int = 5000
    dilution: float = 0.5
    convergence_tol: float = 1e-9
    prob_floor: float = 1e-12

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.dilution <= 1.0:
            raise ValueError("dilution must lie in (0, 1]")
        if self.convergence_tol <= 0 or self.prob_floor <= 0:
            raise ValueError("tolerances must be positive")

    def digest(self) -> str:
        """Short stable hash identifying this configuration in caches and reports."""
        text = f"{self.max_iters}:{self.dilution!r}:{self.convergence_tol!r}:{self.prob_floor!r}"
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class MleResult:
    rho_hat: DensityMatrix
    log_likelihood_trace: np.ndarray
    iterations_used: int
    converged: bool


def _packed_effects(effects: EffectSet) -> np.ndarray:
    return _mle_py.pack_effects(effects.matrices)


def log_likelihood(rho: DensityMatrix, counts: OutcomeCounts, effects: EffectSet,
                   prob_floor: float = 1e-12) -> float:
    """sum_m f_m ln max(Tr[rho Pi_m], prob_floor)."""
    if rho.dim != effects.dim:
        raise ValueError(f"state dim {rho.dim} does not match effect dim {effects.dim}")
    if counts.counts.shape[0] != effects.matrices.shape[0]:
        raise ValueError("count vector length does not match effect count")
    p = np.einsum("mij,ji->m", effects.matrices, rho.entries).real
    f = counts.counts.astype(float)
    return float(f @ np.log(np.maximum(p, prob_floor)))


def reconstruct(counts: OutcomeCounts, effects: EffectSet, cfg: MleConfig | None = None,
                initial_state: DensityMatrix | None = None) -> MleResult:
    """Maximum-likelihood state for the observed counts.

    Starts from the maximally mixed state unless ``initial_state`` is
    given. The returned state is hermitized, clipped to the PSD cone and
    renormalized, and carries the parties of ``counts`` as labels.
    """
    cfg = cfg or MleConfig()
    if counts.total < 1:
        raise ValueError("counts are empty; nothing to reconstruct from")
    if counts.counts.shape[0] != effects.matrices.shape[0]:
        raise ValueError("count vector length does not match effect count")
    d = effects.dim
    rho0 = np.eye(d, dtype=complex) / d if initial_state is None else initial_state.entries
    rho, trace, converged = _kernel.run_mle(
        _packed_effects(effects), counts.counts.astype(float),
        np.asarray(rho0, dtype=complex),
        cfg.dilution, cfg.max_iters, cfg.convergence_tol, cfg.prob_floor,
    )
    if not np.isfinite(trace).all():
        raise ArithmeticError("non-finite log-likelihood during reconstruction")
    return MleResult(
        rho_hat=make_physical(rho, counts.parties),
        log_likelihood_trace=trace,
        iterations_used=len(trace) - 1,
        converged=converged,
    )


def subsystems(n_parties: int, k_max: int):
    """All party subsets of size 2..k_max of the register 1..n, sorted by size then lex."""
    if not 2 <= k_max <= 4:
        raise ValueError(f"k_max must lie in [2, 4], got {k_max}")
    subsets = []
    for k in range(2, min(k_max, n_parties) + 1):
        subsets.extend(combinations(range(1, n_parties + 1), k))
    return subsets


def _reconstruct_subset(args):
    subset, counts_vec, cfg = args
    counts = OutcomeCounts(subset, counts_vec)
    return subset, reconstruct(counts, joint_effects(subset), cfg)


def reconstruct_all_rdms(record: ShotRecord, k_max: int, cfg: MleConfig | None = None,
                         workers: int = 1) -> dict:
    """One MleResult per subsystem of size 2..k_max, from its marginalized counts.

    Subsystem reconstructions are independent; with workers > 1 they fan
    out over a process pool. The result is keyed and ordered by subset,
    so the output does not depend on the worker count.
    """
    cfg = cfg or MleConfig()
    tasks = [(s, marginalize(record, s).counts, cfg) for s in subsystems(record.n_parties, k_max)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_reconstruct_subset, tasks, chunksize=1))
    else:
        results = [_reconstruct_subset(t) for t in tasks]
    return dict(results)
