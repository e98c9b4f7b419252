"""Monte-Carlo null distributions of spurious entanglement and p-value filtering.

Finite statistics make reconstructed states of even separable systems
show small non-zero concurrence or negativity. The filter simulates the
full noiseless pipeline (sample -> reconstruct -> measure) on highly
correlated separable reference states, at the same shot count and with
the same estimator configuration as the experiment, and keeps only the
observations whose value is improbably large under that null.

Null distributions are keyed by (measure kind, subsystem size,
bipartition shape, shot count). A null is only valid at the shot count
it was generated for; lookups at a different M fail rather than reuse a
nearby cache. Samples are generated with one derived seed per pipeline
pass, so the distribution is identical for any worker count, and are
persisted as sorted decimal text with a header identifying the key,
seed and estimator configuration.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._seeds import RNG_FAMILY, derive_seed
from .measures import Bipartition, MeasureValue, bipartitions_of_shape, concurrence, negativity
from .povm import OutcomeCounts, joint_distribution, joint_effects
from .qmath import classically_correlated_state
from .tomography import MleConfig, reconstruct


class MissingNullError(KeyError):
    """No null distribution is available for a key the data requires."""

    def __init__(self, key):
        super().__init__(str(key))
        self.key = key

    def __str__(self):
        return (
            f"no null distribution for {self.key}; build one at this shot count "
            f"(nulls are not reused across shot counts)"
        )


@dataclass(frozen=True)
class NullKey:
    kind: str
    k: int
    shape: tuple
    m_shots: int

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(sorted(self.shape)))
        if self.kind not in ("concurrence", "negativity"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if sum(self.shape) != self.k:
            raise ValueError(f"shape {self.shape} does not split {self.k} parties")

    def tag(self) -> str:
        shape = "-".join(str(s) for s in self.shape)
        return f"{self.kind}_k{self.k}_s{shape}_M{self.m_shots}"

    def __str__(self):
        return f"({self.kind}, k={self.k}, shape={self.shape}, M={self.m_shots})"


# Null source states per (kind, k): the classically correlated states that
# empirically dominate the spurious-entanglement scale of separable inputs.
NULL_SOURCES = {
    ("concurrence", 2): "rho1",
    ("negativity", 3): "rho2",
    ("negativity", 4): "rho3",
}


def standard_keys(m_shots: int, k_max: int = 4) -> list:
    """The null keys an analysis with subsystems up to k_max can require."""
    keys = []
    if k_max >= 2:
        keys.append(NullKey("concurrence", 2, (1, 1), m_shots))
    if k_max >= 3:
        keys.append(NullKey("negativity", 3, (1, 2), m_shots))
    if k_max >= 4:
        keys.append(NullKey("negativity", 4, (1, 3), m_shots))
        keys.append(NullKey("negativity", 4, (2, 2), m_shots))
    return keys


def key_for(value: MeasureValue, m_shots: int) -> NullKey:
    if value.kind == "concurrence":
        return NullKey("concurrence", 2, (1, 1), m_shots)
    return NullKey("negativity", len(value.subsystem), value.bipartition.shape, m_shots)


@dataclass(eq=False)
class NullDistribution:
    key: NullKey
    samples: np.ndarray
    source_state: str
    seed: int
    mle_digest: str

    def __post_init__(self):
        samples = np.sort(np.asarray(self.samples, dtype=float))
        if samples.size == 0:
            raise ValueError("empty null distribution")
        if samples[0] < 0:
            raise ValueError("null samples must be non-negative")
        samples.setflags(write=False)
        self.samples = samples

    @property
    def n_samples(self) -> int:
        return self.samples.size


def _source_for(key: NullKey) -> str:
    try:
        return NULL_SOURCES[(key.kind, key.k)]
    except KeyError:
        raise ValueError(f"unsupported null key {key}") from None


def _null_pass(rho_labels, cum_or_p, effects, key, cfg, pass_seed):
    """One pipeline pass: multinomial counts -> reconstruction -> measure values."""
    rng = np.random.Generator(np.random.PCG64(pass_seed))
    counts = rng.multinomial(key.m_shots, cum_or_p)
    result = reconstruct(OutcomeCounts(rho_labels, counts), effects, cfg)
    if key.kind == "concurrence":
        return [concurrence(result.rho_hat)]
    cuts = bipartitions_of_shape(rho_labels, key.shape)
    return [negativity(result.rho_hat, bp) for bp in cuts]


def _null_chunk(args):
    key, cfg, seed, lo, hi = args
    state = classically_correlated_state(_source_for(key))
    effects = joint_effects(state.labels)
    p = joint_distribution(state)
    out = []
    for j in range(lo, hi):
        out.extend(_null_pass(state.labels, p, effects, key, cfg, derive_seed(seed, "null-pass", j)))
    return lo, out


def values_per_pass(key: NullKey) -> int:
    if key.kind == "concurrence":
        return 1
    return len(bipartitions_of_shape(tuple(range(1, key.k + 1)), key.shape))


def build_null(key: NullKey, n_samples: int, seed: int, cfg: MleConfig | None = None,
               workers: int = 1) -> NullDistribution:
    """Simulate the noiseless pipeline on the key's null state n_samples times.

    Each pass contributes the measure value of every bipartition of the
    key's shape (the null states are symmetric enough that same-shape
    cuts share one distribution); passes run until n_samples values are
    collected. Deterministic in (key, seed, n_samples, cfg).
    """
    cfg = cfg or MleConfig()
    if n_samples < 100:
        raise ValueError(f"need at least 100 null samples, got {n_samples}")
    vpp = values_per_pass(key)
    n_passes = math.ceil(n_samples / vpp)
    chunk = max(1, min(256, math.ceil(n_passes / max(1, 4 * workers))))
    tasks = [(key, cfg, seed, lo, min(lo + chunk, n_passes)) for lo in range(0, n_passes, chunk)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_null_chunk, tasks))
    else:
        parts = [_null_chunk(t) for t in tasks]
    values = []
    for _, chunk_values in sorted(parts):
        values.extend(chunk_values)
    return NullDistribution(key, np.array(values[:n_samples]), _source_for(key), seed, cfg.digest())


def p_value(obs_value: float, null: NullDistribution) -> float:
    """Add-one tail estimate (1 + #{samples >= value}) / (1 + n); never exactly 0."""
    n = null.n_samples
    ge = n - int(np.searchsorted(null.samples, obs_value, side="left"))
    return (1 + ge) / (1 + n)


@dataclass(frozen=True)
class EntanglementObservation:
    """A measured value with its statistical context; significant iff p < threshold."""

    subsystem: tuple
    bipartition: Bipartition
    kind: str
    value: float
    p_value: float
    significant: bool


def filter_observations(values, nulls, p_thr: float, m_shots: int) -> list:
    """Annotate each measure value with its p-value against the matching null.

    ``nulls`` maps NullKey -> NullDistribution (a NullStore works too);
    a missing key raises MissingNullError naming it. Output is sorted by
    subsystem size, then p-value, then subsystem and cut.
    """
    if not 0.0 < p_thr < 1.0:
        raise ValueError(f"p threshold must lie in (0, 1), got {p_thr}")
    out = []
    for value in values:
        key = key_for(value, m_shots)
        try:
            null = nulls[key]
        except KeyError:
            raise MissingNullError(key) from None
        p = p_value(value.value, null)
        bp = value.bipartition
        if bp is None:
            bp = Bipartition((value.subsystem[0],), (value.subsystem[1],))
        out.append(EntanglementObservation(
            subsystem=tuple(value.subsystem),
            bipartition=bp,
            kind=value.kind,
            value=value.value,
            p_value=p,
            significant=bool(p < p_thr),
        ))
    out.sort(key=lambda o: (len(o.subsystem), o.p_value, o.subsystem,
                            o.bipartition.block_a, o.bipartition.block_b))
    return out


class NullStore:
    """Directory-backed cache of null distributions, one text file per key.

    A cached file is reused only when its header matches the requested
    (seed, n_samples, estimator digest) exactly; otherwise it is rebuilt
    and overwritten.
    """

    def __init__(self, directory):
        self.directory = str(directory)
        os.makedirs(self.directory, exist_ok=True)
        self._loaded = {}

    def path_for(self, key: NullKey) -> str:
        return os.path.join(self.directory, key.tag() + ".nulls")

    def __contains__(self, key) -> bool:
        return key in self._loaded or os.path.exists(self.path_for(key))

    def __getitem__(self, key: NullKey) -> NullDistribution:
        if key not in self._loaded:
            path = self.path_for(key)
            if not os.path.exists(path):
                raise MissingNullError(key)
            self._loaded[key] = load_null(path)
        return self._loaded[key]

    def save(self, null: NullDistribution) -> str:
        path = self.path_for(null.key)
        save_null(null, path)
        self._loaded[null.key] = null
        return path

    def get_or_build(self, key: NullKey, n_samples: int, seed: int,
                     cfg: MleConfig | None = None, workers: int = 1) -> NullDistribution:
        """Return a matching cached null, or build and persist one."""
        cfg = cfg or MleConfig()
        if key in self:
            null = self[key]
            if (null.seed, null.n_samples, null.mle_digest) == (seed, n_samples, cfg.digest()):
                return null
        null = build_null(key, n_samples, seed, cfg, workers=workers)
        self.save(null)
        return null


def save_null(null: NullDistribution, path) -> None:
    key = null.key
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kind={key.kind}\n")
        fh.write(f"# k={key.k}\n")
        fh.write(f"# shape={','.join(str(s) for s in key.shape)}\n")
        fh.write(f"# m_shots={key.m_shots}\n")
        fh.write(f"# source_state={null.source_state}\n")
        fh.write(f"# seed={null.seed}\n")
        fh.write(f"# n_samples={null.n_samples}\n")
        fh.write(f"# mle_digest={null.mle_digest}\n")
        fh.write(f"# rng={RNG_FAMILY}\n")
        for v in null.samples:
            fh.write(f"{float(v):.17g}\n")


def load_null(path) -> NullDistribution:
    meta = {}
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key_val = line[1:].strip()
                if "=" in key_val:
                    k, v = key_val.split("=", 1)
                    meta[k.strip()] = v.strip()
            else:
                samples.append(float(line))
    key = NullKey(
        kind=meta["kind"],
        k=int(meta["k"]),
        shape=tuple(int(s) for s in meta["shape"].split(",")),
        m_shots=int(meta["m_shots"]),
    )
    return NullDistribution(
        key=key,
        samples=np.array(samples),
        source_state=meta["source_state"],
        seed=int(meta["seed"]),
        mle_digest=meta["mle_digest"],
    )
