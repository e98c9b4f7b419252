"""End-to-end orchestration: simulate or ingest shots, reconstruct, measure,
filter, and compute the minimal partitions, with deterministic reports.

A single master seed reproduces a whole run: it fans out to the state
seed and the shot-sampling seed via (seed, role, index) derivation. Null
distributions deliberately use an independent seed (default 0) so their
cache stays warm across master seeds; spurious-entanglement statistics
are a property of the estimator, not of the experiment's randomness.

report.json and minimal.json depend only on (config, seeds): floats are
serialized by repr and all containers are canonically ordered, so two
runs with the same inputs produce byte-identical files regardless of
worker count. Wall-clock timings go to a separate timing.json.
"""

import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._seeds import RNG_FAMILY, derive_seed
from .filtering import MissingNullError, NullStore, filter_observations, standard_keys
from .measures import measure_all
from .partitions import (Constraint, allowed_poset, minimal_partitions, prune_redundant,
                         render_partition)
from .povm import ShotRecord, load_shots, sample_shots, save_shots
from .qmath import (DensityMatrix, PureState, bell_state, classically_correlated_state,
                    depolarize, fidelity, ginibre_random_state, partial_trace, smolin_state,
                    w_state)
from .tomography import MLE_BACKEND, MleConfig, reconstruct_all_rdms


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


class MissingInputError(RuntimeError):
    """A required input (shot file, null cache) is absent (CLI exit code 3)."""


DEFAULT_NULL_SEED = 0


@dataclass(frozen=True)
class PipelineConfig:
    state: str | None = None           # named state spec for simulation
    shot_file: str | None = None
    n_shots: int = 163840
    k_max: int = 2
    noise_p: float = 0.0
    p_thr: float = 0.05
    n_null_samples: int = 10_000
    null_seed: int = DEFAULT_NULL_SEED
    seed: int = 0                      # master seed (state + sampling)
    out_dir: str = "runs"
    null_cache_dir: str | None = None
    workers: int = 1
    build_missing_nulls: bool = True
    mle: MleConfig = field(default_factory=MleConfig)

    def __post_init__(self):
        if not 2 <= self.k_max <= 4:
            raise ConfigError(f"k_max must lie in [2, 4], got {self.k_max}")
        if self.n_shots < 1:
            raise ConfigError(f"n_shots must be positive, got {self.n_shots}")
        if not 0.0 < self.p_thr < 1.0:
            raise ConfigError(f"p_thr must lie in (0, 1), got {self.p_thr}")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ConfigError(f"noise_p must lie in [0, 1], got {self.noise_p}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


def resolve_state(spec: str, state_seed: int) -> DensityMatrix:
    """Build the named state: smolin | w:N | bell | product:N | cc:rhoX | ginibre:DIM:RANK."""
    name, _, args = spec.partition(":")
    try:
        if name == "smolin" and not args:
            return smolin_state()
        if name == "bell" and not args:
            return bell_state(0).density_matrix((1, 2))
        if name == "w":
            return w_state(int(args)).density_matrix()
        if name == "product":
            n = int(args)
            if n < 1:
                raise ConfigError("product register needs at least one qubit")
            amp = np.zeros(2**n, dtype=complex)
            amp[0] = 1.0
            return PureState(amp).density_matrix()
        if name == "cc":
            return classically_correlated_state(args)
        if name == "ginibre":
            dim_s, _, rank_s = args.partition(":")
            return ginibre_random_state(int(dim_s), int(rank_s), state_seed)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad state spec {spec!r}: {exc}") from exc
    raise ConfigError(
        f"unknown state {spec!r}; expected smolin, bell, w:N, product:N, "
        f"cc:rho1|rho2|rho3 or ginibre:DIM:RANK"
    )


def simulate(config: PipelineConfig, path=None, jobs: int = 1) -> ShotRecord:
    """Sample shots for the configured state and write the shot file.

    With jobs > 1 the record is additionally split into consecutive
    per-job files (path.job000 ...) whose concatenation is the single
    stream; the combined file is always written.
    """
    if not config.state:
        raise ConfigError("simulate needs a --state")
    state_seed = derive_seed(config.seed, "state")
    rho = resolve_state(config.state, state_seed)
    if config.noise_p > 0:
        rho = depolarize(rho, config.noise_p)
    record = sample_shots(rho, config.n_shots, derive_seed(config.seed, "sampling"))
    record.metadata.update({
        "source": config.state,
        "noise_p": repr(config.noise_p),
        "master_seed": str(config.seed),
    })
    if path is not None:
        save_shots(record, path)
        if jobs > 1:
            bounds = np.linspace(0, record.n_shots, jobs + 1).astype(int)
            for j in range(jobs):
                part = ShotRecord(record.shots[bounds[j]:bounds[j + 1]], dict(record.metadata))
                part.metadata["job"] = str(j)
                save_shots(part, f"{path}.job{j:03d}")
    return record


def truth_from_metadata(meta: dict) -> DensityMatrix | None:
    """Rebuild the simulated state named in shot metadata, if any."""
    spec = meta.get("source")
    if not spec:
        return None
    try:
        master = int(meta.get("master_seed", "0"))
        rho = resolve_state(spec, derive_seed(master, "state"))
        noise_p = float(meta.get("noise_p", "0"))
        if noise_p > 0:
            rho = depolarize(rho, noise_p)
        return rho
    except (ConfigError, ValueError):
        return None


def _needed_keys(n_parties: int, k_max: int, m_shots: int):
    return standard_keys(m_shots, k_max=min(k_max, n_parties))


def gather_nulls(config: PipelineConfig, n_parties: int, m_shots: int) -> tuple:
    """Load (or build) every null distribution the analysis will consult."""
    cache_dir = config.null_cache_dir or os.path.join(config.out_dir, "nulls")
    store = NullStore(cache_dir)
    nulls = {}
    for key in _needed_keys(n_parties, config.k_max, m_shots):
        if config.build_missing_nulls:
            nulls[key] = store.get_or_build(
                key, config.n_null_samples, derive_seed(config.null_seed, "null", key.k),
                config.mle, workers=config.workers,
            )
        else:
            try:
                null = store[key]
            except MissingNullError as exc:
                raise MissingInputError(
                    f"{exc}; run 'sepstruct build-nulls --shots {m_shots}' "
                    f"with --null-cache-dir {cache_dir}"
                ) from exc
            nulls[key] = null
    return store, nulls


def _config_echo(config: PipelineConfig) -> dict:
    return asdict(config)


def config_from_dict(echo: dict) -> PipelineConfig:
    """Inverse of the report's config echo."""
    echo = dict(echo)
    echo["mle"] = MleConfig(**echo["mle"])
    return PipelineConfig(**echo)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_ready(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def analyze(config: PipelineConfig) -> dict:
    """Run the five-step pipeline on an existing shot file and write reports.

    Returns the report dict; side effects are report.json, minimal.json,
    poset.dot (registers of at most 5 parties) and timing.json in the
    output directory.
    """
    if not config.shot_file:
        raise ConfigError("analyze needs a --shot-file")
    if not os.path.exists(config.shot_file):
        raise MissingInputError(f"shot file {config.shot_file!r} does not exist")
    os.makedirs(config.out_dir, exist_ok=True)
    timings = {}

    t0 = time.perf_counter()
    record = load_shots(config.shot_file)
    n = record.n_parties
    m_shots = record.n_shots
    timings["load_shots"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    _, nulls = gather_nulls(config, n, m_shots)
    timings["nulls"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rdms = reconstruct_all_rdms(record, min(config.k_max, n), config.mle, workers=config.workers)
    timings["reconstruction"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    values = measure_all({s: r.rho_hat for s, r in rdms.items()})
    observations = filter_observations(values, nulls, config.p_thr, m_shots)
    timings["measures"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    constraints = [
        Constraint(o.bipartition.block_a, o.bipartition.block_b, provenance=o)
        for o in observations if o.significant
    ]
    kept = prune_redundant(constraints)
    kept_ids = {(c.z1, c.z2) for c in kept}
    mset = minimal_partitions(n, constraints)
    timings["partitions"] = time.perf_counter() - t0

    truth = truth_from_metadata(record.metadata)
    rdm_diagnostics = []
    for subset in sorted(rdms, key=lambda s: (len(s), s)):
        res = rdms[subset]
        entry = {
            "subset": list(subset),
            "iterations": res.iterations_used,
            "converged": res.converged,
            "log_likelihood": float(res.log_likelihood_trace[-1]),
        }
        if truth is not None:
            entry["fidelity_to_truth"] = fidelity(res.rho_hat, partial_trace(truth, subset))
        rdm_diagnostics.append(entry)

    report = {
        "config": _config_echo(config),
        "register": {"n_parties": n, "labels": list(range(1, n + 1)), "m_shots": m_shots},
        "backend": {"mle_kernel": MLE_BACKEND, "rng": RNG_FAMILY},
        "shot_metadata": dict(sorted(record.metadata.items())),
        "rdms": rdm_diagnostics,
        "observations": [
            {
                "subsystem": list(o.subsystem),
                "block_a": list(o.bipartition.block_a),
                "block_b": list(o.bipartition.block_b),
                "kind": o.kind,
                "value": o.value,
                "p_value": o.p_value,
                "significant": o.significant,
            }
            for o in observations
        ],
        "constraints": {
            "kept": [_constraint_entry(c) for c in kept],
            "pruned": [
                _constraint_entry(c) for c in sorted(
                    (c for c in constraints if (c.z1, c.z2) not in kept_ids),
                    key=lambda c: (len(c.z1) + len(c.z2), c.z1, c.z2),
                )
            ],
        },
        "minimal_partitions": [[list(b) for b in p.blocks] for p in mset],
        "minimal_rendered": [render_partition(p) for p in mset],
        "antichain_size_trace": list(mset.size_trace),
        "null_keys": [str(k) for k in sorted(nulls, key=lambda k: (k.k, k.shape))],
    }

    report_path = os.path.join(config.out_dir, "report.json")
    dump_json(report, report_path)
    dump_json({
        "labels": list(range(1, n + 1)),
        "partitions": [[list(b) for b in p.blocks] for p in mset],
        "constraints": [_constraint_entry(c) for c in kept],
    }, os.path.join(config.out_dir, "minimal.json"))
    if n <= 5:
        view = allowed_poset(n, constraints)
        with open(os.path.join(config.out_dir, "poset.dot"), "w", encoding="utf-8") as fh:
            fh.write(view.to_dot())
    dump_json({"seconds": timings}, os.path.join(config.out_dir, "timing.json"))
    return report


def _constraint_entry(c: Constraint) -> dict:
    entry = {"z1": list(c.z1), "z2": list(c.z2)}
    o = c.provenance
    if o is not None:
        entry["kind"] = o.kind
        entry["subsystem"] = list(o.subsystem)
        entry["value"] = o.value
        entry["p_value"] = o.p_value
    return entry


def build_standard_nulls(config: PipelineConfig) -> dict:
    """Build (or load) the four standard null caches at the configured shot count."""
    cache_dir = config.null_cache_dir or os.path.join(config.out_dir, "nulls")
    store = NullStore(cache_dir)
    out = {}
    for key in standard_keys(config.n_shots, k_max=4):
        null = store.get_or_build(
            key, config.n_null_samples, derive_seed(config.null_seed, "null", key.k),
            config.mle, workers=config.workers,
        )
        out[key] = null
    return out


def summarize_report(report: dict) -> str:
    """Human-readable digest of a report dict."""
    lines = []
    reg = report["register"]
    lines.append(
        f"register of {reg['n_parties']} parties, M={reg['m_shots']} shots, "
        f"p_thr={report['config']['p_thr']}"
    )
    significant = [o for o in report["observations"] if o["significant"]]
    lines.append(f"significant observations: {len(significant)} of {len(report['observations'])}")
    for o in significant:
        cut = "{" + ",".join(map(str, o["block_a"])) + "}|{" + ",".join(map(str, o["block_b"])) + "}"
        lines.append(f"  {o['kind']:<11} {cut:<22} value={o['value']:.5f}  p={o['p_value']:.2e}")
    pruned = report["constraints"]["pruned"]
    if pruned:
        lines.append("pruned as implied by smaller constraints:")
        for c in pruned:
            cut = "{" + ",".join(map(str, c["z1"])) + "}|{" + ",".join(map(str, c["z2"])) + "}"
            lines.append(f"  {c.get('kind', '?'):<11} {cut}")
    rendered = report["minimal_rendered"]
    lines.append("minimal: " + ", ".join(rendered))
    return "\n".join(lines)
