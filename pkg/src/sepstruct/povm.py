"""Single-qubit SIC-POVM, joint effect sets, Born statistics and shot handling.

The measurement model is one fixed informationally complete POVM per
qubit; a joint measurement of a subsystem is the tensor product of the
single-qubit effects, with outcomes in {0,1,2,3} per party ordered
lexicographically (first party most significant).

Shot sampling draws from the exact joint outcome distribution by
inverse CDF in fixed-size chunks with per-chunk derived seeds, so the
record for a given seed is identical regardless of how the chunks are
scheduled.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._seeds import RNG_FAMILY, derive_seed
from .qmath import DensityMatrix, _freeze

MAX_JOINT_PARTIES = 6  # 4^k dense effect matrices beyond this are not materialized
MAX_SAMPLING_PARTIES = 8
SHOT_CHUNK = 65536

COMPLETENESS_ATOL = 1e-12
EFFECT_PSD_ATOL = 1e-12


class ParseError(ValueError):
    """Malformed shot file; carries the offending 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def sic_kets() -> np.ndarray:
    """The four tetrahedral kets |pi_m> with effects |pi_m><pi_m| / 2."""
    kets = [np.array([1.0, 0.0], dtype=complex)]
    for k in (1, 2, 3):
        phase = np.exp(2j * np.pi * (k - 1) / 3)
        kets.append(np.array([1.0, np.sqrt(2) * phase], dtype=complex) / np.sqrt(3))
    return np.stack(kets)


def sic_matrices() -> np.ndarray:
    kets = sic_kets()
    return np.stack([np.outer(v, v.conj()) / 2 for v in kets])


@dataclass(frozen=True, eq=False)
class EffectSet:
    """The 4^k joint effects of a k-party subsystem, in lexicographic outcome order."""

    parties: tuple
    matrices: np.ndarray

    def __post_init__(self):
        parties = tuple(self.parties)
        k = len(parties)
        d = 2**k
        mats = np.asarray(self.matrices, dtype=complex)
        if mats.shape != (4**k, d, d):
            raise ValueError(f"expected {4 ** k} effects of shape {d}x{d}, got {mats.shape}")
        if not np.allclose(mats.sum(axis=0), np.eye(d), atol=COMPLETENESS_ATOL * max(1, k), rtol=0):
            raise ValueError("effects do not sum to the identity")
        for m in mats:
            if np.linalg.eigvalsh(m).min() < -EFFECT_PSD_ATOL:
                raise ValueError("effect with negative eigenvalue")
        object.__setattr__(self, "parties", parties)
        object.__setattr__(self, "matrices", _freeze(mats))

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def outcomes(self) -> list:
        return list(itertools.product(range(4), repeat=self.n_parties))


def sic_effects(label=0) -> EffectSet:
    """The single-qubit SIC-POVM as an EffectSet."""
    return EffectSet((label,), sic_matrices())


def joint_effects(subset) -> EffectSet:
    """Tensor-product effects for the given parties, outcome tuples lexicographic."""
    subset = tuple(subset)
    if not subset:
        raise ValueError("joint effects need at least one party")
    if len(subset) > MAX_JOINT_PARTIES:
        raise ValueError(
            f"{len(subset)} parties means {4 ** len(subset)} dense effect matrices; "
            f"the materialization ceiling is {MAX_JOINT_PARTIES} parties"
        )
    mats = sic_matrices()
    for _ in range(len(subset) - 1):
        d = mats.shape[1]
        mats = np.einsum("aij,bkl->abikjl", mats, sic_matrices()).reshape(-1, 2 * d, 2 * d)
    return EffectSet(subset, mats)


def born_probabilities(rho: DensityMatrix, effects: EffectSet) -> np.ndarray:
    """Outcome probabilities Tr[rho Pi_m], clipped at 0 against round-off."""
    if rho.dim != effects.dim:
        raise ValueError(f"state dim {rho.dim} does not match effect dim {effects.dim}")
    p = np.einsum("mij,ji->m", effects.matrices, rho.entries).real
    if p.min() < -EFFECT_PSD_ATOL:
        raise ValueError(f"negative probability {p.min()}")
    p = np.clip(p, 0.0, None)
    if abs(p.sum() - 1.0) > 1e-10:
        raise ValueError(f"probabilities sum to {p.sum()}")
    return p


def joint_distribution(rho: DensityMatrix) -> np.ndarray:
    """Full-register outcome distribution, flattened lexicographically.

    Contracts the state tensor with one single-qubit effect tensor per
    party, which avoids materializing the 4^n joint effects and is exact
    for arbitrary (non-product) states.
    """
    n = rho.n_parties
    if n > MAX_SAMPLING_PARTIES:
        raise ValueError(f"dense sampling is capped at {MAX_SAMPLING_PARTIES} qubits, got {n}")
    e = sic_matrices()
    t = rho.entries.reshape((2,) * (2 * n))
    # Tr[rho (Pi_m0 x ... )] contracts each party's (ket, bra) axis pair with
    # Pi_m[bra, ket]; after contracting party s those axes sit at 0 and n - s.
    for s in range(n):
        t = np.tensordot(t, e, axes=([0, n - s], [2, 1]))
    p = t.real.reshape(-1)
    p = np.clip(p, 0.0, None)
    return p / p.sum()


@dataclass(eq=False)
class ShotRecord:
    """A stream of joint POVM outcomes, one row per copy of the state."""

    shots: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shots = np.asarray(self.shots, dtype=np.uint8)
        if shots.ndim != 2:
            raise ValueError(f"shots must be a 2-d array, got shape {shots.shape}")
        if shots.size and shots.max() > 3:
            raise ValueError("outcome symbols must lie in 0..3")
        self.shots = _freeze(shots)
        self.metadata = dict(self.metadata)

    @property
    def n_parties(self) -> int:
        return self.shots.shape[1]

    @property
    def n_shots(self) -> int:
        return self.shots.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ShotRecord):
            return NotImplemented
        return np.array_equal(self.shots, other.shots) and self.metadata == other.metadata


@dataclass(eq=False)
class OutcomeCounts:
    """Outcome frequencies f_m for a subsystem, dense over the 4^k outcome tuples."""

    parties: tuple
    counts: np.ndarray

    def __post_init__(self):
        parties = tuple(self.parties)
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (4 ** len(parties),):
            raise ValueError(f"expected {4 ** len(parties)} counts, got shape {counts.shape}")
        if counts.min() < 0:
            raise ValueError("negative count")
        self.parties = parties
        self.counts = _freeze(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def items(self):
        """(outcome tuple, count) pairs for the non-zero outcomes."""
        k = len(self.parties)
        for flat in np.flatnonzero(self.counts):
            digits = tuple((int(flat) >> (2 * (k - 1 - q))) & 3 for q in range(k))
            yield digits, int(self.counts[flat])

    def __eq__(self, other):
        if not isinstance(other, OutcomeCounts):
            return NotImplemented
        return self.parties == other.parties and np.array_equal(self.counts, other.counts)


def sample_shots(rho: DensityMatrix, n_shots: int, seed: int) -> ShotRecord:
    """Draw independent joint-POVM outcomes from the exact distribution.

    Deterministic for a fixed seed: shots are generated in fixed chunks
    of SHOT_CHUNK draws, chunk c using the sub-seed (seed, "shots", c).
    """
    if n_shots < 1:
        raise ValueError(f"need at least one shot, got {n_shots}")
    n = rho.n_parties
    p = joint_distribution(rho)
    cum = np.cumsum(p)
    cum[-1] = 1.0
    rows = []
    for c in range(0, n_shots, SHOT_CHUNK):
        m = min(SHOT_CHUNK, n_shots - c)
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "shots", c // SHOT_CHUNK)))
        idx = np.searchsorted(cum, rng.random(m), side="right")
        rows.append(idx)
    idx = np.concatenate(rows)
    shots = np.empty((n_shots, n), dtype=np.uint8)
    for q in range(n):
        shots[:, q] = (idx >> (2 * (n - 1 - q))) & 3
    meta = {
        "n_parties": str(n),
        "m": str(n_shots),
        "seed": str(seed),
        "rng": RNG_FAMILY,
    }
    return ShotRecord(shots, meta)


def marginalize(record: ShotRecord, subset) -> OutcomeCounts:
    """Project every shot onto the given parties (labels 1..n) and count outcomes."""
    n = record.n_parties
    subset = tuple(sorted(set(subset)))
    if not subset:
        raise ValueError("subset is empty")
    for p in subset:
        if not 1 <= p <= n:
            raise ValueError(f"party {p} outside register 1..{n}")
    k = len(subset)
    flat = np.zeros(record.n_shots, dtype=np.int64)
    for p in subset:
        flat = (flat << 2) | record.shots[:, p - 1].astype(np.int64)
    counts = np.bincount(flat, minlength=4**k)
    return OutcomeCounts(subset, counts)


def save_shots(record: ShotRecord, path) -> None:
    """Write the text shot format: '#' key=value header lines, then comma-separated digits."""
    meta = dict(record.metadata)
    meta["n_parties"] = str(record.n_parties)
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={meta[key]}\n")
        for row in record.shots:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_shots(path) -> ShotRecord:
    """Parse a shot file; malformed lines raise ParseError with their line number."""
    meta = {}
    rows = []
    n_parties = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            fields = line.split(",")
            row = []
            for tok in fields:
                tok = tok.strip()
                if tok not in ("0", "1", "2", "3"):
                    raise ParseError(line_no, f"invalid outcome symbol {tok!r}")
                row.append(int(tok))
            if n_parties is None:
                n_parties = len(row)
            elif len(row) != n_parties:
                raise ParseError(line_no, f"expected {n_parties} symbols, got {len(row)}")
            rows.append(row)
    if not rows:
        raise ParseError(0, "no shot lines found")
    if "n_parties" in meta and int(meta["n_parties"]) != n_parties:
        raise ParseError(0, f"header says {meta['n_parties']} parties, data has {n_parties}")
    return ShotRecord(np.array(rows, dtype=np.uint8), meta)
