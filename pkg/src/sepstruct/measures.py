"""Entanglement quantifiers for small reconstructed states.

Two-qubit states get the Wootters concurrence; larger states get the
partial-transpose negativity across each bipartition, defined as the
absolute sum of negative eigenvalues of the partial transpose (the
Bell-state value under this normalization is 1/2). A positive value
certifies entanglement across the cut; zero is inconclusive, since
PPT-entangled states exist, and the pipeline treats it strictly as
"no evidence".
"""

from dataclasses import dataclass

import numpy as np

from .qmath import DensityMatrix, partial_transpose

EIGENVALUE_ATOL = 1e-10  # smaller partial-transpose eigenvalues count as zero

_SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_SPIN_FLIP = np.kron(_SIGMA_Y, _SIGMA_Y)


@dataclass(frozen=True)
class Bipartition:
    """An unordered split of a subsystem into two non-empty blocks.

    Canonical form: block_a holds the smallest party label.
    """

    block_a: tuple
    block_b: tuple

    def __post_init__(self):
        a = tuple(sorted(self.block_a))
        b = tuple(sorted(self.block_b))
        if not a or not b:
            raise ValueError("both blocks must be non-empty")
        if set(a) & set(b):
            raise ValueError(f"blocks overlap: {a} and {b}")
        if b[0] < a[0]:
            a, b = b, a
        object.__setattr__(self, "block_a", a)
        object.__setattr__(self, "block_b", b)

    @property
    def parties(self) -> tuple:
        return tuple(sorted(self.block_a + self.block_b))

    @property
    def shape(self) -> tuple:
        return tuple(sorted((len(self.block_a), len(self.block_b))))


@dataclass(frozen=True)
class MeasureValue:
    subsystem: tuple
    bipartition: Bipartition | None  # None for concurrence
    kind: str  # "concurrence" or "negativity"
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("measure values are non-negative")
        if self.kind == "concurrence" and len(self.subsystem) != 2:
            raise ValueError("concurrence only applies to two-qubit subsystems")


def concurrence(rho: DensityMatrix) -> float:
    """Wootters concurrence of a two-qubit state.

    max(0, l1 - l2 - l3 - l4) with l_i the decreasing square roots of the
    eigenvalues of rho (sy x sy) rho* (sy x sy).
    """
    if rho.dim != 4:
        raise ValueError(f"concurrence needs a two-qubit state, got dim {rho.dim}")
    flipped = _SPIN_FLIP @ rho.entries.conj() @ _SPIN_FLIP
    lam = np.linalg.eigvals(rho.entries @ flipped).real
    lam = np.sqrt(np.clip(lam, 0.0, None))
    lam[::-1].sort()
    return max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))


def negativity(rho: DensityMatrix, bipartition: Bipartition) -> float:
    """Absolute sum of negative partial-transpose eigenvalues across the cut."""
    if set(bipartition.parties) != set(rho.labels):
        raise ValueError(f"bipartition {bipartition} does not cover register {rho.labels}")
    lam = np.linalg.eigvalsh(partial_transpose(rho, bipartition.block_a))
    lam = np.where(np.abs(lam) < EIGENVALUE_ATOL, 0.0, lam)
    return float(-lam[lam < 0].sum())


def enumerate_bipartitions(subsystem) -> list:
    """All 2^(k-1) - 1 bipartitions, ordered by |block_a| then lexicographically."""
    subsystem = tuple(sorted(subsystem))
    k = len(subsystem)
    if k < 2:
        raise ValueError("a singleton subsystem has no bipartitions")
    anchor, rest = subsystem[0], subsystem[1:]
    out = []
    for mask in range(2 ** (k - 1) - 1):
        a = [anchor] + [p for i, p in enumerate(rest) if (mask >> i) & 1]
        b = [p for i, p in enumerate(rest) if not (mask >> i) & 1]
        out.append(Bipartition(tuple(a), tuple(b)))
    out.sort(key=lambda bp: (len(bp.block_a), bp.block_a, bp.block_b))
    return out


def bipartitions_of_shape(subsystem, shape) -> list:
    shape = tuple(sorted(shape))
    return [bp for bp in enumerate_bipartitions(subsystem) if bp.shape == shape]


def measure_all(rdms: dict) -> list:
    """Concurrence for each 2-qubit entry, negativity per bipartition for k >= 3.

    ``rdms`` maps party subsets to states; output order is by subset
    (size, then lexicographic), then bipartition enumeration order.
    """
    values = []
    for subset in sorted(rdms, key=lambda s: (len(s), s)):
        rho = rdms[subset]
        if tuple(sorted(rho.labels)) != tuple(sorted(subset)):
            raise ValueError(f"state labels {rho.labels} do not match subset {subset}")
        if len(subset) == 2:
            values.append(MeasureValue(tuple(subset), None, "concurrence", concurrence(rho)))
        else:
            for bp in enumerate_bipartitions(subset):
                values.append(MeasureValue(tuple(subset), bp, "negativity", negativity(rho, bp)))
    return values
