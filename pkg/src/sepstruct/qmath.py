"""Dense complex linear algebra over labelled qubit registers.

States carry an explicit ordered tuple of party labels; label 0 of the
tuple is the most significant bit of computational-basis indices. All
values are immutable after construction and every operation is a pure
function, so the module is safe to use from any number of workers.

Registers are capped at 12 qubits: a 4096 x 4096 complex matrix is the
largest object these dense routines are meant to handle.
"""

from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 12

HERMITICITY_ATOL = 1e-10
TRACE_ATOL = 1e-10
PSD_ATOL = 1e-9

_ASCII = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix over labelled qubits.

    Parameters
    ----------
    labels : tuple
        Ordered party identifiers; length log2(dim).
    entries : ndarray
        dim x dim complex matrix.
    """

    labels: tuple
    entries: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate party labels: {labels}")
        if len(labels) > MAX_QUBITS:
            raise ValueError(f"register of {len(labels)} qubits exceeds the {MAX_QUBITS}-qubit ceiling")
        dim = 2 ** len(labels)
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix for labels {labels}, got {entries.shape}")
        if not np.allclose(entries, entries.conj().T, atol=HERMITICITY_ATOL, rtol=0):
            raise ValueError("matrix is not Hermitian")
        tr = np.trace(entries)
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"trace is {tr}, expected 1")
        if np.linalg.eigvalsh(entries).min() < -PSD_ATOL:
            raise ValueError("matrix is not positive semidefinite")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "entries", _freeze(entries))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_parties(self) -> int:
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.entries, other.entries)


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm complex amplitude vector over a power-of-two dimension."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).ravel()
        n = int(np.log2(amp.size))
        if 2**n != amp.size:
            raise ValueError(f"dimension {amp.size} is not a power of two")
        norm2 = float(np.vdot(amp, amp).real)
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"squared norm is {norm2}, expected 1")
        object.__setattr__(self, "amplitudes", _freeze(amp))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def n_parties(self) -> int:
        return int(np.log2(self.dim))

    def density_matrix(self, labels=None) -> DensityMatrix:
        """Rank-one projector onto this state, over the given labels (default 1..n)."""
        if labels is None:
            labels = tuple(range(1, self.n_parties + 1))
        return DensityMatrix(tuple(labels), np.outer(self.amplitudes, self.amplitudes.conj()))


def make_physical(entries: np.ndarray, labels) -> DensityMatrix:
    """Project a nearly-physical matrix onto the state space.

    Hermitizes, clips small negative eigenvalues (round-off leakage) to
    zero and renormalizes the trace. Eigenvalues below -PSD_ATOL are a
    genuine positivity violation and still raise.
    """
    entries = np.asarray(entries, dtype=complex)
    entries = (entries + entries.conj().T) / 2
    lam, v = np.linalg.eigh(entries)
    if lam.min() < -PSD_ATOL:
        raise ValueError(f"minimum eigenvalue {lam.min()} below the clipping tolerance")
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    return DensityMatrix(tuple(labels), (v * lam) @ v.conj().T)


def tensor_product(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Kronecker product of two states; labels are concatenated a-then-b."""
    overlap = set(a.labels) & set(b.labels)
    if overlap:
        raise ValueError(f"label collision: {sorted(overlap)} appear in both factors")
    return DensityMatrix(a.labels + b.labels, np.kron(a.entries, b.entries))


def _positions(rho: DensityMatrix, parties) -> list:
    pos = []
    for p in parties:
        if p not in rho.labels:
            raise ValueError(f"unknown party {p!r}; register has {rho.labels}")
        pos.append(rho.labels.index(p))
    return pos


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every party not in ``keep``; label order of the register is preserved."""
    keep = tuple(keep)
    if not keep:
        raise ValueError("cannot trace out the whole register: keep is empty")
    _positions(rho, keep)
    n = rho.n_parties
    keep_pos = sorted(rho.labels.index(p) for p in keep)
    row = list(_ASCII[:n])
    col = list(_ASCII[n : 2 * n])
    for q in range(n):
        if q not in keep_pos:
            col[q] = row[q]
    out = "".join(row[q] for q in keep_pos) + "".join(_ASCII[n + q] for q in keep_pos)
    sub = "".join(row) + "".join(col) + "->" + out
    d = 2 ** len(keep_pos)
    reduced = np.einsum(sub, rho.entries.reshape((2,) * (2 * n))).reshape(d, d)
    return DensityMatrix(tuple(rho.labels[q] for q in keep_pos), reduced)


def partial_transpose(rho: DensityMatrix, block) -> np.ndarray:
    """Transpose the given parties only; returns a plain matrix (not a state)."""
    block = tuple(block)
    pos = _positions(rho, block)
    n = rho.n_parties
    if len(block) == 0 or len(block) == n:
        raise ValueError("partial transpose needs a non-empty proper subset of parties")
    t = rho.entries.reshape((2,) * (2 * n))
    for q in pos:
        t = np.swapaxes(t, q, n + q)
    return t.reshape(rho.dim, rho.dim)


def _sqrtm_psd(entries: np.ndarray) -> np.ndarray:
    lam, v = np.linalg.eigh(entries)
    return (v * np.sqrt(np.clip(lam, 0.0, None))) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, in [0, 1]."""
    if rho.labels != sigma.labels:
        raise ValueError(f"label mismatch: {rho.labels} vs {sigma.labels}")
    s = _sqrtm_psd(rho.entries)
    lam = np.linalg.eigvalsh(s @ sigma.entries @ s)
    f = float(np.sqrt(np.clip(lam, 0.0, None)).sum() ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the trace norm of rho - sigma."""
    if rho.labels != sigma.labels:
        raise ValueError(f"label mismatch: {rho.labels} vs {sigma.labels}")
    return float(np.abs(np.linalg.eigvalsh(rho.entries - sigma.entries)).sum() / 2)


def basis_ket(bits) -> np.ndarray:
    bits = tuple(bits)
    amp = np.zeros(2 ** len(bits), dtype=complex)
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    amp[idx] = 1.0
    return amp


def bell_state(i: int) -> PureState:
    """Two-qubit Bell state.

    The index convention is fixed here once and for all:
    0 -> (|00>+|11>)/sqrt(2), 1 -> (|00>-|11>)/sqrt(2),
    2 -> (|01>+|10>)/sqrt(2), 3 -> (|01>-|10>)/sqrt(2).
    """
    s = 1 / np.sqrt(2)
    table = {
        0: [s, 0, 0, s],
        1: [s, 0, 0, -s],
        2: [0, s, s, 0],
        3: [0, s, -s, 0],
    }
    if i not in table:
        raise ValueError(f"Bell index must be 0..3, got {i}")
    return PureState(np.array(table[i], dtype=complex))


def smolin_state() -> DensityMatrix:
    """Four-qubit uniform mixture of paired Bell products on qubits (1,2) and (3,4).

    The state is separable across every (2,2)-bipartition yet entangled
    across every (1,3)-bipartition; its minimal allowed partitions are
    exactly the three (2,2)-bipartitions. Any of the 24 Bell orderings
    yields the same mixture, so the :func:`bell_state` convention is
    immaterial here.
    """
    rho = np.zeros((16, 16), dtype=complex)
    for i in range(4):
        b = bell_state(i).amplitudes
        pair = np.outer(b, b.conj())
        rho += np.kron(pair, pair) / 4
    return DensityMatrix((1, 2, 3, 4), rho)


def w_state(n: int) -> PureState:
    """Uniform superposition of the n single-excitation basis states."""
    if n < 2:
        raise ValueError(f"W state needs at least 2 qubits, got {n}")
    amp = np.zeros(2**n, dtype=complex)
    for q in range(n):
        amp[1 << (n - 1 - q)] = 1 / np.sqrt(n)
    return PureState(amp)


def classically_correlated_state(kind: str) -> DensityMatrix:
    """Separable but classically correlated reference states.

    rho1 = (|00><00| + |11><11|)/2 on 2 qubits,
    rho2 = (|000><000| + |111><111|)/2 on 3 qubits,
    rho3 = sum_ij |ij><ij| x |ij><ij| / 4 on 4 qubits.
    """
    if kind == "rho1":
        entries = np.zeros((4, 4), dtype=complex)
        entries[0, 0] = entries[3, 3] = 0.5
        return DensityMatrix((1, 2), entries)
    if kind == "rho2":
        entries = np.zeros((8, 8), dtype=complex)
        entries[0, 0] = entries[7, 7] = 0.5
        return DensityMatrix((1, 2, 3), entries)
    if kind == "rho3":
        entries = np.zeros((16, 16), dtype=complex)
        for i in range(2):
            for j in range(2):
                idx = (i << 3) | (j << 2) | (i << 1) | j
                entries[idx, idx] = 0.25
        return DensityMatrix((1, 2, 3, 4), entries)
    raise ValueError(f"unknown kind {kind!r}; expected rho1, rho2 or rho3")


def ginibre_random_state(dim: int, rank: int, seed: int) -> DensityMatrix:
    """Random state G G^dag / Tr(G G^dag) with G a dim x rank complex Gaussian matrix."""
    n = int(np.log2(dim))
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must lie in [1, {dim}], got {rank}")
    rng = np.random.Generator(np.random.PCG64(seed))
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(tuple(range(1, n + 1)), m / np.trace(m).real)


def depolarize(rho: DensityMatrix, p: float) -> DensityMatrix:
    """(1-p) rho + p I/dim."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {p}")
    mixed = np.eye(rho.dim) / rho.dim
    return DensityMatrix(rho.labels, (1 - p) * rho.entries + p * mixed)
