"""Set-partition combinatorics: refinement poset, constraints, minimal partitions.

A partition P refines Q (P <= Q) when every block of P lies inside a
block of Q; separability is upward closed under this order, so each
entanglement observation across a split {Z1, Z2} eliminates every
partition with no block straddling Z1 and Z2, together with all of that
partition's refinements.

The minimal-partition computation never enumerates the full partition
lattice: it keeps only the current antichain of minimal compatible
partitions and updates it constraint by constraint. For each member
incompatible with a new constraint, every merge of a Z1-touching block
with a Z2-touching block is a candidate replacement; candidates with a
refinement already present are discarded. A brute-force enumeration
over restricted-growth strings doubles as an independent oracle for
small systems.
"""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SetPartition:
    """Disjoint non-empty blocks covering a ground set.

    Canonical form: each block sorted ascending, blocks ordered by their
    smallest element. Equality and hashing are canonical-form equality.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(sorted(b)) for b in self.blocks)
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        seen = set()
        for b in blocks:
            if not b:
                raise ValueError("empty block")
            for x in b:
                if x in seen:
                    raise ValueError(f"element {x!r} appears in two blocks")
                seen.add(x)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def singletons(cls, ground) -> "SetPartition":
        return cls(tuple((x,) for x in sorted(ground)))

    @classmethod
    def whole(cls, ground) -> "SetPartition":
        return cls((tuple(sorted(ground)),))

    @property
    def ground_set(self) -> frozenset:
        return frozenset(x for b in self.blocks for x in b)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_of(self) -> dict:
        """element -> index of its block."""
        return {x: i for i, b in enumerate(self.blocks) for x in b}

    def rgs(self) -> tuple:
        """Restricted-growth string over the sorted ground set; unique per partition."""
        owner = self.block_of()
        out = []
        relabel = {}
        for x in sorted(self.ground_set):
            blk = owner[x]
            if blk not in relabel:
                relabel[blk] = len(relabel)
            out.append(relabel[blk])
        return tuple(out)

    def merge(self, i: int, j: int) -> "SetPartition":
        """New partition with blocks i and j joined."""
        if i == j:
            raise ValueError("cannot merge a block with itself")
        keep = [b for k, b in enumerate(self.blocks) if k not in (i, j)]
        keep.append(tuple(sorted(self.blocks[i] + self.blocks[j])))
        return SetPartition(tuple(keep))

    def __str__(self):
        return render_partition(self)


def render_partition(p: SetPartition) -> str:
    """Compact text form, e.g. {12|34}; labels are comma-joined if any is multi-character."""
    parts = []
    for b in p.blocks:
        labels = [str(x) for x in b]
        sep = "" if all(len(s) == 1 for s in labels) else ","
        parts.append(sep.join(labels))
    return "{" + "|".join(parts) + "}"


def is_refinement(p: SetPartition, q: SetPartition) -> bool:
    """True iff every block of p is contained in some block of q (reflexive)."""
    if p.ground_set != q.ground_set:
        raise ValueError("partitions have different ground sets")
    owner = q.block_of()
    for b in p.blocks:
        first = owner[b[0]]
        if any(owner[x] != first for x in b[1:]):
            return False
    return True


def induced_partition(p: SetPartition, u) -> SetPartition:
    """Restriction of p to u: block intersections with u, empties dropped."""
    u = frozenset(u)
    if not u:
        raise ValueError("cannot induce on an empty subsystem")
    if not u <= p.ground_set:
        raise ValueError(f"{sorted(u - p.ground_set)} not in ground set")
    blocks = tuple(tuple(x for x in b if x in u) for b in p.blocks)
    return SetPartition(tuple(b for b in blocks if b))


@dataclass(frozen=True)
class Constraint:
    """An observed forbidden split {z1, z2}: no compatible partition may induce it.

    A partition is compatible iff some block intersects both z1 and z2.
    Canonical form: the overall smallest party sits in z1. The linked
    observation rides along but never affects identity.
    """

    z1: tuple
    z2: tuple
    provenance: object = field(default=None, compare=False)

    def __post_init__(self):
        z1 = tuple(sorted(self.z1))
        z2 = tuple(sorted(self.z2))
        if not z1 or not z2:
            raise ValueError("constraint blocks must be non-empty")
        if set(z1) & set(z2):
            raise ValueError(f"constraint blocks overlap: {z1} and {z2}")
        if z2[0] < z1[0]:
            z1, z2 = z2, z1
        object.__setattr__(self, "z1", z1)
        object.__setattr__(self, "z2", z2)

    @property
    def parties(self) -> tuple:
        return tuple(sorted(self.z1 + self.z2))

    def __str__(self):
        return f"({','.join(map(str, self.z1))})|({','.join(map(str, self.z2))})"


def is_compatible(p: SetPartition, c: Constraint) -> bool:
    """True iff some block of p intersects both constraint sides."""
    if not set(c.parties) <= p.ground_set:
        raise ValueError(f"constraint {c} mentions parties outside the ground set")
    s1, s2 = set(c.z1), set(c.z2)
    return any(set(b) & s1 and set(b) & s2 for b in p.blocks)


def _implies(a: Constraint, b: Constraint) -> bool:
    """Whether every partition eliminated by b is already eliminated by a."""
    a1, a2 = set(a.z1), set(a.z2)
    b1, b2 = set(b.z1), set(b.z2)
    return (a1 <= b1 and a2 <= b2) or (a1 <= b2 and a2 <= b1)


def prune_redundant(constraints) -> list:
    """Drop constraints implied by another kept one; duplicates collapse to one.

    The surviving list eliminates exactly the same partitions as the
    input. Output is ordered by total size, then lexicographically.
    """
    unique = []
    seen = set()
    for c in sorted(constraints, key=lambda c: (len(c.z1) + len(c.z2), c.z1, c.z2)):
        if (c.z1, c.z2) not in seen:
            seen.add((c.z1, c.z2))
            unique.append(c)
    kept = []
    for c in unique:
        if not any(o is not c and _implies(o, c) for o in unique):
            kept.append(c)
    return kept


def _partition_order(p: SetPartition):
    return (len(p.blocks), p.blocks)


@dataclass(frozen=True)
class MinimalSet:
    """Antichain of minimal partitions compatible with the applied constraints."""

    partitions: tuple
    constraints_applied: tuple = ()
    size_trace: tuple = ()  # antichain size after each applied constraint

    def __post_init__(self):
        parts = tuple(sorted(set(self.partitions), key=_partition_order))
        object.__setattr__(self, "partitions", parts)
        object.__setattr__(self, "constraints_applied", tuple(self.constraints_applied))
        object.__setattr__(self, "size_trace", tuple(self.size_trace))

    def __iter__(self):
        return iter(self.partitions)

    def __len__(self):
        return len(self.partitions)


def minimal_update(m: MinimalSet, c: Constraint) -> MinimalSet:
    """Fold one constraint into the minimal antichain.

    Compatible members survive as-is. Each incompatible member spawns
    one candidate per (Z1-touching block, Z2-touching block) merge;
    candidates with an equal or strict refinement among survivors or
    other candidates are dropped.
    """
    survivors = []
    candidates = {}
    for p in m.partitions:
        if is_compatible(p, c):
            survivors.append(p)
            continue
        touching1 = [i for i, b in enumerate(p.blocks) if set(b) & set(c.z1)]
        touching2 = [i for i, b in enumerate(p.blocks) if set(b) & set(c.z2)]
        for i in touching1:
            for j in touching2:
                cand = p.merge(i, j)
                candidates[cand] = cand
    survivor_set = set(survivors)
    kept = []
    for cand in candidates.values():
        if cand in survivor_set:
            continue
        dominated = any(is_refinement(s, cand) for s in survivors) or any(
            o is not cand and is_refinement(o, cand) for o in candidates.values()
        )
        if not dominated:
            kept.append(cand)
    return MinimalSet(
        tuple(survivors) + tuple(kept),
        m.constraints_applied + (c,),
        m.size_trace + (len(survivors) + len(kept),),
    )


def minimal_partitions(n: int, constraints) -> MinimalSet:
    """Minimal partitions of parties 1..n compatible with all constraints.

    Redundant constraints are pruned first; the rest apply smallest
    total size first (pair constraints keep the intermediate antichain
    at size one), then lexicographically. The resulting set does not
    depend on the application order, only the intermediate sizes do.
    """
    if n < 1:
        raise ValueError("need at least one party")
    ground = range(1, n + 1)
    for c in constraints:
        if not set(c.parties) <= set(ground):
            raise ValueError(f"constraint {c} mentions parties outside 1..{n}")
    m = MinimalSet((SetPartition.singletons(ground),))
    for c in prune_redundant(constraints):
        m = minimal_update(m, c)
    return m


def _rgs_partitions(labels):
    """All partitions of the labels, by restricted-growth strings."""
    labels = sorted(labels)
    n = len(labels)
    if n == 0:
        return
    rgs = [0] * n

    def rec(i, top):
        if i == n:
            blocks = [[] for _ in range(top + 1)]
            for lab, b in zip(labels, rgs):
                blocks[b].append(lab)
            yield SetPartition(tuple(tuple(b) for b in blocks))
            return
        for v in range(top + 2):
            rgs[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0)


def all_partitions(n: int):
    """Every partition of 1..n (Bell-number many)."""
    yield from _rgs_partitions(range(1, n + 1))


def brute_force_minimal(n: int, constraints) -> MinimalSet:
    """Oracle: enumerate all partitions, filter by compatibility, take minimal ones."""
    if n > 6:
        raise ValueError("brute force is capped at 6 parties")
    compatible = [p for p in all_partitions(n) if all(is_compatible(p, c) for c in constraints)]
    minimal = [
        p for p in compatible
        if not any(q != p and is_refinement(q, p) for q in compatible)
    ]
    return MinimalSet(tuple(minimal), tuple(constraints))


@dataclass(frozen=True)
class PosetView:
    """All partitions of a small system with forbidden flags and covering edges."""

    nodes: tuple  # SetPartition, deterministic order
    forbidden: tuple  # bool per node
    edges: tuple  # (refinement index, coarsening index) covering pairs

    def to_dot(self) -> str:
        """Graphviz digraph; an arrow runs from each partition to its covers."""
        lines = ["digraph separability_poset {", "  rankdir=BT;", '  node [shape=box, fontname="monospace"];']
        for i, p in enumerate(self.nodes):
            attrs = [f'label="{render_partition(p)}"']
            if self.forbidden[i]:
                attrs.append('style=filled')
                attrs.append('fillcolor="#d9d9d9"')
                attrs.append('forbidden=true')
            lines.append(f"  n{i} [{', '.join(attrs)}];")
        for a, b in self.edges:
            lines.append(f"  n{a} -> n{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def allowed_poset(n: int, constraints) -> PosetView:
    """Forbidden/allowed flags and covering relation for all partitions of 1..n.

    A node is forbidden when some constraint eliminates it; every
    refinement of a forbidden node is then forbidden as well, which the
    compatibility test already guarantees.
    """
    if n > 5:
        raise ValueError("poset export is capped at 5 parties; use the minimal set instead")
    constraints = list(constraints)
    nodes = sorted(all_partitions(n), key=lambda p: (-p.n_blocks, p.rgs()))
    forbidden = tuple(not all(is_compatible(p, c) for c in constraints) for p in nodes)
    below = [[False] * len(nodes) for _ in nodes]
    for i, p in enumerate(nodes):
        for j, q in enumerate(nodes):
            if i != j and p.n_blocks > q.n_blocks and is_refinement(p, q):
                below[i][j] = True
    edges = []
    for i in range(len(nodes)):
        for j in range(len(nodes)):
            if below[i][j] and not any(below[i][k] and below[k][j] for k in range(len(nodes))):
                edges.append((i, j))
    return PosetView(tuple(nodes), forbidden, tuple(edges))
