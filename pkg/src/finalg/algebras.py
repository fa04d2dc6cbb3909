"""Finite algebras: operation tables, products, subuniverses, closure.

Elements are integers 0..size-1.  Flat tables are row-major with the FIRST
argument most significant; every module in the package shares this encoding,
so printed tuples map to indices deterministically.

Large direct products keep their operations componentwise instead of
materialising tables (a table for an 8-ary operation on a few thousand
elements is physically impossible); `Operation.table` raises `CapExceeded`
in that case.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


class AlgebraError(ValueError):
    """Bad parameters, arity mismatch, or malformed table."""


class CapExceeded(RuntimeError):
    """The computation would exceed its configured resource cap."""

    def __init__(self, message: str, explored: int | None = None):
        super().__init__(message)
        self.explored = explored


def _env_cap(name: str, default: int) -> int:
    value = os.environ.get(name)
    return int(value) if value else default


DEFAULT_CLOSURE_CAP = _env_cap("FINALG_CAP", 1 << 20)
DEFAULT_TUPLE_CAP = 4_000_000
DEFAULT_TABLE_CAP = 1 << 22


# ---------------------------------------------------------------------------
# operations


class Operation:
    """Abstract m-ary operation on 0..size-1."""

    name: str
    arity: int
    size: int

    def apply(self, args: Sequence[int]) -> int:
        raise NotImplementedError

    def apply_cols(self, cols: np.ndarray) -> np.ndarray:
        """Vectorised apply; `cols` has shape (arity, n)."""
        raise NotImplementedError

    def table_array(self, cap: int = DEFAULT_TABLE_CAP) -> np.ndarray:
        """Flat table, materialised on demand."""
        count = self.size**self.arity
        if count > cap:
            raise CapExceeded(
                f"table of {self.name} would need {count} entries", explored=0
            )
        idx = np.arange(count, dtype=np.int64)
        cols = np.empty((self.arity, count), dtype=np.int64)
        for pos in range(self.arity - 1, -1, -1):
            cols[pos] = idx % self.size
            idx //= self.size
        return self.apply_cols(cols).astype(np.int64)

    def __repr__(self):  # pragma: no cover
        return f"<{type(self).__name__} {self.name}/{self.arity} on {self.size}>"


class TableOp(Operation):
    def __init__(self, name: str, arity: int, size: int, table: Sequence[int]):
        if arity < 1:
            raise AlgebraError("arity must be >= 1 (constants are not modelled)")
        if size < 1:
            raise AlgebraError("size must be >= 1")
        tbl = np.asarray(table, dtype=np.int64)
        if tbl.shape != (size**arity,):
            raise AlgebraError(
                f"table of {name!r} has {tbl.size} entries, expected {size**arity}"
            )
        if tbl.size and (tbl.min() < 0 or tbl.max() >= size):
            raise AlgebraError(f"table of {name!r} has out-of-range entries")
        self.name = name
        self.arity = arity
        self.size = size
        self.table = tbl
        self.table.setflags(write=False)

    def apply(self, args: Sequence[int]) -> int:
        if len(args) != self.arity:
            raise AlgebraError(f"{self.name} expects {self.arity} arguments")
        idx = 0
        for a in args:
            if not 0 <= a < self.size:
                raise AlgebraError(f"element {a} out of range for {self.name}")
            idx = idx * self.size + a
        return int(self.table[idx])

    def apply_cols(self, cols: np.ndarray) -> np.ndarray:
        idx = cols[0].astype(np.int64)
        for pos in range(1, self.arity):
            idx = idx * self.size + cols[pos]
        return self.table[idx]

    def table_array(self, cap: int = DEFAULT_TABLE_CAP) -> np.ndarray:
        return self.table


class ProductOp(Operation):
    """Componentwise operation of a direct product; evaluated lazily."""

    def __init__(self, name: str, factor_ops: Sequence[Operation], indexing: "FactorIndexing"):
        self.name = name
        self.factor_ops = tuple(factor_ops)
        self.indexing = indexing
        self.arity = self.factor_ops[0].arity
        self.size = indexing.size

    def apply(self, args: Sequence[int]) -> int:
        coords = [self.indexing.decode(a) for a in args]
        out = tuple(
            op.apply([c[i] for c in coords]) for i, op in enumerate(self.factor_ops)
        )
        return self.indexing.encode(out)

    def apply_cols(self, cols: np.ndarray) -> np.ndarray:
        dec = self.indexing.decode_matrix()
        out = np.zeros(cols.shape[1], dtype=np.int64)
        for i, op in enumerate(self.factor_ops):
            out = out * op.size + op.apply_cols(dec[cols, i])
        return out


class RestrictedOp(Operation):
    """Operation of a subalgebra, re-indexed over the closed subset."""

    def __init__(self, name: str, inner: Operation, embed: np.ndarray):
        self.name = name
        self.inner = inner
        self.embed = np.asarray(embed, dtype=np.int64)
        self.arity = inner.arity
        self.size = len(self.embed)
        self.section = np.full(inner.size, -1, dtype=np.int64)
        self.section[self.embed] = np.arange(self.size)

    def apply(self, args: Sequence[int]) -> int:
        out = self.section[self.inner.apply([int(self.embed[a]) for a in args])]
        if out < 0:
            raise AlgebraError(f"{self.name}: subset is not closed at {tuple(args)}")
        return int(out)

    def apply_cols(self, cols: np.ndarray) -> np.ndarray:
        out = self.section[self.inner.apply_cols(self.embed[cols])]
        if out.size and out.min() < 0:
            raise AlgebraError(f"{self.name}: subset is not closed")
        return out


# ---------------------------------------------------------------------------
# product indexing


@dataclass(frozen=True)
class FactorIndexing:
    """Bijection between tuples over factor universes and flat indices."""

    sizes: tuple[int, ...]

    @property
    def size(self) -> int:
        return math.prod(self.sizes)

    def encode(self, coords: Sequence[int]) -> int:
        if len(coords) != len(self.sizes):
            raise AlgebraError("coordinate count mismatch")
        idx = 0
        for c, s in zip(coords, self.sizes):
            if not 0 <= c < s:
                raise AlgebraError(f"coordinate {c} out of range 0..{s - 1}")
            idx = idx * s + c
        return idx

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.size:
            raise AlgebraError(f"index {index} out of range")
        out = []
        for s in reversed(self.sizes):
            out.append(index % s)
            index //= s
        return tuple(reversed(out))

    def decode_matrix(self) -> np.ndarray:
        """All decodings at once, shape (size, nfactors)."""
        cached = getattr(self, "_dec", None)
        if cached is None:
            idx = np.arange(self.size, dtype=np.int64)
            cached = np.empty((self.size, len(self.sizes)), dtype=np.int64)
            for pos in range(len(self.sizes) - 1, -1, -1):
                cached[:, pos] = idx % self.sizes[pos]
                idx //= self.sizes[pos]
            cached.setflags(write=False)
            object.__setattr__(self, "_dec", cached)
        return cached


# ---------------------------------------------------------------------------
# algebras


class FiniteAlgebra:
    """A finite universe 0..size-1 with a fixed sequence of operations."""

    def __init__(
        self,
        size: int,
        ops: Sequence[Operation],
        label: str = "",
        factors: Optional[Sequence["FiniteAlgebra"]] = None,
        indexing: Optional[FactorIndexing] = None,
        parent: Optional["FiniteAlgebra"] = None,
        embed: Optional[np.ndarray] = None,
    ):
        if size < 1:
            raise AlgebraError("size must be >= 1")
        for op in ops:
            if op.size != size:
                raise AlgebraError(f"operation {op.name} sized for {op.size}, not {size}")
        self.size = size
        self.ops = tuple(ops)
        self.label = label
        self.factors = tuple(factors) if factors is not None else None
        self.indexing = indexing
        self.parent = parent
        self.embed = embed

    def op(self, index: int) -> Operation:
        if not 0 <= index < len(self.ops):
            raise AlgebraError(f"no operation with index {index}")
        return self.ops[index]

    def signature(self) -> tuple[int, ...]:
        return tuple(op.arity for op in self.ops)

    def elements(self) -> range:
        return range(self.size)

    def __repr__(self):  # pragma: no cover
        sig = ",".join(map(str, self.signature()))
        return f"FiniteAlgebra({self.label or '?'}, size={self.size}, arities=[{sig}])"


def similar(a: FiniteAlgebra, b: FiniteAlgebra) -> bool:
    """Same number of operations with matching arities."""
    return a.signature() == b.signature()


def apply_op(alg: FiniteAlgebra, op_index: int, args: Sequence[int]) -> int:
    return alg.op(op_index).apply(args)


# ---------------------------------------------------------------------------
# constructors


def make_chain_lattice(size: int) -> FiniteAlgebra:
    """Chain 0 < 1 < ... < size-1 with join (max) and meet (min)."""
    if size < 2:
        raise AlgebraError("a chain lattice needs at least 2 elements")
    pairs = [(x, y) for x in range(size) for y in range(size)]
    join = TableOp("join", 2, size, [max(p) for p in pairs])
    meet = TableOp("meet", 2, size, [min(p) for p in pairs])
    return FiniteAlgebra(size, [join, meet], label=f"C{size}")


_UJM_TABLES: dict[tuple[int, int, int], np.ndarray] = {}


def order_statistic_table(chain_size: int, j: int, m: int) -> np.ndarray:
    """Table of the m-ary chain operation returning the j-th smallest argument.

    On a chain this agrees with the lattice term 'meet over all j-element
    subsets of the join of the chosen arguments'; the subset form is kept in
    the test suite as an independent oracle.  Tables are materialised once
    per (chain_size, j, m).
    """
    key = (chain_size, j, m)
    cached = _UJM_TABLES.get(key)
    if cached is not None:
        return cached
    count = chain_size**m
    idx = np.arange(count, dtype=np.int64)
    cols = np.empty((count, m), dtype=np.int64)
    for pos in range(m - 1, -1, -1):
        cols[:, pos] = idx % chain_size
        idx //= chain_size
    cols.sort(axis=1)
    table = cols[:, j - 1].copy()
    table.setflags(write=False)
    _UJM_TABLES[key] = table
    return table


def make_ujm_reduct(chain_size: int, j: int, m: int) -> FiniteAlgebra:
    """Chain reduct whose only operation picks the j-th smallest of m arguments."""
    if m < 3:
        raise AlgebraError("the subset operation needs arity >= 3")
    if not 1 <= j <= m:
        raise AlgebraError(f"j={j} out of range 1..{m}")
    if chain_size < 2:
        raise AlgebraError("chain must have at least 2 elements")
    op = TableOp("u", m, chain_size, order_statistic_table(chain_size, j, m))
    return FiniteAlgebra(chain_size, [op], label=f"N({j},{m})@{chain_size}")


def one_element_algebra(arity: int, label: str = "triv") -> FiniteAlgebra:
    return FiniteAlgebra(1, [TableOp("u", arity, 1, [0])], label=label)


def direct_product(
    factors: Sequence[FiniteAlgebra], cap: int = DEFAULT_CLOSURE_CAP, label: str = ""
) -> FiniteAlgebra:
    """Componentwise product; operations stay lazy."""
    factors = list(factors)
    if not factors:
        raise AlgebraError("direct_product needs at least one factor")
    first = factors[0]
    for f in factors[1:]:
        if not similar(first, f):
            raise AlgebraError(
                f"dissimilar factors: {first.label!r} {first.signature()} vs "
                f"{f.label!r} {f.signature()}"
            )
    indexing = FactorIndexing(tuple(f.size for f in factors))
    if indexing.size > cap:
        raise CapExceeded(f"product size {indexing.size} exceeds cap {cap}")
    ops = [
        ProductOp(first.ops[i].name, [f.ops[i] for f in factors], indexing)
        for i in range(len(first.ops))
    ]
    if not label:
        label = " x ".join(f.label or "?" for f in factors)
    return FiniteAlgebra(indexing.size, ops, label=label, factors=factors, indexing=indexing)


def restrict_algebra(
    parent: FiniteAlgebra, subset: Iterable[int], label: str = ""
) -> FiniteAlgebra:
    """Subalgebra on a closed subset, re-indexed over its sorted order."""
    embed = np.asarray(sorted(set(subset)), dtype=np.int64)
    if embed.size == 0:
        raise AlgebraError("empty subuniverse")
    if embed[0] < 0 or embed[-1] >= parent.size:
        raise AlgebraError("subset out of range")
    ops = [RestrictedOp(op.name, op, embed) for op in parent.ops]
    return FiniteAlgebra(
        len(embed), ops, label=label or f"{parent.label}|{len(embed)}",
        parent=parent, embed=embed,
    )


# ---------------------------------------------------------------------------
# pointwise predicates


_TUPLE_COLS_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _tuple_cols(size: int, arity: int) -> np.ndarray:
    cached = _TUPLE_COLS_CACHE.get((size, arity))
    if cached is not None:
        return cached
    idx = np.arange(size**arity, dtype=np.int64)
    cols = np.empty((arity, size**arity), dtype=np.int64)
    for pos in range(arity - 1, -1, -1):
        cols[pos] = idx % size
        idx //= size
    cols.setflags(write=False)
    if len(_TUPLE_COLS_CACHE) > 32:
        _TUPLE_COLS_CACHE.clear()
    _TUPLE_COLS_CACHE[(size, arity)] = cols
    return cols


def is_k_absorbing(alg: FiniteAlgebra, op_index: int, zero: int, k: int) -> bool:
    """True iff the op returns `zero` whenever >= k arguments equal `zero`."""
    op = alg.op(op_index)
    if not 1 <= k <= op.arity:
        raise AlgebraError(f"k={k} out of range 1..{op.arity}")
    if not 0 <= zero < alg.size:
        raise AlgebraError(f"element {zero} out of range")
    return _op_k_absorbing(op, zero, k)


def _op_k_absorbing(op: Operation, zero: int, k: int) -> bool:
    if isinstance(op, ProductOp):
        coords = op.indexing.decode(zero)
        return all(_op_k_absorbing(f, c, k) for f, c in zip(op.factor_ops, coords))
    if isinstance(op, RestrictedOp):
        if _op_k_absorbing(op.inner, int(op.embed[zero]), k):
            return True
        # the restriction can still be absorbing when the parent is not
    if op.size**op.arity > DEFAULT_TABLE_CAP:
        raise CapExceeded(f"absorption check on {op.name} needs a table")
    cols = _tuple_cols(op.size, op.arity)
    mask = (cols == zero).sum(axis=0) >= k
    out = op.apply_cols(cols[:, mask])
    return bool((out == zero).all())


def is_k_majority(alg: FiniteAlgebra, op_index: int, k: int) -> bool:
    """True iff every element is k-absorbing for the op."""
    op = alg.op(op_index)
    if not 1 <= k <= op.arity:
        raise AlgebraError(f"k={k} out of range 1..{op.arity}")
    return _op_k_majority(op, k)


def _op_k_majority(op: Operation, k: int) -> bool:
    if isinstance(op, ProductOp):
        return all(_op_k_majority(f, k) for f in op.factor_ops)
    if isinstance(op, RestrictedOp) and _op_k_majority(op.inner, k):
        return True
    if op.size**op.arity > DEFAULT_TABLE_CAP:
        raise CapExceeded(f"majority check on {op.name} needs a table")
    cols = _tuple_cols(op.size, op.arity)
    out = op.apply_cols(cols)
    for z in range(op.size):
        mask = (cols == z).sum(axis=0) >= k
        if not (out[mask] == z).all():
            return False
    return True


def is_near_unanimity(alg: FiniteAlgebra, op_index: int) -> bool:
    op = alg.op(op_index)
    if op.arity < 3:
        return False
    return is_k_majority(alg, op_index, op.arity - 1)


def is_symmetrical(alg: FiniteAlgebra, op_index: int) -> bool:
    """Invariance under all argument permutations.

    Checked on the adjacent transposition and the full cycle, which generate
    the whole symmetric group; the full-permutation check is kept in the test
    suite as a cross-check.
    """
    return _op_symmetrical(alg.op(op_index))


def _op_symmetrical(op: Operation) -> bool:
    if op.arity == 1:
        return True
    if isinstance(op, ProductOp):
        return all(_op_symmetrical(f) for f in op.factor_ops)
    if isinstance(op, RestrictedOp) and _op_symmetrical(op.inner):
        return True
    if op.size**op.arity > DEFAULT_TABLE_CAP:
        raise CapExceeded(f"symmetry check on {op.name} needs a table")
    cols = _tuple_cols(op.size, op.arity)
    out = op.apply_cols(cols)
    for perm in (_transposition(op.arity), _cycle(op.arity)):
        if not (out == op.apply_cols(cols[perm])).all():
            return False
    return True


def _transposition(m: int) -> list[int]:
    p = list(range(m))
    p[0], p[1] = p[1], p[0]
    return p


def _cycle(m: int) -> list[int]:
    return list(range(1, m)) + [0]


# ---------------------------------------------------------------------------
# closure


def subalgebra_closure(
    alg: FiniteAlgebra,
    generators: Iterable[int],
    track_terms: bool = False,
    cap: int = DEFAULT_CLOSURE_CAP,
    tuple_cap: int = DEFAULT_TUPLE_CAP,
):
    """Smallest subset containing the generators and closed under all ops.

    Returns a sorted list, or (sorted list, {element: Term}) with provenance
    when `track_terms` is set.  Deterministic: tuples are explored in
    lexicographic order of discovery indices, so the first derivation wins.
    """
    from .terms import App, Var

    gens = sorted(set(generators))
    for g in gens:
        if not 0 <= g < alg.size:
            raise AlgebraError(f"generator {g} out of range")
    order: list[int] = list(gens)
    seen: dict[int, object] = {g: Var(i) for i, g in enumerate(gens)}
    frontier_start = 0
    while True:
        new_start = len(order)
        for oi, op in enumerate(alg.ops):
            r = op.arity
            total = len(order) ** r - max(0, frontier_start) ** r
            if total > tuple_cap:
                raise CapExceeded(
                    f"closure tuple budget exceeded on {op.name}", explored=len(order)
                )
            for args in itertools.product(range(len(order)), repeat=r):
                if max(args) < frontier_start:
                    continue  # all arguments already processed in earlier rounds
                val = op.apply([order[a] for a in args])
                if val not in seen:
                    if len(order) + 1 > cap:
                        raise CapExceeded("closure cap exceeded", explored=len(order))
                    seen[val] = App(oi, tuple(seen[order[a]] for a in args))
                    order.append(val)
        if new_start == len(order):
            break
        frontier_start = new_start
    result = sorted(order)
    if track_terms:
        return result, {e: seen[e] for e in result}
    return result


# ---------------------------------------------------------------------------
# subuniverse check


def is_subuniverse(
    alg: FiniteAlgebra,
    subset: Iterable[int],
    tuple_cap: int = DEFAULT_TUPLE_CAP,
):
    """Exact closure test.

    Returns (True, None) or (False, witness) with witness = (op_index, args,
    result) for one application leaving the subset.  Beyond the direct tuple
    budget an absorbing-coordinate reduction over the flattened product
    structure is used; if neither route applies, raises CapExceeded rather
    than sampling.
    """
    ids = sorted(set(int(x) for x in subset))
    if ids and (ids[0] < 0 or ids[-1] >= alg.size):
        raise AlgebraError("subset out of range")
    if not ids:
        return True, None  # no applicable tuples: arities are >= 1
    ids_arr = np.asarray(ids, dtype=np.int64)
    for oi, op in enumerate(alg.ops):
        witness = _closed_under(alg, oi, op, ids_arr, tuple_cap)
        if witness is not None:
            return False, witness
    return True, None


def _count_multisets(n: int, r: int) -> int:
    return math.comb(n + r - 1, r)


def _closed_under(alg, oi, op, ids_arr, tuple_cap):
    n = len(ids_arr)
    r = op.arity
    try:
        sym = _op_symmetrical(op)
    except CapExceeded:
        sym = False
    direct = _count_multisets(n, r) if sym else n**r
    if direct <= tuple_cap:
        return _enumerate_violation(oi, op, ids_arr, ids_arr, sym)
    view = flat_view(alg)
    if view is None or not sym:
        raise CapExceeded(
            f"subuniverse check on {op.name} over {n} elements needs "
            f"{direct} tuples and no product reduction applies"
        )
    return _absorbing_slice_violation(view, oi, op, ids_arr, tuple_cap)


def _iter_multisets(pool: np.ndarray, r: int, chunk: int = 200_000):
    """Chunks of index rows (combinations with repetition over `pool`)."""
    it = itertools.combinations_with_replacement(range(len(pool)), r)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield pool[np.asarray(block, dtype=np.int64)]


def _iter_tuples(pool: np.ndarray, r: int, chunk: int = 200_000):
    it = itertools.product(range(len(pool)), repeat=r)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield pool[np.asarray(block, dtype=np.int64)]


def _enumerate_violation(oi, op, pool, member_ids, sym):
    """Scan op over pool tuples; return a witness or None."""
    member_sorted = np.sort(member_ids)
    gen = _iter_multisets(pool, op.arity) if sym else _iter_tuples(pool, op.arity)
    for rows in gen:
        out = op.apply_cols(rows.T)
        pos = np.searchsorted(member_sorted, out)
        pos[pos >= len(member_sorted)] = len(member_sorted) - 1
        bad = member_sorted[pos] != out
        if bad.any():
            i = int(np.argmax(bad))
            return (oi, tuple(int(x) for x in rows[i]), int(out[i]))
    return None


def flat_view(alg: FiniteAlgebra):
    """Flatten nested products/subalgebras into atomic coordinates.

    Returns (coord_ops, decode) where coord_ops[op_index] is the list of
    per-coordinate operations and decode maps element ids to coordinate rows;
    None when the algebra has no product structure.
    """
    if alg.parent is not None:
        inner = flat_view(alg.parent)
        if inner is None:
            return None
        coord_ops, decode = inner
        return coord_ops, decode[alg.embed]
    if alg.factors is None:
        return None
    per_op: list[list[Operation]] = [[] for _ in alg.ops]
    decodes = []
    dec = alg.indexing.decode_matrix()
    for fi, factor in enumerate(alg.factors):
        inner = flat_view(factor)
        if inner is None:
            for k, op in enumerate(factor.ops):
                per_op[k].append(op)
            decodes.append(dec[:, fi : fi + 1])
        else:
            coord_ops, fdecode = inner
            for k in range(len(alg.ops)):
                per_op[k].extend(coord_ops[k])
            decodes.append(fdecode[dec[:, fi]])
    return per_op, np.concatenate(decodes, axis=1)


def _min_absorbing(op: Operation, zero: int, r: int):
    """Least k < r making `zero` k-absorbing, from one table scan."""
    if op.size**op.arity > DEFAULT_TABLE_CAP:
        return None
    cols = _tuple_cols(op.size, op.arity)
    counts = (cols == zero).sum(axis=0)
    bad = op.apply_cols(cols) != zero
    worst = int(counts[bad].max()) if bad.any() else 0
    k = worst + 1
    return k if k < r else None


def _absorbing_slice_violation(view, oi, op, ids_arr, tuple_cap):
    """Closure check through an absorbing coordinate value.

    Requires a coordinate c* and value z that is k-absorbing there such that
    the slice {s in S : s[c*] = z} is a full box of its own coordinate
    projections, and each coordinate's occurring values absorb into the box.
    Then any application with >= k slice arguments stays inside the box, and
    the remaining applications (< k slice arguments, ranging symbolically as
    per-coordinate wildcards over the box) are enumerable.
    """
    coord_ops, decode = view
    ops_c = coord_ops[oi]
    r = op.arity
    sub = decode[ids_arr]  # (n, ncoords)
    ncoords = sub.shape[1]
    # mixed-radix keys over the flattened (possibly padded) coordinate box
    weights = np.ones(ncoords, dtype=np.int64)
    for c in range(ncoords - 2, -1, -1):
        weights[c] = weights[c + 1] * ops_c[c + 1].size
    virtual = int(weights[0]) * ops_c[0].size
    if virtual > (1 << 24):
        raise CapExceeded("flattened coordinate space too large to index")
    key_to_id = np.full(virtual, -1, dtype=np.int64)
    key_to_id[decode @ weights] = np.arange(len(decode))
    member_mask = np.zeros(len(decode), dtype=bool)
    member_mask[ids_arr] = True

    candidates = []
    for c in range(ncoords):
        for z in np.unique(sub[:, c]):
            k = _min_absorbing(ops_c[c], int(z), r)
            if k is None:
                continue
            in_slice = sub[:, c] == z
            if not in_slice.any() or in_slice.all():
                continue  # the slice must actually split the subset
            cost = _count_multisets(int((~in_slice).sum()), r)
            candidates.append((cost, c, int(z), k, in_slice))
    candidates.sort(key=lambda t: t[0])
    chosen = None
    projs = [np.unique(sub[:, c]) for c in range(ncoords)]
    for _, cstar, z, k, in_slice in candidates:
        slice_rows = sub[in_slice]
        boxes = [np.unique(slice_rows[:, c]) for c in range(ncoords)]
        if len(slice_rows) != math.prod(len(b) for b in boxes):
            continue
        if all(
            c == cstar or _coord_absorbs(ops_c[c], projs[c], boxes[c], k, r)
            for c in range(ncoords)
        ):
            chosen = (cstar, z, k, in_slice, boxes)
            break
    if chosen is None:
        raise CapExceeded(f"no usable absorbing slice for {op.name}")
    cstar, z, k, in_slice, boxes = chosen

    rest_ids = ids_arr[~in_slice]
    rest_rows = sub[~in_slice]
    for e in range(min(k, r)):
        count = _count_multisets(len(rest_ids), r - e)
        if count > tuple_cap:
            raise CapExceeded(f"slice reduction still needs {count} tuples on {op.name}")
        witness = _slice_scan(
            oi, ops_c, rest_rows, rest_ids, boxes, e, weights, key_to_id, member_mask
        )
        if witness is not None:
            return witness
    return None


def _coord_absorbs(cop, proj, box, k, r):
    """All r-multisets over proj with >= k entries from box map into box."""
    proj_set = set(int(v) for v in proj)
    box_set = set(int(v) for v in box)
    if proj_set <= box_set:
        return True
    if _count_multisets(len(proj_set), r) > 200_000:
        raise CapExceeded("per-coordinate absorption check too large")
    for combo in itertools.combinations_with_replacement(sorted(proj_set), r):
        if sum(1 for v in combo if v in box_set) < k:
            continue
        if cop.apply(combo) not in box_set:
            return False
    return True


def _slice_scan(oi, ops_c, rest_rows, rest_ids, boxes, e, weights, key_to_id, member_mask):
    """Scan applications with exactly `e` box-wildcard arguments.

    The box is a full product, so as the wildcards range over it their values
    at distinct coordinates vary independently; per coordinate the candidate
    output values are computed for every e-multiset of box values, and any
    combination across coordinates is realised by some wildcard choice.
    """
    ncoords = rest_rows.shape[1]
    arity = ops_c[0].arity
    t = arity - e
    wild_combos = [
        list(itertools.combinations_with_replacement([int(v) for v in b], e))
        for b in boxes
    ]

    for rows in _iter_multisets(np.arange(len(rest_ids), dtype=np.int64), t):
        chunk = rows.shape[0]
        stacked = []
        for c in range(ncoords):
            colvals = rest_rows[rows, c].T  # (t, chunk)
            outs = [
                ops_c[c].apply_cols(
                    np.concatenate(
                        [
                            colvals,
                            np.repeat(
                                np.asarray(combo, dtype=np.int64)[:, None], chunk, axis=1
                            ),
                        ]
                    )
                    if e
                    else colvals
                )
                for combo in wild_combos[c]
            ]
            stacked.append(np.stack(outs, axis=0))  # (ncombo_c, chunk)
        multi = np.zeros(chunk, dtype=bool)
        keys = np.zeros(chunk, dtype=np.int64)
        vary = []
        for c in range(ncoords):
            vc = (stacked[c] != stacked[c][0]).any(axis=0)
            vary.append(vc)
            multi |= vc
            keys += stacked[c][0] * weights[c]
        eids = key_to_id[keys]
        bad = (~multi) & ((eids < 0) | ~member_mask[np.clip(eids, 0, None)])
        if bad.any():
            i = int(np.argmax(bad))
            target = [int(stacked[c][0, i]) for c in range(ncoords)]
            return _slice_witness(oi, rows[i], rest_ids, rest_rows, boxes, e, ops_c,
                                  weights, key_to_id, target)
        for i in np.flatnonzero(multi):
            vcs = [c for c in range(ncoords) if vary[c][i]]
            base_key = int(keys[i]) - sum(int(stacked[c][0, i]) * int(weights[c]) for c in vcs)
            choices = [sorted({int(v) for v in stacked[c][:, i]}) for c in vcs]
            for combo in itertools.product(*choices):
                key = base_key + sum(v * int(weights[c]) for v, c in zip(combo, vcs))
                eid = int(key_to_id[key])
                if eid < 0 or not member_mask[eid]:
                    target = [int(stacked[c][0, i]) for c in range(ncoords)]
                    for v, c in zip(combo, vcs):
                        target[c] = v
                    return _slice_witness(oi, rows[i], rest_ids, rest_rows, boxes, e,
                                          ops_c, weights, key_to_id, target)
    return None


def _slice_witness(oi, row_idx, rest_ids, rest_rows, boxes, e, ops_c, weights,
                   key_to_id, target):
    """Concrete arguments for a violating application found by the scan."""
    ncoords = rest_rows.shape[1]
    fixed = [int(rest_ids[i]) for i in row_idx]
    wild_elems = []
    if e:
        per_coord = []
        for c in range(ncoords):
            colvals = [int(rest_rows[i, c]) for i in row_idx]
            chosen = None
            for combo in itertools.combinations_with_replacement(
                [int(v) for v in boxes[c]], e
            ):
                if ops_c[c].apply(colvals + list(combo)) == target[c]:
                    chosen = combo
                    break
            per_coord.append(chosen)
        for w in range(e):
            key = sum(int(per_coord[c][w]) * int(weights[c]) for c in range(ncoords))
            wild_elems.append(int(key_to_id[key]))
    result_key = sum(v * int(w) for v, w in zip(target, weights))
    return (oi, tuple(fixed + wild_elems), int(key_to_id[result_key]))
