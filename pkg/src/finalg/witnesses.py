"""Witness algebras showing the sharpness of near-unanimity level bounds.

Three constructions live here:

* `filtered_subproduct` - a subalgebra of a four-factor product carved out by
  four membership templates anchored at absorbing elements, plus a designated
  pair (a, d) of the third factor and a subuniverse F of the last two.
* `cube_minus_top` - the power of the two-element reduct minus its top, the
  classic device refusing a lower-arity near-unanimity term.
* `build_sharpness_witness` - the explicit product of chain reducts with its
  distinguished "good" subuniverse, congruence triple, and canonical witness
  chain; the object all the counterexample certificates are computed on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algebras import (
    AlgebraError,
    FiniteAlgebra,
    direct_product,
    is_k_absorbing,
    is_k_majority,
    is_subuniverse,
    make_ujm_reduct,
    restrict_algebra,
    TableOp,
)
from .congruences import Partition, induced_product_congruence, partition_meet
from .identities import check_identity
from .relations import rel_of_partition, shortest_alternating_chain


class HypothesisError(AlgebraError):
    """A named precondition of a construction failed."""

    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"hypothesis {name} failed" + (f": {detail}" if detail else ""))
        self.name = name


def ell_of(m: int) -> int:
    """Top subset size used by the generator family: (m+1)//2, i.e. m/2 for even m."""
    return (m + 1) // 2


@dataclass(frozen=True)
class SharpnessParams:
    m: int
    q: int

    def __post_init__(self):
        if self.m < 3:
            raise AlgebraError("m must be >= 3")
        if self.q < 2:
            raise AlgebraError("q must be >= 2")

    @property
    def ell(self) -> int:
        return ell_of(self.m)


# ---------------------------------------------------------------------------
# staircase partitions of the chain 0..q


def staircase_partitions(q: int) -> tuple[Partition, Partition]:
    """The two interval partitions pairing the chain from the top.

    First: {q, q-1}, {q-2, q-3}, ...   (singleton {0} iff q is even)
    Second: {q}, {q-1, q-2}, ...       (singleton {0} iff q is odd)
    """
    if q < 1:
        raise AlgebraError("q must be >= 1")
    beta_blocks, x = [], q
    while x >= 0:
        beta_blocks.append([x] if x == 0 else [x, x - 1])
        x -= 2
    gamma_blocks, x = [[q]], q - 1
    while x >= 0:
        gamma_blocks.append([x] if x == 0 else [x, x - 1])
        x -= 2
    size = q + 1
    return (
        Partition.from_blocks(size, beta_blocks),
        Partition.from_blocks(size, gamma_blocks),
    )


# ---------------------------------------------------------------------------
# template-filtered four-factor subproduct

#: the four membership templates; '-' entries are free, and the pair of the
#: last two coordinates must additionally lie in F
TEMPLATES = ("(-,0,a,-)", "(0,0,-,-)", "(0,-,d,-)", "(-,-,-,0)")


@dataclass
class FilteredSubproduct:
    ambient: FiniteAlgebra
    b_ids: list[int]
    tags: dict[int, tuple[int, ...]]
    h: int
    k: int
    a: int
    d: int
    zeros: tuple[int, int, int]

    def as_algebra(self, label: str = "") -> FiniteAlgebra:
        return restrict_algebra(self.ambient, self.b_ids, label=label or "B(a,d)")


def filtered_subproduct(
    a1: FiniteAlgebra,
    a2: FiniteAlgebra,
    a3: FiniteAlgebra,
    a4: FiniteAlgebra,
    zero1: int,
    zero2: int,
    zero4: int,
    h: int,
    k: int,
    a: int,
    d: int,
    f_pairs: Sequence[int],
    *,
    verify_f: bool = True,
    tuple_cap: int = 4_000_000,
) -> FilteredSubproduct:
    """Subalgebra of A1 x A2 x A3 x A4 cut out by the four templates.

    Hypotheses (each verified, failures named):
      h-bounds: 1 <= h <= k and h + k <= m (the shared arity, >= 3);
      absorb-1 / absorb-2: zero1 / zero2 is h-absorbing in A1 / A2;
      majority-3: the operation of A3 is a k-majority operation;
      absorb-4: zero4 is 2-absorbing in A4;
      f-subuniverse: f_pairs is a subuniverse of A3 x A4 (flat indices).

    Closure of the result is re-verified; a failure there is a bug, not an
    input error, and raises AlgebraError.
    """
    for alg in (a2, a3, a4):
        if alg.signature() != a1.signature():
            raise HypothesisError("similarity", "factors must share one signature")
    if len(a1.ops) != 1:
        raise HypothesisError("similarity", "factors must have exactly one operation")
    m = a1.ops[0].arity
    if m < 3:
        raise HypothesisError("h-bounds", "arity must be >= 3")
    if not (1 <= h <= k and h + k <= m):
        raise HypothesisError("h-bounds", f"need 1 <= h <= k and h + k <= {m}")
    if not is_k_absorbing(a1, 0, zero1, h):
        raise HypothesisError("absorb-1", f"{zero1} is not {h}-absorbing")
    if not is_k_absorbing(a2, 0, zero2, h):
        raise HypothesisError("absorb-2", f"{zero2} is not {h}-absorbing")
    if not is_k_majority(a3, 0, k):
        raise HypothesisError("majority-3", f"operation is not {k}-majority")
    if not is_k_absorbing(a4, 0, zero4, 2):
        raise HypothesisError("absorb-4", f"{zero4} is not 2-absorbing")
    if not (0 <= a < a3.size and 0 <= d < a3.size):
        raise HypothesisError("anchors", "a and d must lie in A3")

    prod34 = direct_product([a3, a4], label="A3 x A4")
    f_set = frozenset(int(x) for x in f_pairs)
    if verify_f:
        ok, witness = is_subuniverse(prod34, f_set, tuple_cap=tuple_cap)
        if not ok:
            raise HypothesisError("f-subuniverse", f"violated at {witness}")

    ambient = direct_product([a1, a2, a3, a4], label="A1 x A2 x A3 x A4")
    dec = ambient.indexing.decode_matrix()
    s4 = a4.size
    b_ids: list[int] = []
    tags: dict[int, tuple[int, ...]] = {}
    for eid in range(ambient.size):
        x1, x2, x3, x4 = (int(v) for v in dec[eid])
        if (x3 * s4 + x4) not in f_set:
            continue
        matched = []
        if x2 == zero2 and x3 == a:
            matched.append(1)
        if x1 == zero1 and x2 == zero2:
            matched.append(2)
        if x1 == zero1 and x3 == d:
            matched.append(3)
        if x4 == zero4:
            matched.append(4)
        if matched:
            b_ids.append(eid)
            tags[eid] = tuple(matched)
    ok, witness = is_subuniverse(ambient, b_ids, tuple_cap=tuple_cap)
    if not ok:
        raise AlgebraError(f"template subproduct failed to close at {witness}")
    return FilteredSubproduct(ambient, b_ids, tags, h, k, a, d, (zero1, zero2, zero4))


# ---------------------------------------------------------------------------
# the cube-minus-top example


def cube_minus_top(m: int, tuple_cap: int = 4_000_000):
    """The (m-1)-th power of the two-element reduct, minus the all-ones tuple.

    Closed for m >= 4: any m arguments from the subset share a zero in two
    positions... for m = 3 the majority of the three one-zero tuples escapes,
    so the request is rejected there.
    """
    if m < 4:
        raise AlgebraError("needs m >= 4; the subset is not closed for m = 3")
    power = direct_product([make_ujm_reduct(2, 2, m)] * (m - 1), label=f"N(2,{m})^{m-1}")
    top = power.size - 1
    subset = [e for e in range(power.size) if e != top]
    ok, witness = is_subuniverse(power, subset, tuple_cap=tuple_cap)
    if not ok:
        raise AlgebraError(f"cube-minus-top failed to close at {witness}")
    return power, subset


# ---------------------------------------------------------------------------
# generator families


def nu_family_generators(m: int) -> list[FiniteAlgebra]:
    """Two-element reducts for every subset size from 2 up to ell."""
    if m < 3:
        raise AlgebraError("m must be >= 3")
    return [make_ujm_reduct(2, j, m) for j in range(2, ell_of(m) + 1)]


def implication_expansion(m: int, variant: str = "i") -> FiniteAlgebra:
    """Two-element implication-algebra reduct expanded by the m-ary operation.

    variant 'i': binary x & ~y; variant 'f': ternary x & (~y | z).
    """
    if m < 4:
        raise AlgebraError("m must be >= 4")
    if variant == "i":
        base = TableOp("i", 2, 2, [0, 0, 1, 0])
    elif variant == "f":
        base = TableOp("f", 3, 2, [0, 0, 0, 0, 1, 1, 0, 1])
    else:
        raise AlgebraError(f"unknown variant {variant!r}")
    u = make_ujm_reduct(2, 2, m).ops[0]
    return FiniteAlgebra(2, [base, u], label=f"I{'' if variant == 'i' else 'f'}:{m}")


def modular_sum_algebra(n: int, arity: int) -> FiniteAlgebra:
    """Z_n with the single operation summing its arguments mod n."""
    if n < 2 or arity < 2:
        raise AlgebraError("need n >= 2 and arity >= 2")
    count = n**arity
    idx = np.arange(count, dtype=np.int64)
    total = np.zeros(count, dtype=np.int64)
    for _ in range(arity):
        total += idx % n
        idx //= n
    return FiniteAlgebra(n, [TableOp("s", arity, n, total % n)], label=f"sum:{n}:{arity}")


def dissent_pair_fixture() -> FiniteAlgebra:
    """Two-element algebra with a ternary minority and a 4-ary lone-dissent op.

    The 4-ary table is forced on every tuple with at least three equal
    arguments; the 2-2 splits are free and pinned to 0 for determinism.
    """
    minority = TableOp("d3", 3, 2, [0, 1, 1, 0, 1, 0, 0, 1])
    rows = []
    for eid in range(16):
        bits = [(eid >> s) & 1 for s in (3, 2, 1, 0)]
        w = sum(bits)
        rows.append(1 if w in (1, 4) else 0)
    d4 = TableOp("d4", 4, 2, rows)
    return FiniteAlgebra(2, [minority, d4], label="LD2")


# ---------------------------------------------------------------------------
# the explicit sharpness witness


@dataclass
class SharpnessWitness:
    params: SharpnessParams
    product: FiniteAlgebra
    factor_roles: list[dict]
    good_ids: list[int]
    alpha: Partition
    beta: Partition
    gamma: Partition
    a: int               # positions within good_ids (local indices)
    d: int
    c: Optional[int]     # the single mid witness, q = 2 only
    lhs_chain: list[int]  # a, c_1 .. c_{q-1}, d as local indices
    _algebra: Optional[FiniteAlgebra] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.good_ids)

    def local_of_product(self, pid: int) -> int:
        from bisect import bisect_left

        i = bisect_left(self.good_ids, pid)
        if i == len(self.good_ids) or self.good_ids[i] != pid:
            raise AlgebraError(f"product element {pid} is not good")
        return i

    def coords_of_local(self, i: int) -> tuple[int, ...]:
        return self.product.indexing.decode(self.good_ids[i])

    def as_algebra(self) -> FiniteAlgebra:
        if self._algebra is None:
            self._algebra = restrict_algebra(
                self.product, self.good_ids, label=f"B({self.params.m},{self.params.q})"
            )
        return self._algebra


def _factor_plan(params: SharpnessParams) -> list[dict]:
    """Factor order: pairs for j = 2..ell (minus the half), then the half for
    odd m, then the two-element reduct."""
    m, q, ell = params.m, params.q, params.ell
    roles = []
    top_pair = ell - 1 if m % 2 == 1 else ell
    pair_no = 0
    for j in range(2, top_pair + 1):
        pair_no += 1
        roles.append({"role": "pair-first", "pair": pair_no, "j": j, "chain": q + 1})
        roles.append({"role": "pair-second", "pair": pair_no, "j": j, "chain": q + 1})
    if m % 2 == 1:
        roles.append({"role": "half", "j": ell, "chain": q + 1})
    roles.append({"role": "last", "j": 2, "chain": 2})
    assert len(roles) == m - 1
    return roles


def good_coords(coords: Sequence[int], roles: Sequence[dict], q: int) -> bool:
    """The membership rule for the distinguished subuniverse.

    Elements whose final coordinate is 0 are always good.  Otherwise the
    pair sequence must be a run of null pairs, then one pair of shape (-,0)
    or (0,-), then a constant run of (q,0) or (0,q) respectively; the half
    coordinate of odd m behaves as the first component of one more pair.
    """
    if coords[-1] == 0:
        return True
    pairs = []
    half = None
    for i, r in enumerate(roles):
        if r["role"] == "pair-first":
            pairs.append((coords[i], coords[i + 1]))
        elif r["role"] == "half":
            half = coords[i]
    i = 0
    while i < len(pairs) and pairs[i] == (0, 0):
        i += 1
    if i == len(pairs):
        return True  # all pairs null; the half stays unconstrained
    x, y = pairs[i]
    if y == 0:
        return all(p == (q, 0) for p in pairs[i + 1 :]) and (half is None or half == q)
    if x == 0:
        return all(p == (0, q) for p in pairs[i + 1 :]) and (half is None or half == 0)
    return False


def build_sharpness_witness(
    m: int, q: int, *, verify_closure: bool = True, tuple_cap: int = 4_000_000
) -> SharpnessWitness:
    """The product of chain reducts with its good subuniverse and congruences.

    Factor congruence pattern: pairs carry (first, second) staircase partitions
    swapped between the two congruences when q is even, and repeated when q is
    odd; the half carries one staircase each; the final factor is glued by the
    full congruence.  The distinguishing congruence relates elements agreeing
    in the final coordinate.
    """
    params = SharpnessParams(m, q)
    roles = _factor_plan(params)
    factors = [
        make_ujm_reduct(r["chain"], r["j"], m) if r["role"] != "last" else make_ujm_reduct(2, 2, m)
        for r in roles
    ]
    product = direct_product(factors, label=f"P({m},{q})")
    dec = product.indexing.decode_matrix()

    good = [
        eid
        for eid in range(product.size)
        if good_coords([int(v) for v in dec[eid]], roles, q)
    ]
    if verify_closure:
        ok, witness = is_subuniverse(product, good, tuple_cap=tuple_cap)
        if not ok:
            raise AlgebraError(f"good set failed to close at {witness}")

    beta_star, gamma_star = staircase_partitions(q)
    one2 = Partition.one(2)
    zero2 = Partition.zero(2)
    onec = Partition.one(q + 1)
    beta_parts: list[Partition] = []
    gamma_parts: list[Partition] = []
    alpha_parts: list[Partition] = []
    for r in roles:
        if r["role"] == "pair-first":
            beta_parts.append(beta_star)
            gamma_parts.append(gamma_star)
            alpha_parts.append(onec)
        elif r["role"] == "pair-second":
            beta_parts.append(gamma_star if q % 2 == 0 else beta_star)
            gamma_parts.append(beta_star if q % 2 == 0 else gamma_star)
            alpha_parts.append(onec)
        elif r["role"] == "half":
            beta_parts.append(beta_star)
            gamma_parts.append(gamma_star)
            alpha_parts.append(onec)
        else:
            beta_parts.append(one2)
            gamma_parts.append(one2)
            alpha_parts.append(zero2)
    alpha = induced_product_congruence(product.indexing, alpha_parts, good)
    beta = induced_product_congruence(product.indexing, beta_parts, good)
    gamma = induced_product_congruence(product.indexing, gamma_parts, good)

    def encode_units(pair_val, half_val, last_val):
        coords = []
        for r in roles:
            if r["role"] == "pair-first":
                coords.append(pair_val[0])
            elif r["role"] == "pair-second":
                coords.append(pair_val[1])
            elif r["role"] == "half":
                coords.append(half_val)
            else:
                coords.append(last_val)
        return product.indexing.encode(coords)

    pos = {pid: i for i, pid in enumerate(good)}
    a_id = encode_units((q, 0), q, 1)
    d_id = encode_units((0, q), 0, 1)
    chain_ids = [a_id]
    for i in range(1, q):
        chain_ids.append(encode_units((q - i, i), q - i, 0))
    chain_ids.append(d_id)
    for cid in chain_ids:
        if cid not in pos:
            raise AlgebraError("designated element fell outside the good set")
    lhs_chain = [pos[cid] for cid in chain_ids]
    a_loc, d_loc = lhs_chain[0], lhs_chain[-1]
    c_loc = lhs_chain[1] if q == 2 else None

    witness = SharpnessWitness(
        params, product, roles, good, alpha, beta, gamma,
        a_loc, d_loc, c_loc, lhs_chain,
    )
    _check_lhs_chain(witness)
    return witness


def _check_lhs_chain(w: SharpnessWitness) -> None:
    """The designated chain must realise membership of (a, d) on the left side:
    alpha on the endpoints, then beta, alternating meets, trailing swap."""
    q = w.params.q
    if not w.alpha.related(w.a, w.d):
        raise AlgebraError("endpoints are not alpha-related")
    rels = [w.beta]
    for i in range(q - 2):
        base = w.gamma if i % 2 == 0 else w.beta
        rels.append(partition_meet(w.alpha, base))
    rels.append(w.gamma if q % 2 == 0 else w.beta)
    for i, rel in enumerate(rels):
        if not rel.related(w.lhs_chain[i], w.lhs_chain[i + 1]):
            raise AlgebraError(f"left-side chain breaks at step {i}")


# ---------------------------------------------------------------------------
# canonical alternating chain (q = 2)


def canonical_witness_chain(w: SharpnessWitness) -> list[int]:
    """The forced alternating path from a to d for q = 2, as local indices.

    Moves, one coordinate at a time: each pair's first component steps down
    q -> .. -> 0 in pair order, then the half (odd m) steps down, then each
    pair's second component steps up 0 -> .. -> q in reverse pair order.
    Consecutive elements alternate between the two meet relations, which is
    re-verified here.
    """
    if w.params.q != 2:
        raise AlgebraError("the printed chain is the q = 2 case; use the path search")
    roles = w.factor_roles
    coords = list(w.coords_of_local(w.a))
    moves: list[tuple[int, int]] = []
    firsts = [i for i, r in enumerate(roles) if r["role"] == "pair-first"]
    for i in firsts:
        moves += [(i, 1), (i, 0)]
    if roles[-2]["role"] == "half":
        moves += [(len(roles) - 2, 1), (len(roles) - 2, 0)]
    for i in reversed(firsts):
        moves += [(i + 1, 1), (i + 1, 2)]
    path = [w.a]
    for pos_i, val in moves:
        coords[pos_i] = val
        path.append(w.local_of_product(w.product.indexing.encode(coords)))
    if path[-1] != w.d:
        raise AlgebraError("canonical chain did not land on d")
    ab = partition_meet(w.alpha, w.beta)
    ag = partition_meet(w.alpha, w.gamma)
    for s in range(len(path) - 1):
        rel = ab if s % 2 == 0 else ag
        if not rel.related(path[s], path[s + 1]):
            raise AlgebraError(f"canonical chain breaks alternation at step {s}")
    return path


# ---------------------------------------------------------------------------
# bundled verification used by the CLI and the acceptance suite


def sharpness_report(m: int, q: int, *, tuple_cap: int = 4_000_000) -> dict:
    """Build the witness and collect every checkable claim about it."""
    w = build_sharpness_witness(m, q, tuple_cap=tuple_cap)
    ident = check_identity(
        "wedge-power", w.alpha, w.beta, w.gamma, m=m, q=q, pair=(w.a, w.d)
    )
    report = {
        "m": m,
        "q": q,
        "product_size": w.product.size,
        "subuniverse_size": w.size,
        "subuniverse_ok": True,  # build_sharpness_witness verified closure
        "pair": [w.a, w.d],
        "pair_product_ids": [w.good_ids[w.a], w.good_ids[w.d]],
        "lhs_chain": w.lhs_chain,
        "identity": ident.to_obj(),
    }
    ab = partition_meet(w.alpha, w.beta)
    ag = partition_meet(w.alpha, w.gamma)
    if q == 2:
        canonical = canonical_witness_chain(w)
        found = shortest_alternating_chain(
            w.a, w.d, rel_of_partition(ab), rel_of_partition(ag), cap=4 * m
        )
        path, factors = found if found else (None, None)
        report["chains"] = {
            "canonical_chain": canonical,
            "bfs_chain": path,
            "bfs_factors": factors,
            "bfs_matches_canonical": path == canonical,
            "ab_chain_2m5": check_identity(
                "dist", w.alpha, w.beta, w.gamma, n=2 * m - 5, pair=(w.a, w.d)
            ).to_obj(),
            "ag_chain_2m4": check_identity(
                "alvin", w.alpha, w.beta, w.gamma, n=2 * m - 4, pair=(w.a, w.d)
            ).to_obj(),
            "ab_chain_2m4": check_identity(
                "dist", w.alpha, w.beta, w.gamma, n=2 * m - 4, pair=(w.a, w.d)
            ).to_obj(),
        }
    if q % 2 == 1:
        report["odd_equivalent"] = check_identity(
            "wedge-power-odd", w.alpha, w.beta, w.gamma, m=m, q=q, pair=(w.a, w.d)
        ).to_obj()
    return report
