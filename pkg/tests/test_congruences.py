import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from finalg.algebras import AlgebraError, make_chain_lattice, make_ujm_reduct, direct_product
from finalg.congruences import (
    Partition,
    congruence_generated,
    induced_product_congruence,
    is_congruence,
    partition_join,
    partition_meet,
    restrict_partition,
)
from finalg.witnesses import staircase_partitions

from conftest import all_partitions


def test_partition_canonical():
    p = Partition((5, 5, 2, 2, 5))
    assert p.block_id == (0, 0, 1, 1, 0)
    q = Partition.from_blocks(5, [[2, 3], [0, 1, 4]])
    assert p == q
    assert p.n_blocks == 2 and p.size == 5


def test_partition_bounds():
    assert Partition.zero(4).n_blocks == 4
    assert Partition.one(4).n_blocks == 1


def test_partition_from_blocks_validation():
    with pytest.raises(AlgebraError):
        Partition.from_blocks(3, [[0, 1]])
    with pytest.raises(AlgebraError):
        Partition.from_blocks(3, [[0, 1], [1, 2]])


def test_partition_json_roundtrip():
    p = Partition.from_blocks(5, [[4, 2], [0], [1, 3]])
    obj = p.to_obj()
    assert obj["blocks"] == [[0], [1, 3], [2, 4]]  # sorted by least element
    assert Partition.from_obj(obj) == p


def test_congruence_generated_empty():
    c3 = make_chain_lattice(3)
    assert congruence_generated(c3, []) == Partition.zero(3)


def test_congruence_generated_chain():
    c3 = make_chain_lattice(3)
    assert congruence_generated(c3, [(0, 1)]).blocks() == [[0, 1], [2]]
    assert congruence_generated(c3, [(0, 2)]) == Partition.one(3)  # gaps collapse


def brute_least_congruence(alg, pairs):
    best = None
    for ids in all_partitions(alg.size):
        part = Partition(ids)
        if not all(part.related(a, b) for a, b in pairs):
            continue
        if not is_congruence(alg, part)[0]:
            continue
        if best is None or _finer(part, best):
            best = part
    return best


def _finer(p, q):
    seen = {}
    for pb, qb in zip(p.block_id, q.block_id):
        if seen.setdefault(pb, qb) != qb:
            return False
    return True


@pytest.mark.parametrize("size", [3, 4, 5])
def test_congruence_generated_vs_exhaustive(size):
    alg = make_chain_lattice(size)
    rng = random.Random(97)
    for _ in range(12):
        pairs = [
            (rng.randrange(size), rng.randrange(size))
            for _ in range(rng.randrange(1, 3))
        ]
        assert congruence_generated(alg, pairs) == brute_least_congruence(alg, pairs)


def test_congruence_generated_is_congruence():
    alg = make_ujm_reduct(4, 2, 3)
    for pair in [(0, 1), (1, 3), (2, 3)]:
        part = congruence_generated(alg, [pair])
        assert is_congruence(alg, part)[0]


def test_is_congruence_identity_always():
    assert is_congruence(make_chain_lattice(4), Partition.zero(4))[0]


def test_is_congruence_interval_blocks_on_reducts():
    bs, gs = staircase_partitions(2)
    for m in (3, 4, 5):
        for j in range(2, (m + 1) // 2 + 1):
            alg = make_ujm_reduct(3, j, m)
            assert is_congruence(alg, bs)[0]
            assert is_congruence(alg, gs)[0]


def test_is_congruence_failure_witness():
    c3 = make_chain_lattice(3)
    bad = Partition.from_blocks(3, [[0, 2], [1]])
    ok, witness = is_congruence(c3, bad)
    assert not ok
    oi, pos, (x, y), rest, (vx, vy) = witness
    args_x = rest[:pos] + (x,) + rest[pos:]
    args_y = rest[:pos] + (y,) + rest[pos:]
    assert c3.ops[oi].apply(args_x) == vx and c3.ops[oi].apply(args_y) == vy
    assert bad.block_id[vx] != bad.block_id[vy]


def test_meet_with_top_and_join_with_bottom():
    p = Partition.from_blocks(4, [[0, 1], [2, 3]])
    assert partition_meet(p, Partition.one(4)) == p
    alg = make_chain_lattice(4)
    assert partition_join(alg, p, Partition.zero(4)) == p


def test_meet_and_join_of_staircases():
    bs, gs = staircase_partitions(2)
    assert partition_meet(bs, gs) == Partition.zero(3)
    alg = make_ujm_reduct(3, 2, 4)
    assert partition_join(alg, bs, gs) == Partition.one(3)


def test_join_rejects_non_congruence():
    c3 = make_chain_lattice(3)
    bad = Partition.from_blocks(3, [[0, 2], [1]])
    with pytest.raises(AlgebraError):
        partition_join(c3, bad, Partition.zero(3))


def test_join_vs_exhaustive_small():
    alg = make_chain_lattice(4)
    congruences = [
        Partition(ids)
        for ids in all_partitions(4)
        if is_congruence(alg, Partition(ids))[0]
    ]
    for p, q in itertools.product(congruences, repeat=2):
        join = partition_join(alg, p, q)
        above = [c for c in congruences if _finer(p, c) and _finer(q, c)]
        best = min(above, key=lambda c: -c.n_blocks)
        assert join == best


@settings(deadline=None, max_examples=60)
@given(st.data())
def test_partition_lattice_laws(data):
    n = data.draw(st.integers(2, 7))
    ids_p = data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    ids_q = data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    p, q = Partition(tuple(ids_p)), Partition(tuple(ids_q))
    assert partition_meet(p, p) == p
    assert partition_meet(p, q) == partition_meet(q, p)
    assert partition_meet(p, Partition.one(n)) == p
    assert partition_meet(p, Partition.zero(n)) == Partition.zero(n)


def test_induced_product_congruence():
    prod = direct_product([make_ujm_reduct(3, 2, 4), make_ujm_reduct(2, 2, 4)])
    bs, gs = staircase_partitions(2)
    sub = list(range(prod.size))
    alpha = induced_product_congruence(prod.indexing, [Partition.one(3), Partition.zero(2)], sub)
    # related iff the second coordinates agree
    dec = prod.indexing.decode_matrix()
    for x, y in itertools.combinations(range(len(sub)), 2):
        assert alpha.related(x, y) == (dec[x][1] == dec[y][1])
    with pytest.raises(AlgebraError):
        induced_product_congruence(prod.indexing, [Partition.one(3)], sub)
    with pytest.raises(AlgebraError):
        induced_product_congruence(prod.indexing, [Partition.one(3), Partition.zero(2)], [])


def test_induced_restriction_is_congruence_on_subalgebra():
    # restriction of a product congruence to a closed subset stays compatible
    from finalg.algebras import restrict_algebra

    m = 4
    power = direct_product([make_ujm_reduct(2, 2, m)] * (m - 1))
    subset = list(range(power.size - 1))
    sub = restrict_algebra(power, subset)
    parts = [Partition.one(2), Partition.zero(2), Partition.one(2)]
    induced = induced_product_congruence(power.indexing, parts, subset)
    assert is_congruence(sub, induced)[0]


def test_restrict_partition():
    p = Partition.from_blocks(5, [[0, 1], [2, 3, 4]])
    assert restrict_partition(p, [1, 3, 4]).blocks() == [[0], [1, 2]]
