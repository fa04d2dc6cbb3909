import itertools

import numpy as np
import pytest

from finalg.witnesses import build_sharpness_witness, sharpness_report

_WITNESSES = {}
_REPORTS = {}


@pytest.fixture(scope="session")
def witness_cache():
    """Sharpness witnesses are expensive at m = 8; build each once."""

    def get(m, q):
        if (m, q) not in _WITNESSES:
            _WITNESSES[(m, q)] = build_sharpness_witness(m, q)
        return _WITNESSES[(m, q)]

    return get


@pytest.fixture(scope="session")
def report_cache():
    def get(m, q):
        if (m, q) not in _REPORTS:
            _REPORTS[(m, q)] = sharpness_report(m, q)
        return _REPORTS[(m, q)]

    return get


# ---------------------------------------------------------------------------
# shared oracles


def subset_formula_table(chain_size: int, j: int, m: int) -> np.ndarray:
    """Oracle for the subset operation: min over all j-subsets of the max."""
    count = chain_size**m
    idx = np.arange(count, dtype=np.int64)
    cols = np.empty((m, count), dtype=np.int64)
    for pos in range(m - 1, -1, -1):
        cols[pos] = idx % chain_size
        idx //= chain_size
    best = np.full(count, chain_size, dtype=np.int64)
    for subset in itertools.combinations(range(m), j):
        best = np.minimum(best, np.max(cols[list(subset)], axis=0))
    return best


def all_partitions(n: int):
    """Every set-partition of 0..n-1, as block-id tuples (restricted growth)."""
    out = []

    def grow(prefix, blocks):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for b in range(blocks + 1):
            grow(prefix + [b], max(blocks, b + 1))

    grow([], 0)
    return out
