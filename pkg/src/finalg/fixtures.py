"""Named fixture registry for scripted sweeps.

Colon-delimited names:
  N:j:m        two-element chain reduct with the j-of-m subset operation
  Nq:j:m:s     the same over the chain with s elements
  C:s          the chain lattice with s elements (join and meet)
  I:m / If:m   implication-algebra reduct expanded by the m-ary operation
  sum:n:k      Z_n with the k-ary modular sum
  LD2          two-element algebra with ternary minority and 4-ary lone-dissent
  triv:m       one-element algebra with a single m-ary operation
"""

from __future__ import annotations

from .algebras import (
    AlgebraError,
    FiniteAlgebra,
    make_chain_lattice,
    make_ujm_reduct,
    one_element_algebra,
)
from .witnesses import dissent_pair_fixture, implication_expansion, modular_sum_algebra


def load_fixture(name: str) -> FiniteAlgebra:
    parts = name.split(":")
    kind = parts[0]
    try:
        if kind == "N" and len(parts) == 3:
            return make_ujm_reduct(2, int(parts[1]), int(parts[2]))
        if kind == "triv" and len(parts) == 2:
            return one_element_algebra(int(parts[1]))
        if kind == "Nq" and len(parts) == 4:
            return make_ujm_reduct(int(parts[3]), int(parts[1]), int(parts[2]))
        if kind == "C" and len(parts) == 2:
            return make_chain_lattice(int(parts[1]))
        if kind == "I" and len(parts) == 2:
            return implication_expansion(int(parts[1]), "i")
        if kind == "If" and len(parts) == 2:
            return implication_expansion(int(parts[1]), "f")
        if kind == "sum" and len(parts) == 3:
            return modular_sum_algebra(int(parts[1]), int(parts[2]))
        if kind == "LD2" and len(parts) == 1:
            return dissent_pair_fixture()
    except ValueError as exc:
        raise AlgebraError(f"bad fixture name {name!r}: {exc}") from None
    raise AlgebraError(f"unknown fixture {name!r}")


def load_fixtures(names: str) -> list[FiniteAlgebra]:
    """Comma-separated list of fixture names."""
    return [load_fixture(n.strip()) for n in names.split(",") if n.strip()]
