from fractions import Fraction

import pytest

from kaicg.complexity import ALGORITHMS, ComplexityQuery, multiplication_count, multiplication_count_exact
from kaicg.errors import DomainError, ValidationError


def count(alg, m=12, n=100, p=2, delta=0.2, tau=11):
    return multiplication_count_exact(ComplexityQuery(alg, m, n, p, delta, tau))


def test_hand_evaluated_rows():
    # 900 * (144 + 0 - 2) + 8 * 12 * 100^2
    assert count("MUSIC") == 1_087_800
    # 2*144*2 + 12*(4 - 4 + 80000) + 64 - 4
    assert count("ESPRIT") == 960_636
    assert count("Root-MUSIC") == 2 * 12 ** 3 - 144 * 2 + 8 * 12 * 100 ** 2
    # 900 * (144*3 + 12*14 + 3) + 144*100
    assert count("CG") == 900 * 603 + 14_400


def test_grid_uses_exact_step():
    assert count("CG", delta=0.1) == 1800 * 603 + 14_400


def test_kai_variants_share_a_formula():
    for m in range(5, 101):
        assert count("MS-KAI-CG", m=m, p=4) == count("MS-KAI-CG-FB", m=m, p=4)


def test_every_algorithm_counts_positive():
    for alg in ALGORITHMS:
        value = count(alg)
        assert isinstance(value, Fraction) and value > 0
        assert multiplication_count(ComplexityQuery(alg, 12, 100, 2)) == float(value)


def test_kai_dominates_cg_and_grows_with_tau():
    assert count("MS-KAI-CG") > count("CG")
    assert count("MS-KAI-CG", tau=21) > count("MS-KAI-CG", tau=11)


def test_invalid_queries():
    with pytest.raises(DomainError):
        count("Capon")
    with pytest.raises(ValidationError):
        ComplexityQuery("CG", 0, 100, 2)
    with pytest.raises(ValidationError):
        ComplexityQuery("CG", 12, 100, 2, tau=1)
