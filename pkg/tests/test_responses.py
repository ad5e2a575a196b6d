import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from marginbound.errors import RegimeOutsideMarginError, UnsupportedArityError
from marginbound.model import MarginSpec, Regime
from marginbound.responses import (
    ResponseSpace,
    eval_response,
    outcome_codes,
    propagate,
    response_space_size,
)


def brute_force_function_count(k: int) -> int:
    """Oracle: count distinct output vectors over all boolean functions."""
    tables = set()
    for idx in range(1 << (1 << k)):
        outputs = tuple((idx >> c) & 1 for c in range(1 << k))
        tables.add(outputs)
    return len(tables)


class TestResponseSpaceSize:
    def test_k0(self):
        assert response_space_size(0) == 2

    def test_k2(self):
        assert response_space_size(2) == 16

    def test_k3_matches_enumeration(self):
        assert response_space_size(3) == brute_force_function_count(3) == 256

    def test_arity_cap(self):
        assert response_space_size(5) == 1 << 32
        with pytest.raises(UnsupportedArityError):
            response_space_size(6)


class TestEvalResponse:
    def test_constant_zero(self):
        for parents in itertools.product((0, 1), repeat=3):
            assert eval_response(0, parents) == 0

    def test_constant_one_k1(self):
        assert eval_response(3, [0]) == 1
        assert eval_response(3, [1]) == 1

    def test_xor_truth_table(self):
        # index 6 = 0110: bit c for configuration c = p0 + 2*p1
        assert eval_response(6, [0, 0]) == 0
        assert eval_response(6, [1, 0]) == 1
        assert eval_response(6, [0, 1]) == 1
        assert eval_response(6, [1, 1]) == 0

    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_exhaustive(self, k):
        seen = set()
        for idx in range(response_space_size(k)):
            outputs = tuple(
                eval_response(idx, list(cfg)) for cfg in itertools.product((0, 1), repeat=k)
            )
            seen.add(outputs)
        assert len(seen) == response_space_size(k)


MARGIN3 = MarginSpec(id=1, vars=(0, 1, 2))


class TestMixedRadix:
    def test_space_shape(self):
        sp = ResponseSpace.for_margin(MARGIN3)
        assert sp.per_var_parent_counts == (0, 1, 2)
        assert sp.per_var_radix == (2, 4, 16)
        assert sp.total_size == 128

    def test_roundtrip_all(self):
        sp = ResponseSpace.for_margin(MARGIN3)
        for r in range(sp.total_size):
            assert sp.encode(sp.decode(r)) == r

    @given(st.tuples(st.integers(0, 1), st.integers(0, 3), st.integers(0, 15)))
    def test_roundtrip_digits(self, digits):
        sp = ResponseSpace.for_margin(MARGIN3)
        assert sp.decode(sp.encode(digits)) == digits

    def test_digit_out_of_radix(self):
        with pytest.raises(ValueError):
            ResponseSpace.for_margin(MARGIN3).encode((2, 0, 0))


class TestPropagate:
    # joint index encoding (constant-1, identity, AND): identity on one
    # parent is truth table 10 = index 2; AND on two parents is index 8
    R = ResponseSpace.for_margin(MARGIN3).encode((1, 2, 8))

    def test_observational(self):
        assert propagate(self.R, MARGIN3, Regime.do({})) == (1, 1, 1)

    def test_forced_middle(self):
        assert propagate(self.R, MARGIN3, Regime.do({1: 0})) == (1, 0, 0)

    def test_full_intervention_screens_everything(self):
        regime = Regime.do({0: 0, 1: 1, 2: 0})
        sp = ResponseSpace.for_margin(MARGIN3)
        for r in range(sp.total_size):
            assert propagate(r, MARGIN3, regime) == (0, 1, 0)

    def test_regime_outside_margin(self):
        with pytest.raises(RegimeOutsideMarginError):
            propagate(0, MARGIN3, Regime.do({5: 1}))

    def test_composition_two_var_margin(self):
        """All 8 joint indices x 3 regimes against direct truth-table evaluation."""
        margin = MarginSpec(id=1, vars=(0, 1))
        sp = ResponseSpace.for_margin(margin)
        regimes = [Regime.do({}), Regime.do({0: 0}), Regime.do({0: 1})]
        for r in range(sp.total_size):
            da, db = sp.decode(r)
            for regime in regimes:
                a = regime.value_of(0)
                if a is None:
                    a = da  # 0-parent table: bit 0 of the index
                b = (db >> a) & 1
                assert propagate(r, margin, regime) == (a, b)


def test_outcome_codes_match_scalar_propagate():
    regimes = [Regime.do({}), Regime.do({1: 1}), Regime.do({0: 0, 2: 1})]
    for regime in regimes:
        codes = outcome_codes(MARGIN3, regime)
        assert codes.shape == (128,)
        for r in range(0, 128, 7):
            vals = propagate(r, MARGIN3, regime)
            assert codes[r] == sum(v << t for t, v in enumerate(vals))
