import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from marginbound.errors import NoEligibleMarginError
from marginbound.model import (
    MarginSpec,
    ModelSpec,
    Provenance,
    Query,
    Regime,
    RegimeTable,
    WeakEdgeSpec,
    select_margin_for_query,
    validate_model,
)


class TestRegime:
    def test_identity_ignores_construction_order(self):
        a = Regime(((2, 1), (0, 0)))
        b = Regime(((0, 0), (2, 1)))
        assert a == b
        assert hash(a) == hash(b)

    @given(st.dictionaries(st.integers(0, 7), st.integers(0, 1), max_size=5))
    def test_do_roundtrip(self, assignments):
        r = Regime.do(assignments)
        assert r.as_dict() == assignments
        assert r == Regime.from_json_dict(r.to_json_dict())

    def test_double_intervention_rejected(self):
        with pytest.raises(ValueError):
            Regime(((1, 0), (1, 1)))

    def test_merge_conflict(self):
        with pytest.raises(ValueError):
            Regime.do({1: 0}).merged_with(Regime.do({1: 1}))

    def test_label(self):
        assert Regime.do({}).label() == "do()"
        assert Regime.do({1: 0, 2: 1}).label() == "do(x2=0,x3=1)"


class TestRegimeTable:
    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            RegimeTable(Regime.do({}), np.array([0.5, 0.5, 0.5, 0.5]))

    def test_rejects_contradiction_cells(self):
        probs = np.array([0.5, 0.5, 0.0, 0.0])  # code bit 0 is variable 0
        with pytest.raises(ValueError):
            RegimeTable(Regime.do({0: 1}), probs)

    def test_point_mass_on_intervened(self):
        probs = np.array([0.0, 0.7, 0.0, 0.3])
        t = RegimeTable(Regime.do({0: 1}), probs)
        assert t.event_prob({0: 1}) == 1.0
        assert t.event_prob({0: 0}) == 0.0

    def test_conditional(self):
        probs = np.array([0.42, 0.04, 0.18, 0.36])
        t = RegimeTable(Regime.do({}), probs)
        assert t.conditional_prob({1: 1}, {0: 1}) == pytest.approx(0.9)
        assert t.conditional_prob({1: 1}, {0: 0}) == pytest.approx(0.3)

    def test_json_roundtrip(self):
        t = RegimeTable(Regime.do({1: 0}), np.array([0.25, 0.25, 0.0, 0.0, 0.25, 0.25, 0.0, 0.0]),
                        Provenance("empirical", 100))
        back = RegimeTable.from_json_dict(json.loads(json.dumps(t.to_json_dict())))
        assert back.regime == t.regime
        assert np.array_equal(back.probs, t.probs)
        assert back.provenance == t.provenance


def margins_n4():
    return (
        MarginSpec(id=1, vars=(0, 1, 2)),
        MarginSpec(id=2, vars=(0, 1, 3)),
        MarginSpec(id=3, vars=(0, 2, 3)),
        MarginSpec(id=4, vars=(1, 2, 3)),
    )


class TestValidateModel:
    def test_well_formed(self):
        spec = ModelSpec(
            4,
            (MarginSpec(id=1, vars=(0, 1, 2)), MarginSpec(id=2, vars=(1, 2, 3))),
            coherence_pairs=((1, 2, (1, 2)),),
        )
        assert validate_model(spec) == []

    def test_overlap_not_contained(self):
        spec = ModelSpec(
            4,
            (MarginSpec(id=1, vars=(0, 1)), MarginSpec(id=2, vars=(1, 3))),
            coherence_pairs=((1, 2, (0, 3)),),
        )
        assert any("overlap not contained" in d for d in validate_model(spec))

    def test_weak_edge_order(self):
        spec = ModelSpec(
            4,
            margins_n4(),
            weak_edges=(WeakEdgeSpec("directed", 3, 0, 0.5, margins=(2,)),),
        )
        assert any("down causal order" in d for d in validate_model(spec))

    def test_total_on_garbage(self):
        spec = ModelSpec(
            0,
            (MarginSpec(id=1, vars=(5, 2)), MarginSpec(id=1, vars=())),
            coherence_pairs=((1, 9, (0,)),),
            weak_edges=(WeakEdgeSpec("sideways", 2, 2, 7.0),),
        )
        diags = validate_model(spec)  # must not raise
        assert len(diags) >= 5

    def test_scope_rules(self):
        bad = ModelSpec(3, (MarginSpec(id=1, vars=(1, 2), scope_vars=(2,), scope_values=((0,),)),))
        assert any("scope" in d for d in validate_model(bad))
        missing_values = ModelSpec(3, (MarginSpec(id=1, vars=(1, 2), scope_vars=(0,)),))
        assert any("scope_values" in d for d in validate_model(missing_values))
        ok = ModelSpec(3, (MarginSpec(id=1, vars=(1, 2), scope_vars=(0,), scope_values=((0,), (1,))),))
        assert validate_model(ok) == []


class TestSelectMargin:
    def test_paper_example(self):
        spec = ModelSpec(4, margins_n4())
        q = Query(kind="prob", target=3, value=1, regime=Regime.do({0: 0}))
        assert select_margin_for_query(spec, q).id == 2

    def test_lowest_id(self):
        spec = ModelSpec(4, margins_n4())
        q = Query(kind="prob", target=1, value=1)
        assert select_margin_for_query(spec, q).id == 1

    def test_no_eligible(self):
        spec = ModelSpec(4, (MarginSpec(id=1, vars=(0, 1)),))
        q = Query(kind="prob", target=3, value=1)
        with pytest.raises(NoEligibleMarginError):
            select_margin_for_query(spec, q)

    def test_explicit_margin_checked(self):
        spec = ModelSpec(4, margins_n4())
        q = Query(kind="prob", target=3, value=1, margin_id=1)
        with pytest.raises(NoEligibleMarginError):
            select_margin_for_query(spec, q)


def test_model_json_roundtrip():
    spec = ModelSpec(
        4,
        margins_n4(),
        coherence_pairs=((1, 2, (0, 1)),),
        weak_edges=(WeakEdgeSpec("bidirected", 0, 3, 0.25, margins=(2, 3)),),
        regimes_available=(Regime.do({}), Regime.do({1: 1})),
    )
    back = ModelSpec.from_json_dict(json.loads(json.dumps(spec.to_json_dict())))
    assert back == spec


def test_query_json_roundtrip():
    q1 = Query(kind="prob", target=3, value=0, regime=Regime.do({0: 1}))
    q2 = Query(kind="ate", target=3, treatment=0, base_regime=Regime.do({2: 1}), margin_id=3)
    for q in (q1, q2):
        assert Query.from_json_dict(json.loads(json.dumps(q.to_json_dict()))) == q


def test_query_labels():
    assert Query(kind="prob", target=3, value=1, regime=Regime.do({0: 0})).label() == "P(x4=1|do(x1=0))"
    assert (
        Query(kind="ate", target=3, treatment=0).label() == "ATE(x4~x1|do())"
    )
