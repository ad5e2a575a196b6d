import numpy as np
import pytest
from hypothesis import settings

from marginbound.model import MarginSpec, ModelSpec, Regime, RegimeTable
from marginbound.presets import paper_n4_model
from marginbound.simulate import sample_scm, true_regime_table

settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


def two_var_table(p_a1: float, p_b1_a1: float, p_b1_a0: float) -> RegimeTable:
    """Observational table over (A, B) with code = A + 2B."""
    probs = np.zeros(4)
    probs[0] = (1 - p_a1) * (1 - p_b1_a0)
    probs[1] = p_a1 * (1 - p_b1_a1)
    probs[2] = (1 - p_a1) * p_b1_a0
    probs[3] = p_a1 * p_b1_a1
    return RegimeTable(Regime.do({}), probs)


@pytest.fixture(scope="session")
def manski_table() -> RegimeTable:
    return two_var_table(0.5, 0.8, 0.4)


@pytest.fixture(scope="session")
def two_var_spec() -> ModelSpec:
    return ModelSpec(2, (MarginSpec(id=1, vars=(0, 1)),))


@pytest.fixture(scope="session")
def n4_spec() -> ModelSpec:
    return paper_n4_model()


@pytest.fixture(scope="session")
def n4_scm():
    return sample_scm(seed=7, n=4, c=2)


@pytest.fixture(scope="session")
def n4_tables(n4_spec, n4_scm):
    return [true_regime_table(n4_scm, r) for r in n4_spec.regimes_available]
