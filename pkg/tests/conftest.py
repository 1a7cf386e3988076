"""Shared fixtures: small synthetic datasets and cheap hyperparameter tables."""

import numpy as np
import pytest

from meritopt.design_space import DesignSpace, denormalize_batch
from meritopt.evaluators import VirtualEngine


@pytest.fixture(scope="session")
def space():
    return DesignSpace()


@pytest.fixture(scope="session")
def engine(space):
    return VirtualEngine(space)


def make_engine_data(n: int, seed: int, space: DesignSpace | None = None):
    """Random designs (engineering units) and their five true outputs."""
    space = space or DesignSpace()
    rng = np.random.default_rng(seed)
    U = rng.random((n, len(space)))
    X = denormalize_batch(space, U)
    U_dec = (X - space._lower) / space._span
    Y = np.column_stack(VirtualEngine.outputs(U_dec))
    return X, Y


def cheap_hyperparams():
    """Small per-learner settings so ensemble tests stay fast."""
    return {
        "rpr": {"alpha": 1e-6, "degree": 2},
        "svr": {"nu": 0.5, "c": 1.0, "gamma": 1.0 / 9.0},
        "krr": {"alpha": 1e-6, "gamma": 1.0 / 9.0},
        "gbt": {"n_trees": 60, "learning_rate": 0.1, "max_depth": 3},
        "mlp": {"width": 16, "alpha": 1e-4, "tol": 1e-3},
    }


def cheap_table(targets=("isfc", "m_soot", "m_nox", "mprr", "pmax")):
    return {t: cheap_hyperparams() for t in targets}
