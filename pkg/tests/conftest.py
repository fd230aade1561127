# tests/conftest.py
import numpy as np
import pytest
from sqlalchemy.pool import StaticPool
from sqlmodel import Session, create_engine

from db.session import create_db_and_tables
from instances.generators import maxcut, random_simple_instance
from instances.graphs import random_graph
from mc.problem import mc_generate
from sdp.model import StandardFormSDP


@pytest.fixture
def engine():
    engine = create_engine(
        "sqlite://", connect_args={"check_same_thread": False}, poolclass=StaticPool
    )
    create_db_and_tables(engine)
    return engine


@pytest.fixture
def session(engine):
    with Session(engine) as session:
        yield session


@pytest.fixture
def two_by_two():
    """minimize 2 X_12 s.t. X_11 = X_22 = 1; optimum -2 at X = [[1, -1], [-1, 1]]."""
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    return StandardFormSDP.from_triplets(C, [(0, 0, 0, 1.0), (1, 1, 1, 1.0)], [1.0, 1.0], label="2x2")


@pytest.fixture
def simple_instance():
    return random_simple_instance(5, 2, seed=3)


@pytest.fixture
def small_maxcut():
    return maxcut(random_graph(12, 0.5, seed=1), label="maxcut-12")


@pytest.fixture
def full_mc():
    return mc_generate(6, 6, 2, 1.0, seed=4)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
