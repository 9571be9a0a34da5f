"""Shared fixtures: small deterministic random instances."""

import numpy as np
import pytest

from schro_gsp.graph_core import FeatureLocations, Graph
from schro_gsp.verify import random_connected_graph, random_features, random_unit


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def path3():
    """Three-node path with unit weights and evenly spaced locations."""
    graph = Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    f = FeatureLocations.single([0.0, 1.0, 2.0])
    return graph, f


def make_instance(seed: int, n_features: int = 1, n_max: int = 24):
    """One random connected graph with features and a unit test vector."""
    gen = np.random.default_rng(seed)
    graph = random_connected_graph(gen, n_max=n_max)
    f = random_features(gen, graph.n_nodes, n_features)
    vec = random_unit(gen, graph.n_nodes)
    return graph, f, vec
