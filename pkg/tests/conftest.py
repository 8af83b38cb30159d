"""Shared fixtures: a small synthetic world and the statistics over it."""
import os

import hypothesis
import numpy as np
import pytest

from cohort import CohortStats, build_synthetic_world
from ontology import build_lexicon
from plugins.ports import HashEmbedder

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def world():
    return build_synthetic_world(n_patients=600, n_concepts=150, seed=7)


@pytest.fixture(scope="session")
def ontology(world):
    return world[0]


@pytest.fixture(scope="session")
def records(world):
    return world[1]


@pytest.fixture(scope="session")
def cohort(ontology, records):
    return CohortStats(records, ontology, min_support=5)


@pytest.fixture(scope="session")
def lexicon(ontology):
    return build_lexicon(ontology)


@pytest.fixture(scope="session")
def embedder():
    return HashEmbedder(dimension=64, buckets=512, seed=7)
