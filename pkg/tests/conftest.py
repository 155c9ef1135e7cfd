"""Shared fixtures: a small twin-pair world sized for fast unit tests.

The acceptance suite builds its own fixtures at the documented default
resolutions; everything here trades grid density for speed while keeping the
same structure (twin objects, per-object codebooks, ambiguity tables).
"""

import numpy as np
import pytest

from viewrank import ambiguity, so3
from viewrank.codebook import build_codebook
from viewrank.synthworld import make_ambiguous_pair


@pytest.fixture(scope="session")
def pair():
    return make_ambiguous_pair(0)


@pytest.fixture(scope="session")
def codebook_grid():
    return so3.build_view_grid(384, 8)


@pytest.fixture(scope="session")
def codebooks(pair, codebook_grid):
    a, b = pair
    return [build_codebook(a, codebook_grid), build_codebook(b, codebook_grid)]


@pytest.fixture(scope="session")
def coarse_grid():
    return so3.build_view_grid(96, 1)


@pytest.fixture(scope="session")
def coarse_grid_small():
    return so3.build_view_grid(24, 1)


@pytest.fixture(scope="session")
def tables(pair, codebooks, coarse_grid):
    a, b = pair
    return {
        "A": ambiguity.rank_object(a, [b], [codebooks[1]], coarse_grid, 16),
        "B": ambiguity.rank_object(b, [a], [codebooks[0]], coarse_grid, 16),
    }


@pytest.fixture(scope="session")
def hidden_rotation(pair):
    """A rotation from which no differing blob is visible (views -patch_center)."""
    a, _ = pair
    center = np.asarray(a.meta["patch_center"], dtype=float)
    return so3.look_at(-center)


@pytest.fixture(scope="session")
def visible_rotation(pair):
    """A rotation viewing the patch head-on."""
    a, _ = pair
    center = np.asarray(a.meta["patch_center"], dtype=float)
    return so3.look_at(center)
