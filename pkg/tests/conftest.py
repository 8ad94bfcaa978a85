import numpy as np
import pytest

from wseg import LabelSpace


@pytest.fixture
def space3():
    """Three foreground classes, four labels total."""
    return LabelSpace(("a", "b", "c"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
