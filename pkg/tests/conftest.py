import numpy as np
import pytest

from sympcocycle.base import CatMap, ConstantRoof, CosineBumpRoof


@pytest.fixture(scope="session")
def cat():
    return CatMap()


@pytest.fixture(scope="session")
def roof2():
    return ConstantRoof(2.0)


@pytest.fixture(scope="session")
def bump_roof():
    return CosineBumpRoof(2.0, 0.5)


@pytest.fixture(autouse=True)
def _fixed_print_options():
    with np.printoptions(precision=6, suppress=True):
        yield
