import pytest

from brownloop import hkernel
from brownloop.doob import RelativizedSpace


@pytest.fixture(scope="session")
def h3():
    return hkernel.make_model("h3")


@pytest.fixture(scope="session")
def h2():
    return hkernel.make_model("h2")


@pytest.fixture(scope="session")
def space3(h3):
    return RelativizedSpace(h3)


@pytest.fixture(scope="session")
def space2(h2):
    return RelativizedSpace(h2)
