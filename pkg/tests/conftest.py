import hypothesis
import pytest

import splitwire as sw

hypothesis.settings.register_profile("ci", max_examples=40, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture(scope="session")
def resnet34_cifar():
    return sw.build_resnet(34, "cifar", 100)


@pytest.fixture(scope="session")
def resnet18_cifar10():
    return sw.build_resnet(18, "cifar", 10)


@pytest.fixture(scope="session")
def sp2_model(resnet34_cifar):
    return sw.apply_split(resnet34_cifar, "SP-2", 1024, 2)


@pytest.fixture(scope="session")
def small_split(resnet18_cifar10):
    # cheap end-to-end fixture for pipeline/wire tests
    return sw.apply_split(resnet18_cifar10, "SP-2", 256, 2)


@pytest.fixture(scope="session")
def small_weights(small_split):
    return sw.random_weights(small_split, seed=11)
