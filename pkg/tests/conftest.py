import pytest

from recencytrial.config import load_config


@pytest.fixture(scope="session")
def msm_cfg():
    return load_config("msm")


@pytest.fixture(scope="session")
def women_cfg():
    return load_config("women")


@pytest.fixture(scope="session")
def msm_ctx(msm_cfg):
    return msm_cfg.context(1.0)


@pytest.fixture(scope="session")
def women_ctx(women_cfg):
    return women_cfg.context(1.0)


@pytest.fixture(scope="session")
def hyp(msm_cfg):
    return msm_cfg.hypothesis()
