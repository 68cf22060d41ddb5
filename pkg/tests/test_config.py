from __future__ import annotations

import logging

import pytest

from config import DevelopmentConfig, ProductionConfig, TestingConfig, get_config_class
from logging_config import configure_logging
from services import build_services


@pytest.mark.parametrize(
    ("env", "expected"),
    [
        ("production", ProductionConfig),
        ("testing", TestingConfig),
        ("development", DevelopmentConfig),
        ("anything-else", DevelopmentConfig),
    ],
)
def test_get_config_class(monkeypatch, env, expected):
    monkeypatch.setenv("APP_ENV", env)
    assert get_config_class() is expected


def test_testing_config_disables_async():
    assert TestingConfig.ASYNC_TASKS_ENABLED is False


class TestBuildServices:
    def test_defaults(self):
        services = build_services(TestingConfig)
        assert services.intrinsics.width == 512
        assert services.label_spec.shape == (128, 128, 9)
        assert services.template.side == pytest.approx(0.1)
        assert services.geometry.max_width == pytest.approx(0.10)
        assert services.generator.density == TestingConfig.TRAIN_DENSITY

    def test_rejects_unknown_normalization(self):
        class BadConfig(TestingConfig):
            OFFSET_NORMALIZATION = "sqrt"

        with pytest.raises(ValueError):
            build_services(BadConfig)

    def test_rejects_indivisible_label_grid(self):
        class BadConfig(TestingConfig):
            LABEL_DOWNSAMPLE = 5

        with pytest.raises(ValueError):
            build_services(BadConfig)


def test_configure_logging_quiets_celery():
    configure_logging("debug")
    assert logging.getLogger().level == logging.DEBUG
    assert logging.getLogger("celery").level == logging.WARNING
    configure_logging("INFO")
