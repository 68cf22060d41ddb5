"""Environment-driven configuration values for graspkit."""

from __future__ import annotations

import os


class BaseConfig:
    ENV = os.getenv("APP_ENV", "development").lower()
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

    SEED = int(os.getenv("GRASPKIT_SEED", "0"))
    THREADS = int(os.getenv("GRASPKIT_THREADS", "1"))

    CAMERA_WIDTH = int(os.getenv("CAMERA_WIDTH", "512"))
    CAMERA_HEIGHT = int(os.getenv("CAMERA_HEIGHT", "512"))
    CAMERA_FX = float(os.getenv("CAMERA_FX", "550"))
    CAMERA_FY = float(os.getenv("CAMERA_FY", "550"))
    CAMERA_CX = float(os.getenv("CAMERA_CX", "256"))
    CAMERA_CY = float(os.getenv("CAMERA_CY", "256"))

    LABEL_DOWNSAMPLE = int(os.getenv("LABEL_DOWNSAMPLE", "4"))
    ORIENTATION_BINS = int(os.getenv("ORIENTATION_BINS", "9"))
    MAX_GRIPPER_WIDTH = float(os.getenv("MAX_GRIPPER_WIDTH", "0.10"))
    KEYPOINT_SIDE = float(os.getenv("KEYPOINT_SIDE", "0.1"))
    OFFSET_NORMALIZATION = os.getenv("OFFSET_NORMALIZATION", "divide").lower()

    TRAIN_DENSITY = int(os.getenv("TRAIN_DENSITY", "6"))
    TEST_DENSITY = int(os.getenv("TEST_DENSITY", str(2 * TRAIN_DENSITY)))
    VIEWS_PER_SCENE = int(os.getenv("VIEWS_PER_SCENE", "5"))
    CLOUD_POINTS_PER_OBJECT = int(os.getenv("CLOUD_POINTS_PER_OBJECT", "2048"))
    DEPTH_NOISE_STD = float(os.getenv("DEPTH_NOISE_STD", "0.0"))
    DEPTH_DROPOUT = float(os.getenv("DEPTH_DROPOUT", "0.0"))

    PEAK_THRESHOLD = float(os.getenv("PEAK_THRESHOLD", "0.3"))
    FEASIBILITY_MIN_POINTS = int(os.getenv("FEASIBILITY_MIN_POINTS", "10"))
    SCORE_PENALTY = float(os.getenv("SCORE_PENALTY", "0.05"))

    ASYNC_TASKS_ENABLED = os.getenv("ASYNC_TASKS_ENABLED", "false").lower() == "true"
    CELERY_BROKER_URL = os.getenv("CELERY_BROKER_URL", "redis://localhost:6379/0")
    CELERY_RESULT_BACKEND = os.getenv("CELERY_RESULT_BACKEND", CELERY_BROKER_URL)
    CELERY_TASK_ALWAYS_EAGER = (
        os.getenv("CELERY_TASK_ALWAYS_EAGER", "false").lower() == "true"
    )
    CELERY_RESULT_EXPIRES = int(os.getenv("CELERY_RESULT_EXPIRES", "86400"))
    CELERY_QUEUE_SCENES = os.getenv("CELERY_QUEUE_SCENES", "graspkit_scenes")
    CELERY_QUEUE_EVAL = os.getenv("CELERY_QUEUE_EVAL", "graspkit_eval")


class DevelopmentConfig(BaseConfig):
    pass


class ProductionConfig(BaseConfig):
    LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING").upper()


class TestingConfig(BaseConfig):
    TESTING = True
    ASYNC_TASKS_ENABLED = False


def get_config_class() -> type[BaseConfig]:
    env = os.getenv("APP_ENV", "development").lower()
    if env == "production":
        return ProductionConfig
    if env == "testing":
        return TestingConfig
    return DevelopmentConfig
