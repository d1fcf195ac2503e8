from .logger_config import logger_setup as get_logger  # noqa: F401
