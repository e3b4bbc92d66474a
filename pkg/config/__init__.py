# File __init__.py để config trở thành package
from config.settings import DEFAULTS, ConfigError, describe_defaults, env_name, get_setting

__all__ = ["DEFAULTS", "ConfigError", "describe_defaults", "env_name", "get_setting"]
