"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid or unsupported configuration value."""
