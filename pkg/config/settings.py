"""
Configuration settings for the islanded microgrid toolkit.
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables (prefix ``MICROGRID_``)."""

    # Per-unit system
    s_base_mva: float = 10.0
    f_base_hz: float = 60.0
    v_base_kv: float = 12.47

    # Time-domain integration
    dt_full: float = 1e-4
    dt_reduced: float = 1e-3
    output_rate_hz: float = 1000.0
    steady_state_tol: float = 1e-8

    # Equilibrium Newton solver
    newton_max_iter: int = 50
    newton_tol: float = 1e-10

    # Algebraic network solve inside the time-domain engine
    network_max_iter: int = 25
    network_tol: float = 1e-9
    collapse_voltage: float = 0.3

    # Linearization
    fd_step: float = 1e-6

    # Execution
    workers: int = 1
    output_dir: str = "./output"

    # Logging
    log_level: str = "INFO"
    log_dir: str = "./logs"

    class Config:
        env_prefix = "MICROGRID_"
        env_file = ".env"
        case_sensitive = False


# Global settings instance
settings = Settings()
