from __future__ import annotations
from typing import Literal
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, computed_field

class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = Field("INFO")
    LOG_FILE: str = Field("invariant_sets.log", description="Rotating log file written by the CLI")
    LOG_MAX_BYTES: int = Field(10 * 1024 * 1024)
    LOG_BACKUPS: int = Field(5)

    # Solver selection
    LP_METHOD: Literal["highs", "highs-ds", "highs-ipm"] = Field("highs", description="scipy.optimize.linprog backend")
    SDP_SOLVER: str = Field("CLARABEL", description="cvxpy conic solver used for SOS programs")
    SDP_FALLBACK_SOLVER: str = Field("SCS", description="cvxpy solver retried when the primary one fails")
    SDP_VERBOSE: bool = Field(False)
    LP_WORKERS: int = Field(1, description="Threads used for row-wise LP batches")

    # Tolerances
    LP_FEASIBILITY_TOL: float = Field(1e-9, description="Primal/dual feasibility tolerance passed to HiGHS")
    REDUNDANCY_TOL: float = Field(1e-9, description="Row j is redundant when max g_j^T y <= b_j + tol")
    CONTAINMENT_TOL: float = Field(1e-8, description="Slack allowed on support values in containment tests")
    COEFF_PRUNE_TOL: float = Field(1e-12, description="Polynomial coefficients below this are dropped")
    SOS_MARGIN: float = Field(1e-6, description="Band around 1 where an SOS bound is inconclusive")
    SOS_RESIDUAL_TOL: float = Field(1e-6)
    PSD_TOL: float = Field(1e-7)

    # Iteration and gates
    MAX_ITER: int = Field(100)
    JSR_MAX_DEPTH: int = Field(8, description="Largest product length tried by the stability gate")
    JSR_PRODUCT_BUDGET: int = Field(1_000_000, description="Upper limit on enumerated matrix products")
    SIM_SEQUENCE_BUDGET: int = Field(1_000_000, description="Upper limit on switching sequences simulated per start state")

    # Box construction
    BOX_DELTA: float = Field(0.1, description="Lower-bound shift used for boxes containing the origin")
    BOX_VALIDATION_POINTS: int = Field(10_000)
    BOX_VALIDATION_SCALE: float = Field(2.0, description="Sampling region relative to the state box")

    # Debug-mode re-verification of set operations
    DEBUG_CHECKS: bool = Field(False)

    @computed_field
    @property
    def LINPROG_OPTIONS(self) -> dict:
        """Options handed to linprog for every LP"""
        return {
            "primal_feasibility_tolerance": self.LP_FEASIBILITY_TOL,
            "dual_feasibility_tolerance": self.LP_FEASIBILITY_TOL,
        }

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", case_sensitive=False, extra="ignore")

settings = Settings()  # singleton-style import
