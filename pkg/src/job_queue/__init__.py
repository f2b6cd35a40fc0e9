"""
Worker pool used by the feasibility and eigenvalue sweeps.
"""
from .sweep_pool import SweepPool, SweepJob, SweepReport, JobStatus

__all__ = ['SweepPool', 'SweepJob', 'SweepReport', 'JobStatus']
