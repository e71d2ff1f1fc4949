"""Two coupled optomechanical units with separate or common mechanical baths.

Mean-field dynamics and synchronization, linearized quantum fluctuations,
steady-state entanglement and cooling, and a batch experiment runner.
"""

__version__ = "0.1.0"

from .params import Bath, PhysicalParams, SystemParams, coupling_g, nondimensionalize, normal_modes
from .classical import ClassicalState, Trajectory, integrate, initial_state
from .sync import SyncConfig, SyncResult, delay_scan, simulate_sync, sync_map, sync_threshold
from .linear import FixedPoint, drift_matrix, find_fixed_points, noise_matrix, select_fixed_point
from .gaussian import (CovarianceMatrix, QuantumResult, evolve_covariance, log_negativity,
                       lyapunov_steady, occupancy, quantum_result, steady_covariance,
                       symplectic_eigenvalues)

__all__ = [
    "Bath", "PhysicalParams", "SystemParams", "coupling_g", "nondimensionalize", "normal_modes",
    "ClassicalState", "Trajectory", "integrate", "initial_state",
    "SyncConfig", "SyncResult", "delay_scan", "simulate_sync", "sync_map", "sync_threshold",
    "FixedPoint", "drift_matrix", "find_fixed_points", "noise_matrix", "select_fixed_point",
    "CovarianceMatrix", "QuantumResult", "evolve_covariance", "log_negativity",
    "lyapunov_steady", "occupancy", "quantum_result", "steady_covariance",
    "symplectic_eigenvalues",
]
