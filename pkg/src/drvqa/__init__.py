"""Distributionally robust Bayesian optimization of variational circuits under shifting damping noise."""

from .dro import DiscretePdf, MmdBall, NoiseGrid, mmd_kernel_matrix, truncated_gaussian_pdf, worst_case_distribution
from .gp import GpConfig, fit
from .optimizers import OptimizerConfig, run_optimizer
from .problems import Graph, VqaProblem, approximation_ratio, evaluate_objective
from .sim import Circuit, DensityMatrix, Gate, GateKind, damping_channel, run_noisy_circuit

__all__ = [
    "Circuit",
    "DensityMatrix",
    "DiscretePdf",
    "Gate",
    "GateKind",
    "GpConfig",
    "Graph",
    "MmdBall",
    "NoiseGrid",
    "OptimizerConfig",
    "VqaProblem",
    "approximation_ratio",
    "damping_channel",
    "evaluate_objective",
    "fit",
    "mmd_kernel_matrix",
    "run_noisy_circuit",
    "run_optimizer",
    "truncated_gaussian_pdf",
    "worst_case_distribution",
]
