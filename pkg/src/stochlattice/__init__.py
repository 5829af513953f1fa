"""Simulation lab for p-Laplacian lattice equations with multiplicative noise."""

from .lattice import LatticeVec, lp_norm, op_A, op_B, op_Bstar, pairing, tail_norm
from .noise import NoisePath, ou_attach, sample_wiener, theta_shift
from .dynamics import (Forcing, IntegrationError, NuProfile, SystemParams, Trajectory,
                       cocycle_phi, integrate, rhs_F)

__version__ = "0.1.0"
