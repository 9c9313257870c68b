"""Evolutionary extreme learning machines trained by manta ray foraging optimization.

Submodules
----------
elm         single-hidden-layer network and least-squares output solve
mrfo        manta ray foraging optimizer with optional Levy-flight walk
optimizers  PSO, GA, WOA and random search behind one interface
rdf         partial radial distribution function features and formation energies
trainer     swarm search over hidden-layer parameters
harness     synthetic data, folds, metrics and the repeated-runs protocol
cli         ``eelm`` command-line entry point
"""

from .elm import ElmModel, RegressionData, build_hidden_matrix, predict, solve_output_weights
from .mrfo import MrfoConfig, minimize
from .optimizers import KINDS, OptimizerSpec, minimize_with
from .rdf import RdfConfig, featurize, partial_rdf
from .structure import CrystalStructure, read_xyz
from .trainer import TrainingRunConfig, train

__version__ = "0.1.0"

__all__ = [
    "CrystalStructure", "ElmModel", "KINDS", "MrfoConfig", "OptimizerSpec", "RdfConfig", "RegressionData",
    "TrainingRunConfig", "build_hidden_matrix", "featurize", "minimize", "minimize_with", "partial_rdf",
    "predict", "read_xyz", "solve_output_weights", "train",
]
