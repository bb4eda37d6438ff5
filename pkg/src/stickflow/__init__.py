"""Stick-breaking constructions, Markov-chain clumping and occupation laws of ``I + G/n`` chains."""

from __future__ import annotations

__version__ = "0.1.0"

from .chains import (
    ChainPath,
    GeneratorMatrix,
    generator_from_kernel,
    jump_kernel,
    reverse_generator,
    sample_homogeneous,
    stationary_distribution,
    stationary_distributions,
    switch_and_return_times,
    validate_generator,
)
from .inhom import (
    ClumpExtract,
    InhomSpec,
    occupation_measure,
    occupation_replicates,
    reverse_clumps,
    simulate_inhom,
    weak_ergodic_iterate,
)
from .mccgem import DiscreteMeasure, assemble_measure, clump_by_switches, sample_mccgem, stick_breaking_measure
from .moments import joint_moment, marginal_moment, minimal_and_q, moment_kernel, moment_table
from .stats import (
    McEstimate,
    SelfSimSpec,
    clumped_fraction_beta_check,
    gem2_clump_covariance,
    ks_two_sample,
    mc_estimate,
    self_similarity_check,
)
from .stickcore import (
    ClumpIndex,
    Custom,
    Disordered,
    FractionSequence,
    Gem,
    StickSequence,
    TwoParam,
    clump,
    fractions_from_weights,
    ram_from_fractions,
    sample_stick,
)

__all__ = [
    "__version__",
    "ChainPath",
    "GeneratorMatrix",
    "generator_from_kernel",
    "jump_kernel",
    "reverse_generator",
    "sample_homogeneous",
    "stationary_distribution",
    "stationary_distributions",
    "switch_and_return_times",
    "validate_generator",
    "ClumpExtract",
    "InhomSpec",
    "occupation_measure",
    "occupation_replicates",
    "reverse_clumps",
    "simulate_inhom",
    "weak_ergodic_iterate",
    "DiscreteMeasure",
    "assemble_measure",
    "clump_by_switches",
    "sample_mccgem",
    "stick_breaking_measure",
    "joint_moment",
    "marginal_moment",
    "minimal_and_q",
    "moment_kernel",
    "moment_table",
    "McEstimate",
    "SelfSimSpec",
    "clumped_fraction_beta_check",
    "gem2_clump_covariance",
    "ks_two_sample",
    "mc_estimate",
    "self_similarity_check",
    "ClumpIndex",
    "Custom",
    "Disordered",
    "FractionSequence",
    "Gem",
    "StickSequence",
    "TwoParam",
    "clump",
    "fractions_from_weights",
    "ram_from_fractions",
    "sample_stick",
]
