"""Probabilistic Darcy-based coarse-graining surrogate for porous-media flow.

The package trains a Bayesian encoder/solver/decoder chain: binary
microstructures are encoded into a low-dimensional log-permeability field,
pushed through a coarse Darcy finite-element model, and decoded back to the
fine-scale pressure field with calibrated uncertainty.  An ELBO-based cell
score drives adaptive refinement of the coarse partition.
"""

__version__ = "0.1.0"
