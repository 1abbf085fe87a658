"""Offline imitation from mixed-quality demonstrations via a PU discriminator
that weights the behavioral-cloning loss, plus discriminator-based offline
policy selection."""

__version__ = "0.1.0"
