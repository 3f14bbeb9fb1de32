"""Simulation and analytics for the hard-edge spectral limit at high temperature.

Submodules:
  core        random streams, Brownian paths, Skorokhod map, bridge crossing
  diffusion   the coupled reflected-diffusion family and its point process
  finite_beta rescaled finite-temperature diffusions with explosion cycling
  laguerre    tridiagonal beta-Laguerre model and small-eigenvalue solver
  gaps        exponential-gap construction of the limit process
  formulas    closed-form series, Laplace transforms, rate functions, costs
  stats       eCDF/KS machinery, tail regression, Poisson diagnostics
  experiments named comparison experiments with JSON-able reports
  cli         command-line front end (`hardedge`)
"""

from . import (  # noqa: F401
    core,
    diffusion,
    experiments,
    finite_beta,
    formulas,
    gaps,
    laguerre,
    stats,
)

__version__ = "0.1.0"
