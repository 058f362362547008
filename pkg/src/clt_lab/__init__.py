"""clt_lab: a numerical laboratory for finite-n central limit theorem bounds.

Submodules:
    dist     exact one-dimensional laws (discrete, normal, Gaussian+jump mixture)
    metrics  Kolmogorov / Wasserstein / parametrized Prokhorov / total variation
    stein    smooth test functions and their Gaussian Stein transforms
    arrays   standard triangular arrays, Lindeberg diagnostics, row-sum laws
    bounds   the inequality-checking harness producing BoundReport records
    cli      command-line front end (simulate / distance / stein / lindeberg /
             verify / report)
"""

__version__ = "0.1.0"
