"""flatlab: theory and simulation for threshold-linear classification of
high-dimensional Gaussian mixtures.

Subpackages
-----------
numerics            shared quadrature / tail-function / fixed-point kernels
model               generative law, classifier, exact observables, dataset IO
bayes               Bayes-optimal baseline (posterior-mean direction)
theory_rs           equilibrium order parameters of the regularized MSE learner
theory_fp           local-entropy (constrained-overlap) analysis around it
theory_replicated   coupled-replica equilibrium and its barycenter observables
trainer             gradient-descent and replicated-GD simulators
cli                 TOML-driven experiment runner (``flatlab`` entry point)
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
