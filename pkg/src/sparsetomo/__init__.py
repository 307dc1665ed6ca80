"""Sparse lp-regularized tomography from randomly sampled angles.

Library layout:

- phantoms:          ground-truth images (synthetic generators + loaders)
- radon:             discrete parallel-beam projector, exact adjoint, angle sampling
- transforms:        orthonormal Haar wavelets, cone-adapted shearlet frame
- regularizers:      signed-power calculus, lp penalties, Bregman distances
- solvers:           SGP and VMILA (inexact proximal step on the dual)
- source_condition:  strong source-condition phantoms and approximate-SC decay
- experiments:       convergence-rate studies, p->1 study, regularizer comparison
- cli:               `sparsetomo` command line front end
"""

__version__ = "0.1.0"
