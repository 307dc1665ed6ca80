"""Shared test utilities: dense matrix builders and small operators."""

import numpy as np

from sparsetomo.phantoms import Image
from sparsetomo.radon import Sinogram, radon_adjoint, radon_forward


def dense_radon_matrix(op):
    """Materialize the forward map as an (n_angles*n_dtc, side^2) array."""
    n = op.side * op.side
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(radon_forward(op, Image(op.side, e)).values.ravel())
    return np.array(cols).T


def dense_adjoint_matrix(op):
    m = op.n_angles * op.n_dtc
    cols = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        sino = Sinogram(op.n_angles, op.n_dtc, e.reshape(op.n_angles, op.n_dtc))
        cols.append(radon_adjoint(op, sino).values)
    return np.array(cols).T
