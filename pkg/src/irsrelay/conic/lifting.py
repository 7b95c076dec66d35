"""Real embeddings of complex vectors and Hermitian matrices.

A complex vector ``v`` maps to ``[Re v; Im v]`` and a complex matrix ``Q`` to
``[[Re Q, -Im Q], [Im Q, Re Q]]``.  For Hermitian ``Q`` and any ``v``,
``v^H Q v = lift(v)^T lift(Q) lift(v)`` and ``tr(Q Z) = tr(lift(Q) lift(Z)) / 2``.
"""

import numpy as np


def lift_vector(v):
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag])


def unlift_vector(u):
    u = np.asarray(u, dtype=float)
    n = u.size // 2
    return u[:n] + 1j * u[n:]


def lift_matrix(Q):
    Q = np.atleast_2d(np.asarray(Q, dtype=complex))
    return np.block([[Q.real, -Q.imag], [Q.imag, Q.real]])


def unlift_hermitian(X):
    """Project a real symmetric ``2n x 2n`` matrix back to an ``n x n`` Hermitian one.

    Works for any symmetric ``X``, not only exact embeddings: the result is the
    Hermitian matrix whose embedding is the orthogonal projection of ``X`` onto
    embedded matrices, so PSD inputs give PSD outputs.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0] // 2
    re = (X[:n, :n] + X[n:, n:]) / 2.0
    im = (X[n:, :n] - X[:n, n:]) / 2.0
    Z = re + 1j * im
    return (Z + Z.conj().T) / 2.0


def lift_complex(expr):
    """Real embedding of a complex scalar, vector or matrix.

    Scalars become 2x2 rotation-scaling blocks, 1-D arrays are stacked as
    ``[Re; Im]`` and 2-D arrays use the block embedding.
    """
    a = np.asarray(expr)
    if a.ndim == 0:
        return lift_matrix(a.reshape(1, 1))
    if a.ndim == 1:
        return lift_vector(a)
    return lift_matrix(a)


def real_part_functional(f):
    """Coefficients ``g`` with ``Re{f^H v} = g @ lift_vector(v)``."""
    f = np.asarray(f)
    return np.concatenate([f.real, f.imag])
