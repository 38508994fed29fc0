"""Small numeric helpers shared across the package."""

import numpy as np


def db2lin(x_db):
    """Power ratio from dB."""
    return 10.0 ** (np.asarray(x_db) / 10.0)


def lin2db(x):
    """dB from power ratio."""
    return 10.0 * np.log10(x)


def crandn(rng, shape):
    """Zero-mean circular complex Gaussian with unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def unit_sin_distance(a, b):
    """|sin| of the angle between complex vectors a and b.

    Computed from the difference of the rank-one projectors, which stays
    accurate down to machine precision (the naive sqrt(1-|<a,b>|^2) form
    loses everything below ~1e-8 to cancellation).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero vector has no direction")
    a = a / na
    b = b / nb
    p = np.outer(a, a.conj()) - np.outer(b, b.conj())
    return np.linalg.norm(p) / np.sqrt(2.0)


def column_chordal_distances(v, w):
    """Per-column chordal subspace distance between equally shaped matrices."""
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return np.array([unit_sin_distance(v[:, j], w[:, j]) for j in range(v.shape[1])])
