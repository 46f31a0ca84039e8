"""Small builders shared by several test modules."""

import numpy as np

from src.core.spectral import SpectralDecomposition


def site_basis_decomposition(energies, n_components=2):
    """Decomposition whose eigenvectors are the (site, component) basis states."""
    energies = np.asarray(energies, dtype=complex)
    eye = np.eye(energies.size, dtype=complex)
    return SpectralDecomposition(
        eigenvalues=energies,
        right_vectors=eye.copy(),
        left_vectors=eye.copy(),
        left_eigenvalues=energies.conj(),
        n_components=n_components,
    )
