"""Per-point diagnostics computed from a spectral decomposition."""
