"""Command-line surface of the laboratory."""
