"""Parameter sweeps: plan parsing and the checkpointed sweep runner."""
