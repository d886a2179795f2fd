"""Region-wise QUBO refinement for tomographic reconstruction."""
