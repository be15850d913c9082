"""Mesh-to-infilling-sphere pipeline with a permutation-invariant classifier."""
