"""Redfield relaxation of anisotropic spins."""
