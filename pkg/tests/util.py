"""Shared helpers for building randomized test fixtures."""

import numpy as np

from ccakit import LatticeSpec, build_hamiltonian


def random_spec(seed, n=8, lossless=False, j_range=(10.0, 50.0), mu_range=(-10.0, 10.0)):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(*mu_range, n)
    hop = rng.uniform(*j_range, n - 1)
    kappa = np.zeros(n) if lossless else rng.uniform(0.5, 2.0, n)
    gamma_in = rng.uniform(0.8, 2.0)
    gamma_out = rng.uniform(0.8, 2.0)
    return LatticeSpec(n, mu, hop, kappa, gamma_in, gamma_out)


def random_hamiltonian(seed, n=8, **kwargs):
    spec = random_spec(seed, n, **kwargs)
    return build_hamiltonian(spec), spec
