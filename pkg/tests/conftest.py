import numpy as np
import pytest

from jetflow import Kernel, ParticleState, SystemState
from jetflow.jet_algebra import sym_lower


def build_system(rng, n=2, d=2, order=2, sigma=1.0, momentum_scale=0.5):
    """Random well-separated system with invertible jets."""
    kernel = Kernel(family="gaussian", sigma=sigma, dim=d)
    base = rng.normal(scale=1.5, size=(n, d))
    base += 2.0 * np.arange(n)[:, None]  # keep positions distinct
    particles = []
    for A in range(n):
        kw = {"q": base[A], "pi_q": momentum_scale * rng.normal(size=d)}
        if order >= 1:
            kw["g"] = np.eye(d) + 0.3 * rng.normal(size=(d, d))
            kw["pi_g"] = momentum_scale * rng.normal(size=(d, d))
        if order == 2:
            kw["s"] = sym_lower(0.3 * rng.normal(size=(d, d, d)))
            kw["pi_s"] = sym_lower(momentum_scale * rng.normal(size=(d, d, d)))
        particles.append(ParticleState(order=order, **kw))
    return SystemState(kernel=kernel, particles=tuple(particles))


@pytest.fixture
def make_system():
    return build_system
