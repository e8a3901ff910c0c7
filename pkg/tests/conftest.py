import numpy as np
import pytest

from soliplasmon.fock import TwoModeSpace
from soliplasmon.model import ModelParams, build_hamiltonian, fock_state

G = 0.1


def closed_form_periods(kappa, g=G):
    """First witnessing periods for |1,0> from the 2x2 single-excitation block.

    On span{|1,0>, |0,1>} the Hamiltonian is w*I + g*[[0, 1], [kappa, 0]], so
    the state is (cos Wt, -i sqrt(kappa) sin Wt) up to normalization with
    W = g sqrt(kappa).  zeta_ba > 0 while tan^2(Wt) < 1/kappa; zeta_ab > 0
    from there until the plasmon population returns to one at Wt = pi/2.
    """
    w = g * np.sqrt(kappa)
    t_ba = np.arctan(1.0 / np.sqrt(kappa)) / w
    t_ab = np.arctan(np.sqrt(kappa)) / w
    return t_ba, t_ab


def closed_form_populations(kappa, t, g=G):
    w = g * np.sqrt(kappa)
    c2, s2 = np.cos(w * t) ** 2, np.sin(w * t) ** 2
    norm = c2 + kappa * s2
    return c2 / norm, kappa * s2 / norm


@pytest.fixture
def space44():
    return TwoModeSpace(4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def default_system(kappa, cutoffs=(4, 4), initial=(1, 0)):
    space = TwoModeSpace(*cutoffs)
    return build_hamiltonian(ModelParams(kappa=kappa), space), fock_state(space, *initial)


def random_density_matrix(rng, d, rank=None):
    rank = rank or d
    x = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho)
