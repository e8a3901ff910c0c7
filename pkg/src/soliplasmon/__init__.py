"""Non-Hermitian soliton-plasmon dynamics and EPR steering witnesses.

Modules
-------
fock        truncated ladder operators, Kronecker products, matrix exponential
model       Hamiltonian, Hermitian/anti-Hermitian split, initial states
dynamics    normalized master-equation integration and the exact propagator
witnesses   two-mode and multimode steering witnesses
analysis    witnessing periods, kappa sweeps, period-law fit
cli         ``soliplasmon simulate|sweep|fit``
"""

__version__ = "0.1.0"

from .fock import TwoModeSpace, annihilation, creation, diag_sqrt, kron, matrix_exponential
from .model import ModelParams, SplitHamiltonian, StateVector, build_hamiltonian, coherent_state, fock_state
from .dynamics import DensityMatrix, EvolutionConfig, TimeSeries, evolve, exact_propagator, expectation, step_rhs
from .witnesses import WitnessTrace, n_mode_witness, two_mode_witnesses, witness_trace
from .analysis import FitCoefficients, PeriodEstimate, SweepResult, detect_periods, fit_period_law, sweep_kappa
