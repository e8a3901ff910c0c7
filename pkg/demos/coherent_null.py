"""A coherent soliton (alpha = 1) never shows steering in either direction.

Run with ``python3 demos/coherent_null.py``.  The 256-dimensional run takes
a few seconds.
"""

# %%
import numpy as np

from soliplasmon import (
    EvolutionConfig,
    ModelParams,
    TwoModeSpace,
    build_hamiltonian,
    coherent_state,
    detect_periods,
    witness_trace,
)

space = TwoModeSpace(16, 16)
# The leakage guard asks for 17 levels at |alpha| = 1; 16 levels lose ~1e-14 of the norm.
psi0 = coherent_state(space, 1.0, "a", allow_truncation=True)
print(f"norm deficit of the truncated coherent state: {psi0.norm_deficit:.1e}")

trace = witness_trace(psi0, build_hamiltonian(ModelParams(), space),
                      EvolutionConfig(dt=1e-3, t_max=50.0, sample_stride=100))

# %%
print(f"max zeta_ab = {np.max(trace.zeta_ab):.4e}")
print(f"max zeta_ba = {np.max(trace.zeta_ba):.4e}")
print(f"periods: ab {detect_periods(trace, 'ab')}, ba {detect_periods(trace, 'ba')}")
print(f"<n_a> from {trace.n_a[0]:.4f} to {trace.n_a[-1]:.4f}, <n_b> peaks at {np.max(trace.n_b):.4f}")
