"""Sweep the coupling asymmetry kappa and fit the three-term period law.

Run with ``python3 demos/kappa_sweep.py``.  Set ``SOLIPLASMON_WORKERS`` to
spread the sweep over several processes.
"""

# %%
import numpy as np

from soliplasmon import ModelParams, fit_period_law, sweep_kappa
from soliplasmon.analysis import period_law_basis

kappas = np.geomspace(0.1, 5.0, 40)
sweep = sweep_kappa(ModelParams(), kappas)
t_ba = sweep.column("T_ba")

# %% [markdown]
# The first witnessing period of zeta_ba shrinks as kappa grows and
# diverges as kappa goes to zero.

# %%
closed = np.arctan(1 / np.sqrt(kappas)) / (0.1 * np.sqrt(kappas))
print(f"{'kappa':>8} {'T_ba':>10} {'closed form':>12} {'T_ab':>10}")
for row, ref in zip(sweep.rows[::4], closed[::4]):
    print(f"{row.kappa:8.4f} {row.T_ba:10.4f} {ref:12.4f} {row.T_ab:10.4f}")

# %% [markdown]
# Least-squares fit of T_ba = a/kappa + b/(3 kappa^3) + c/(5 kappa^5).

# %%
fit = fit_period_law(sweep)
print(f"a = {fit.a:.4f} +/- {fit.stderr_a:.4f}")
print(f"b = {fit.b:.4f} +/- {fit.stderr_b:.4f}")
print(f"c = {fit.c:.5f} +/- {fit.stderr_c:.5f}")
print(f"rms residual {fit.rms_residual:.4f} ({fit.rms_residual / np.mean(t_ba):.2%} of mean T_ba)")

# %%
worst = np.max(np.abs(period_law_basis(kappas) @ np.array([fit.a, fit.b, fit.c]) - t_ba) / t_ba)
print(f"largest relative deviation of the fitted law: {worst:.2%}")
for lo in (1.0, 2.0):
    single = fit_period_law(sweep, terms=1, kappa_min=lo)
    print(f"single-term fit on kappa >= {lo:g}: a = {single.a:.4f}")
