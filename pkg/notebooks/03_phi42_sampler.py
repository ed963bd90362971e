# %% [markdown]
# # The Phi^4_2 Galerkin sampler
#
# The field is split as `X = Z + e^{t Delta} X0 + V`.  `Z` is an exact
# Ornstein-Uhlenbeck process per Fourier mode, `V` carries the Wick-ordered
# cubic drift.

# %%
import math

import numpy as np
from scipy.integrate import solve_ivp

from kaclab import lattice, phi42

# %% [markdown]
# Free field: after time `t` the point variance of the non-constant modes is
# `c(t)`, and the constant mode grows like `t/2`.

# %%
M, n, t = 8, 5000, 0.1
st = phi42.initial_state(M, {}, batch=(n,))
phi42.advance(st, t, 0.01, np.random.default_rng(0))
Z = st.Z
mean = Z.mean(axis=(-2, -1))
print("point variance", (Z[:, 0, 0] - mean).var(), " c(t) =", phi42.renorm_c(t, M))
print("zero mode     ", mean.var(), " t/2 =", t / 2)

# %% [markdown]
# Without noise a constant field solves `v' = A v - v^3/3`.  The second-order
# exponential integrator hits the ODE solution to about 1e-7 at `dt = 1e-3`.

# %%
for A in (-1.0, 0.0, 1.0):
    st = phi42.initial_state(2, phi42.phi4_coefficients(A), X0=2.0, noise=False)
    phi42.advance(st, 1.0, 0.001, None, scheme="etd2")
    ref = solve_ivp(lambda s, v: A * v - v ** 3 / 3, (0, 1), [2.0], rtol=1e-13, atol=1e-14).y[0, -1]
    print(A, st.field()[0, 0], ref)

# %% [markdown]
# A short equilibrium run and the distribution of the pairing with `cos(pi x1)`.

# %%
cfg = phi42.Phi42Config(M=16, A=0.0, dt=0.005, T_burn=1.0, T_sample=5.0, cadence=0.1, batch=4)
phi = lattice.TorusField.from_function(lambda x1, x2: np.cos(np.pi * x1) + 0 * x2, 16).values
run = phi42.run_phi42(cfg, np.random.default_rng(1), {"pair": lambda X: (X * phi).sum(axis=(-2, -1)) / 16 ** 2})
vals = run.observables["pair"].ravel()
print(f"mean {vals.mean():.3f}, variance {vals.var():.3f}  (free-field value {2 / math.pi ** 2:.3f})")
