# %% [markdown]
# # Kac kernels and the renormalisation constant
#
# `C_gamma` is the lattice sum that shifts the inverse temperature at
# criticality.  It grows like `log(1/gamma)`.

# %%
import math

from kaclab.experiments.stats import linear_fit
from kaclab.kernel import build_kernel, verify_kernel_bounds

gammas = [0.5, 0.25, 0.125, 0.0625]
kernels = [build_kernel("bump", g, round(g ** -2), periodize=True) for g in gammas]
for k in kernels:
    print(f"gamma {k.gamma:<7} N {k.N:<4} C_gamma {k.c_gamma:.6f}")

# %%
a, slope, r2 = linear_fit([math.log(1 / g) for g in gammas], [k.c_gamma for k in kernels])
print(f"C_gamma ~ {a:.3f} + {slope:.3f} log(1/gamma),  R^2 = {r2:.4f}")
print("leading-order slope 2/(m pi), m = 1.8:", 2 / (1.8 * math.pi))

# %% [markdown]
# Fitted constants in `|Khat| <= 1 ^ C/|gamma w|^2` and
# `1 - Khat >= c (|gamma w|^2 ^ 1)` stay put as gamma shrinks.

# %%
for k in kernels[:3]:
    r = verify_kernel_bounds(k)
    print(f"gamma {k.gamma:<6} c {r.lower_c:.3f}  C {r.upper_C:.3f}")

# %% [markdown]
# The rescaled symbol `gamma^-2 eps^-2 (Khat - 1)` tends to `-(m/4) pi^2 |w|^2`
# with `m` the profile's second moment; the `moment4` profile has `m = 4`.

# %%
for name in ("bump", "moment4"):
    k = build_kernel(name, 0.0625, 256)
    lam = k.laplacian_symbol()[256, 255]
    print(f"{name:8s} symbol at w=(1,0): {lam:.4f}   (-pi^2 = {-math.pi ** 2:.4f})")
