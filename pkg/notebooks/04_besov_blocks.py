# %% [markdown]
# # Paley-Littlewood blocks on the lattice torus

# %%
import math

import numpy as np

from kaclab import besov
from kaclab.besov import BesovSpec
from kaclab.kernel import build_kernel

bank = besov.build_block_bank(64)
print("blocks -1 ..", bank.k_max)
print("partition of unity error", np.abs(bank.masks.sum(axis=0) - 1).max())

# %% [markdown]
# Block norms of a rough and a smooth field.  White noise puts most of its mass
# in the top blocks; the smooth field decays block by block.

# %%
smooth, rough = besov.field_corpus(64, 1, seed=0)
for name, f in (("smooth", smooth), ("rough", rough)):
    print(name, np.round(besov.block_norms(f, 2, bank), 3))

# %%
for nu in (-0.5, -0.1, 0.0, 0.1, 0.5):
    print(nu, round(besov.besov_norm(rough, BesovSpec(nu, 2, 2), bank), 3),
          round(besov.besov_norm(rough, BesovSpec(nu, math.inf, math.inf), bank), 3))

# %% [markdown]
# Functional inequalities on a random corpus: ratios of left to right side.

# %%
k = build_kernel("bump", 0.125, 64)
corpus = besov.field_corpus(64, 5, seed=1)
for f in corpus[:3] + corpus[-3:]:
    print(round(besov.check_regularity_bound(f, k, 0.2, bank).ratio, 3),
          round(besov.check_negative_besov_embedding(f, 0.2, 20, bank).ratio, 3),
          round(besov.check_lp_extension_bound(f, 4).ratio, 3))
