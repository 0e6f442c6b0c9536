# coding: utf-8

# # The temperature dual
#
# For a batch of top-half advantages, the optimal temperature makes the
# KL between the softmax weights and the uniform distribution equal eps_eta.

# In[1]:

import math

import numpy as np

from vmpo.objective import psi_weights, select_top_half, temperature_loss
from vmpo.oracles import golden_section

rng = np.random.default_rng(0)
batch = rng.normal(size=64)
adv = batch[select_top_half(batch).indices]

# In[2]:

for eps in (0.01, 0.1, 0.5):
    f = lambda log_eta: temperature_loss(adv, math.exp(log_eta), eps).item()
    eta = math.exp(golden_section(f, math.log(1e-4), math.log(1e4)))
    psi = psi_weights(adv, eta)
    kl = float(np.sum(psi * np.log(psi * len(adv))))
    print(f"eps {eps:5.2f}  eta* {eta:8.4f}  KL(psi || uniform) {kl:.6f}  max weight {psi.max():.3f}")

# Smaller eps_eta means a hotter temperature and flatter weights.
