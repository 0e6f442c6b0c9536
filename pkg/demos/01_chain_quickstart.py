# coding: utf-8

# # Chain MDP quickstart
#
# Train V-MPO on the five-cell chain and compare against value iteration.

# In[1]:

import numpy as np

from vmpo import load_config, train
from vmpo.envs import chain_mdp
from vmpo.oracles import undiscounted_return, value_iteration
from vmpo.trainer import evaluate, read_metrics

# The oracle: value iteration on the tabular model.

# In[2]:

env = chain_mdp(5)
P, R = env.transition_model()
V, policy, residual = value_iteration(P, R, 0.99)
print("V*(start)", V[0], "residual", residual)
print("optimal undiscounted return", undiscounted_return(P, R, policy, 0, env.max_steps))

# Train for a few hundred steps (the shipped config runs 2000). The KL is
# zero on steps where the target network was just refreshed, so print others.

# In[3]:

cfg = load_config("configs/chain.cfg", learn_steps=400, out_dir="runs/demo-chain")
result = train(cfg)
header, rows = read_metrics(result.metrics_path)
for r in rows[4::100]:
    print(int(r["step"]), round(r["mean_return"], 3), "eta", round(r["eta"], 3), "kl", round(r["kl_mean"], 5))

# Evaluate the final checkpoint on fresh episodes.

# In[4]:

ev = evaluate(result.checkpoint_path, 100, seed=1)
print("eval mean return", ev.mean, "min", ev.min)
