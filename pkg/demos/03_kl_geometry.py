# coding: utf-8

# # Decoupled Gaussian KLs
#
# The mean part measures the mean shift under the old covariance. The
# covariance part holds the mean fixed. Their sum equals the full KL only
# when one of the two parts of the policy is unchanged.

# In[1]:

import numpy as np

from vmpo.distributions import DiagGaussian, kl_gaussian_cov, kl_gaussian_mean, kl_gaussian_total

old = DiagGaussian(np.array([0.0, 0.0]), np.array([1.0, 0.5]))

# In[2]:

cases = {
    "mean shift only": DiagGaussian(np.array([0.3, -0.2]), np.array([1.0, 0.5])),
    "std change only": DiagGaussian(np.array([0.0, 0.0]), np.array([1.2, 0.4])),
    "both": DiagGaussian(np.array([0.3, -0.2]), np.array([1.2, 0.4])),
}
for name, new in cases.items():
    mu = kl_gaussian_mean(old, new).item()
    cov = kl_gaussian_cov(old, new).item()
    full = kl_gaussian_total(old, new).item()
    print(f"{name:16s} mean {mu:.6f}  cov {cov:.6f}  sum {mu + cov:.6f}  full {full:.6f}")
