"""
Least squares, Tikhonov and total variation under noise
=======================================================

Compares the three reconstruction methods on a piecewise-constant phantom
with 2% Gaussian sensor noise, sweeping each regularization weight.
"""

import warnings

import numpy as np

from flatcam import optics, recon, seq, sim
from flatcam.errors import DidNotConverge
from flatcam.optics import OpticsConfig

warnings.simplefilter("ignore", DidNotConverge)

n = 32
cfg = OpticsConfig(d_um=500.0, delta_um=30.0, pixel_um=25.0, n_scene=n, m_sensor=n)
a = optics.cover(seq.gen_m_sequence(8).values, cfg)
system = optics.build_separable_system(a, a, cfg)
print("factor condition number:", system.svd_l.s[0] / system.svd_l.s[-1])

x = sim.phantom(n, rng_seed=0)
clean = system.forward(x)
sigma = 0.02 * np.sqrt(np.mean(clean ** 2))
y = sim.capture(system, x, sigma, rng_seed=1).values

# plain pseudoinverse amplifies the noise along the small singular values
print("LS           mse %.3g" % recon.metrics(recon.reconstruct_ls(system, y, rel_cutoff=0.0), x)["mse"])

for f in np.logspace(-2, 2, 5):
    tau = f * recon.default_tau(system)
    print("Tikhonov %5.0e mse %.3g" % (f, recon.metrics(recon.reconstruct_tikhonov(system, y, tau), x)["mse"]))

# TV weights in units of the noise variance
for f in np.logspace(-1, 3, 5):
    x_tv, info = recon.reconstruct_tv(system, y, f * sigma ** 2, return_info=True)
    print("TV       %5.0e mse %.3g (%d iterations)" % (f, recon.metrics(x_tv, x)["mse"], info.iterations))
