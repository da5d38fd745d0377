"""Transport an ensemble of Lorenz-96 states along characteristics.

The divergence of the Lorenz-96 field is ``-d``, so every log-density grows
by ``d * t`` along its trajectory.
"""

import numpy as np

import tkrnet

system = tkrnet.lorenz96(dim=10)
rng = np.random.default_rng(0)
ensemble = tkrnet.reference_ensemble(system, 200, [0.25, 0.5, 1.0], rng, threads=2)
growth = ensemble.log_density[:, -1] - ensemble.log_density[:, 0]
print("log-density growth:", growth.min(), growth.max())
assert np.allclose(growth, system.dim * 1.0)

x, _ = ensemble.at(1.0)
print("mean state at t=1:", np.round(x.mean(axis=0), 3))
