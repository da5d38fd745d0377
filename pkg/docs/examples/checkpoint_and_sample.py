"""Save a stacked (choice 2) model, reload it and draw samples."""

import tempfile
from pathlib import Path

import numpy as np

import tkrnet

config = tkrnet.validate_config(
    {
        "system": {"name": "kraichnan_orszag", "t_final": 0.5},
        "architecture": {"pairs_per_block": 1, "hidden_width": 8, "depth": 2},
        "training": {"epochs": 2, "adaptive_iterations": 1},
        "time_grid": {"steps": 2, "points": 10},
        "decomposition": {"kind": "choice2", "intervals": 2},
    }
)
system = tkrnet.get_system(config.system)
stack = tkrnet.train(system, config).model

with tempfile.TemporaryDirectory() as tmp:
    path = tkrnet.save_checkpoint(
        stack, Path(tmp) / "stack.json", seed=config.seed, system=config.system
    )
    restored = tkrnet.load_checkpoint(path)

assert isinstance(restored, tkrnet.StackedModel)
rng = np.random.default_rng(0)
x = tkrnet.stacked_sample(restored, 0.4, 5, rng)
print("samples at t=0.4:\n", x)
print("log-density:", restored.log_density(x, 0.4))
assert np.allclose(restored.log_density(x, 0.4), stack.log_density(x, 0.4))
