"""
One network on a problem with a known answer
============================================

With loss and nonlinearity switched off, a Gaussian pulse spreads in
closed form. Training one network on that problem shows what the
physics-informed loss can reach before it is used on real bit patterns.
The run is shortened here; ``configs/toy.yaml`` trains to completion.

Run with ``python notebooks/02_single_basis_toy.py``.
"""

import numpy as np

from fiberpinn import RunConfig, evaluate_on_grid, init_network, pinn_loss, train_basis

cfg = RunConfig.load("configs/toy.yaml").with_overrides(["train.max_epochs=3000",
                                                         "train.log_every=500"])
grid = cfg.build_grid()
toy = cfg.toy_problem()
co = toy.coefficients()
f = toy.boundary(grid)
exact = toy.exact_field(grid)

###############################################################################
# Untrained network
# -----------------

net = init_network(cfg.network.layer_sizes, cfg.seed)
total, res, bnd = pinn_loss(net, co, grid, f)
print(f"initial loss {total:.3e} (equation {res:.3e}, launch {bnd:.3e})")

###############################################################################
# Training
# --------
# Full-batch Adam; every epoch records the loss split into its two terms.

basis = train_basis(net, co, grid, f, cfg.train_config())
field = evaluate_on_grid(basis.params, grid)
print(f"after {basis.epochs_run} epochs: loss {basis.final_loss:.3e}, "
      f"relative L2 vs exact {field.relative_l2(exact):.3e}")

###############################################################################
# Where the error sits
# --------------------
# Peak amplitude along the fiber, learned against exact.

amp = np.abs(field.values)
ref = np.abs(exact.values)
for k, z in enumerate(grid.zeta_nodes):
    print(f"zeta {z:.1f}: peak {amp[k].max():.4f} (exact {ref[k].max():.4f})")
