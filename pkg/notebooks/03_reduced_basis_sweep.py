"""
A rate sweep from a handful of networks
=======================================

Training one network per bit rate is expensive. The greedy loop below
trains a network only at the rate the current set explains worst and
covers every other rate with a fitted linear combination. A small setup
keeps the run to a couple of minutes; ``configs/desk.yaml`` is the larger
version. The last section counts multiply-accumulates for both
approaches at full size.

Run with ``python notebooks/03_reduced_basis_sweep.py``.
"""

from fiberpinn import (
    ComplexityParams,
    RunConfig,
    comparison_table,
    greedy_train,
    mac_parameterized,
    mac_pinn_per_rate_family,
    predict,
)

cfg = RunConfig.load("configs/desk.yaml").with_overrides([
    "grid.n_t=80", "grid.n_initial=40",
    "train.max_epochs=4000", "train.log_every=0",
    "fit.max_iters=500",
    "greedy.max_bases=3",
    "sweep.count=5",
])

###############################################################################
# Greedy selection
# ----------------

model = greedy_train(cfg.fiber_problem(), cfg.sweep.rates(), cfg.network_config(),
                     cfg.train_config(), cfg.fit_config(), cfg.greedy_config())
for rnd, rate, worst in model.selection_history:
    print(f"round {rnd}: basis at {rate / 1e9:.1f} Gb/s (worst loss before: {worst:.2e})")

print(f"\n{'rate':>8} {'loss':>10}  basis")
for rate, loss, is_basis in model.loss_table():
    print(f"{rate / 1e9:6.1f}G {loss:10.3e}  {'*' if is_basis else ''}")

###############################################################################
# A rate between candidates
# -------------------------
# Coefficients for an unseen rate are fitted on the spot.

_, loss = predict(model, 5e9)
print(f"\nunseen 5.0G: loss {loss:.3e}")

###############################################################################
# Operation counts
# ----------------
# The split-step cost grows with distance; both network costs do not.

p = ComplexityParams()
print(f"\nper-rate networks {mac_pinn_per_rate_family(p):,} MACs, "
      f"shared basis {mac_parameterized(p):,} MACs")
for d, c_ssfm, c_f, c_pf in comparison_table(p, [2e4, 5e4, 1e5]):
    print(f"{d / 1e3:5.0f} km: split-step {c_ssfm:,.0f}")
