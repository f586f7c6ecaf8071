# %% [markdown]
# # Sensitivity to federation size, attackers, rounds and noise
#
# `sweep` reruns one configuration per value of a single setting and returns
# rows of (axis, value, Radius, Acc, CR, CA, FNR).  The same thing is
# available on the command line, e.g. `wpcra sweep sigma 0.005 0.01 0.02
# --preset table1-n20r4 --out runs/sigma`.

# %%
from wpcra import PRESETS, sweep

base = PRESETS["table1-n20r4"].replace(rounds=50, repeat_attack=True)


def show(rows):
    print(f"{'axis':<6}{'value':>8}{'Radius':>10}{'Acc':>8}{'CR':>8}{'CA':>8}{'FNR':>6}")
    for axis, value, radius, acc, cr, ca, f in rows:
        fmt = lambda v: "n/a" if v is None else f"{v:.4f}"  # noqa: E731
        print(f"{axis:<6}{value:>8}{fmt(radius):>10}{fmt(acc):>8}{fmt(cr):>8}{fmt(ca):>8}{f:>6.2f}")


# %% [markdown]
# Noise level.  More noise during training widens the certificate but costs
# some accuracy once it starts to drown the signal.

# %%
show(sweep(base, "sigma", [0.005, 0.01, 0.02, 0.03]))

# %% [markdown]
# The number of attackers.  The reweighting keeps the colluders at zero
# weight as their share grows.  On this near-IID split the benign histories
# are also almost parallel, so the logit rescaling leaves a single benign
# client (the least similar to the rest) with all of the trust.  The global
# model then follows that client's own trajectory, which is why accuracy
# does not move with the number of attackers.

# %%
show(sweep(base, "R", [2, 4, 6, 8]))

# %% [markdown]
# Federation size with four attackers.

# %%
show(sweep(base, "N", [10, 20, 30, 40]))
