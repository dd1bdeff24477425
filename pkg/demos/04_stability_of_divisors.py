# %% [markdown]
# # Which divisors are allowed?
#
# Existence at alpha * tau * N = 1 is tied to the SL(2, C) stability of the
# divisor as a binary form.  The multiplicity rule is compared with a brute
# force search over one-parameter subgroups.

# %%
import numpy as np

from gravvortex import Divisor, git_classify, hilbert_mumford_oracle
from gravvortex.sections import closed_cstar_orbit

rng = np.random.default_rng(0)


def random_divisor(mult):
    return Divisor(tuple(complex(*rng.normal(size=2)) for _ in mult), mult)


for mult in [(1, 1, 1, 1), (2, 1, 1), (2, 2), (3, 1), (2, 2, 1), (3, 2, 1)]:
    d = random_divisor(mult)
    rule, brute = git_classify(d), hilbert_mumford_oracle(d)
    print(f"{str(mult):14s} {rule.kind.value:26s} oracle {brute.kind.value:26s} "
          f"closed C* orbit {closed_cstar_orbit(d)}")
