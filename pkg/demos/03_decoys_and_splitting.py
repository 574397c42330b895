"""Two further checks: a test-state decoy and photon-number splitting.

Run with ``python3 demos/03_decoys_and_splitting.py``.
"""

# %% The test state
# An alternating-sign superposition of the alphabet overlaps every member
# equally but is orthogonal to any pair of consecutive members.
import math

from fibqkd.fibcode import DEFAULT_ALPHABET as A
from fibqkd.quantum import OamKet, inner_product, superpose, test_state

psi = test_state(A)
print("|<psi|F>|:", round(abs(inner_product(psi, OamKet.basis(13))), 6), "vs", round(1 / math.sqrt(8), 6))
print("|<psi|5+8>|:", abs(inner_product(psi, superpose([5, 8]))))

# %% Decoy sessions
# Pairs where Alice's value is not Fibonacci become decoys; Bob projects his
# photon on the test state.  An Eve who resends adjacent pairs silences it.
from fibqkd.harness import SessionConfig, run_session

clean, _ = run_session(SessionConfig(seed=3, decoy=True, target_pairs=5000))
dirty, _ = run_session(
    SessionConfig(seed=3, decoy=True, target_pairs=5000, eve="intercept-resend", intercept_rate=1.0, resend_policy="adjacent")
)
print("click rate without Eve:", round(clean.decoy["click_rate"], 4), clean.decoy["verdict"])
print("click rate with Eve:   ", round(dirty.decoy["click_rate"], 4), dirty.decoy["verdict"])

# %% Photon-number splitting
# Every photon in a multi-photon pulse comes from its own down-conversion,
# so a photon split off by Eve says nothing about the one Bob keeps.
report, _ = run_session(SessionConfig(seed=3, target_pairs=100, pns_pulses=100_000))
print("split-off vs kept photon:", report.pns)
