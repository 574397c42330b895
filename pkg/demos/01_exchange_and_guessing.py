"""How Alice and Bob turn one Fibonacci pair into three key bits.

Run with ``python3 demos/01_exchange_and_guessing.py``.
"""

# %% The alphabet
# Pumps are eight consecutive Fibonacci numbers.  Each one splits into its
# two predecessors, which are the values Alice and Bob can hold.
from fibqkd.fibcode import (
    DEFAULT_ALPHABET as A,
    exchange_bits,
    guess_success,
    observation_table,
)

print("pumps:", list(A))
for pump, a, b in A.configurations()[:4]:
    print(f"  pump {pump:2d} -> Alice {a:2d}, Bob {b:2d}, key block {A.encode(pump)}")

# %% The public exchange
# Each party announces one parity bit of their own value.  Bob flips his
# bit when Alice's value is odd, so the pair of bits alone never pins the pump.
print("\npublic bits for pump 13 (8 + 5) and pump 21 (13 + 8):")
print("  ", exchange_bits(8, 5), exchange_bits(13, 8))

# %% What Eve learns from the public channel
for bits, pumps in observation_table(A).items():
    print(f"  Eve hears {bits} -> pump is one of {pumps}")
print("uniform guess succeeds with probability", guess_success(A, mode="uniform"))
print("best single guess succeeds with probability", guess_success(A, mode="ml"))

# %% Cross-check by simulation
import numpy as np

from fibqkd.parties import simulate_guessing

print("simulated:", simulate_guessing(A, 200_000, np.random.default_rng(1)))
