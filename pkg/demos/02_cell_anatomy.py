#!/usr/bin/env python3
"""Look inside one LSTM cell step and the stacked window forward pass.

The cell combines the input value, the previous hidden state and the
previous cell state through three sigmoid gates and a tanh candidate:

    i = sigma(Wi x + Vi h + bi)        how much new candidate to admit
    f = sigma(Wf x + Vf h + bf)        how much old cell state to keep
    o = sigma(Wo x + Vo h + bo)        how much of tanh(c) to emit
    c = f * c_prev + i * tanh(Wc x + Vc h + bc)
    h = o * tanh(c)
"""

import numpy as np

from prognost import TrainConfig, forward_window, init_params, lstm_cell_forward
from prognost.model import layer_zeros

np.set_printoptions(precision=4, suppress=True)

# ---- a zero-weight cell shows the pure gate arithmetic ----------------------
p = layer_zeros(input_size=1, hidden_size=3)
h, c, cache = lstm_cell_forward(p, np.array([0.7]), np.zeros(3), np.zeros(3))
print("zero weights: gates are all sigma(0) = 0.5, candidate tanh(0) = 0,")
print(f"  i={cache.i}  f={cache.f}  o={cache.o}  ->  c={c}  h={h}")

# with a nonzero starting cell state, the forget gate halves it
c0 = np.array([0.8, -0.4, 0.0])
h, c, _ = lstm_cell_forward(p, np.array([0.7]), np.zeros(3), c0)
print(f"carried state: c = 0.5*c0 = {c},  h = 0.5*tanh(c) = {h}")

# ---- a trained-shape stack: one scalar in, one scalar out --------------------
params = init_params(TrainConfig(hidden_dims=(8, 4)), seed=7)
window = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
y, cache = forward_window(params, window)
print(f"\nstacked 8/4 model on window {window}: prediction {y:.5f}")

# the cache keeps every step's gate values for backpropagation through time
step, layer = 4, 1
cc = cache.steps[step][layer]
print(f"step {step + 1}, layer {layer + 1}: forget gate {cc.f[0]}")
print(f"hidden state feeding the regression head: {cache.head_input[0]}")

# gates live strictly inside (0,1), so |h| < 1 no matter the input
extreme, _ = forward_window(params, np.array([1e6, -1e6, 1e6, -1e6, 1e6]))
print(f"\nprediction stays finite for absurd inputs: {extreme:.5f}")
