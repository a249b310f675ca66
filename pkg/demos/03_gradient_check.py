#!/usr/bin/env python3
# The training math is hand-written, so verify it the honest way: compare
# backpropagation-through-time gradients against central finite differences.

import numpy as np

from tokencast.lstm import backward, forward, gradient_check, init

rng = np.random.default_rng(0)

model = init(d=4, H=3, seed=42)
window = rng.uniform(-1.0, 1.0, (6, 4))  # six days of four features
target = 0.02

prediction, trace = forward(model, window)
print(f"prediction for a random window: {prediction:+.6f} (target {target:+.3f})")

grads = backward(model, trace, window, target)
print(f"analytic d(loss)/d(b_y) = {grads.b_y[0]:+.6f}")
print(f"2 * (pred - target)    = {2 * (prediction - target):+.6f}  (one-line chain rule)")

err = gradient_check(model, window, target, h=1e-5)
print(f"\nmax relative error, analytic vs finite differences: {err:.3e}")
assert err < 1e-4, "BPTT disagrees with finite differences"
print("all parameter gradients agree to better than 1e-4")
