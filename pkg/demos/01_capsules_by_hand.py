"""How a capsule layer decides where its inputs go.

Run with ``python demos/01_capsules_by_hand.py``. Everything is printed; no
files are written.
"""
import numpy as np

from capsbench.capsnet import margin_loss, routing_forward, squash

np.set_printoptions(precision=4, suppress=True)
rng = np.random.default_rng(7)

# Squash keeps a vector's direction and maps its length into [0, 1).
# Short vectors shrink towards zero, long ones saturate just below one.
for length in (0.1, 0.5, 1.0, 3.0, 30.0):
    s = np.array([length, 0.0, 0.0])
    print(f"|s| = {length:5.1f}  ->  |squash(s)| = {np.linalg.norm(squash(s).data):.4f}")

# Eight lower capsules of dimension 4 vote for three classes of dimension 6.
# Capsules 0..4 are built to agree on class 1; the other three are noise.
u = rng.standard_normal((8, 4))
W = rng.standard_normal((8, 3, 4, 6)) * 0.2
target = rng.standard_normal(6)
for i in range(5):
    # choose W[i, 1] so that u_i @ W[i, 1] points along the shared target
    W[i, 1] = np.outer(u[i], target) / (u[i] @ u[i])

state = routing_forward(u, W, iterations=4)
print("\ncoupling of the agreeing capsules to each class, per iteration")
for it, c in enumerate(state.coupling_history):
    print(f"  iteration {it}: {c[:5].mean(axis=0)}")
print("coupling of the noisy capsules after routing:", state.c.data[5:].mean(axis=0))
lengths = np.linalg.norm(state.v.data, axis=-1)
print("class capsule lengths:", lengths, "-> predicted class", int(lengths.argmax()))

# The margin loss rewards a long capsule for the true class and short ones elsewhere.
T = np.eye(3)[1]
print("\nmargin loss with the true class 1:", float(margin_loss(state.v, T).data))
print("margin loss if the label were 0:   ", float(margin_loss(state.v, np.eye(3)[0]).data))
