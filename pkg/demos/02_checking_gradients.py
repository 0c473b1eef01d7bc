"""Finite differences catch a broken backward pass.

The three trainable models are checked at reduced size, first with the real
convolution gradient and then with one that is deliberately halved.
"""
from capsbench.autodiff import check_model, corrupted_backward
from capsbench.bench.tools import gradcheck_model

for kind in ("capsnet", "lenet", "tiny_resnet"):
    model, loss_fn = gradcheck_model(kind, seed=0)
    print(f"{kind:12s} {check_model(model, loss_fn, 1e-4, 50).summary()}")

print("\nwith the convolution kernel gradient scaled by one half:")
model, loss_fn = gradcheck_model("lenet", seed=0)
with corrupted_backward():
    report = check_model(model, loss_fn, 1e-4, 50)
print(report.summary())
for e in report.worst(3):
    print(f"  {e.name}{list(e.index)}  analytic {e.analytic:+.6f}  numeric {e.numeric:+.6f}")
