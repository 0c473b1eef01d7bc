"""A miniature comparison run, as ``capsbench bench`` would do it.

Copies the desk configs into a scratch directory with fewer epochs so the
whole thing finishes in about a minute, then prints the results table.
Pass a number to change the epoch count: ``python demos/04_small_benchmark.py 30``.
"""
import shutil
import sys
import tempfile
from pathlib import Path

from capsbench.bench.runner import run_bench

epochs = sys.argv[1] if len(sys.argv) > 1 else "3"
here = Path(__file__).parent / "configs"
work = Path(tempfile.mkdtemp(prefix="capsbench-demo-"))

for name in ("desk_capsnet", "desk_lenet", "desk_fisherfaces", "desk_tiny_resnet"):
    text = (here / f"{name}.cfg").read_text()
    if name == "desk_capsnet":
        # the full desk CapsNet takes minutes per epoch; shrink the images for the demo
        text = text.replace("synth.size=64", "synth.size=32")
    # wall-clock timing so the table shows real training times
    text = text.replace("timing=off", "timing=wall")
    text += f"\nepochs={epochs}\noutput_dir={work / name}\n"
    (work / f"{name}.cfg").write_text(text.replace("epochs=30\n", "").replace("epochs=15\n", ""))

run_bench(work)
print((work / "results.md").read_text())
if "--clean" in sys.argv:
    shutil.rmtree(work)
else:
    print("per-epoch metrics and best checkpoints are under", work)
