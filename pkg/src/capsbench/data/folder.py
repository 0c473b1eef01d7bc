"""On-disk dataset layout: ``<root>/<dataset>/<class-id>/<image>.pgm``.

An optional ``index.csv`` (columns ``path,label``, paths relative to the
dataset directory) overrides directory-derived labels.
"""
from __future__ import annotations

import csv
from pathlib import Path

from .dataset import Sample
from .pgm import load_pgm, save_pgm


class DatasetNotFound(FileNotFoundError):
    pass


def load_folder(path) -> list[Sample]:
    root = Path(path)
    if not root.is_dir():
        raise DatasetNotFound(f"dataset directory {root} does not exist")
    index = root / "index.csv"
    samples = []
    if index.exists():
        with index.open(newline="") as fh:
            for row in csv.DictReader(fh):
                samples.append(Sample(load_pgm(root / row["path"]), int(row["label"]), row["path"]))
        return samples
    class_dirs = sorted((d for d in root.iterdir() if d.is_dir()),
                        key=lambda d: (0, int(d.name), "") if d.name.isdigit() else (1, 0, d.name))
    for label, d in enumerate(class_dirs):
        target = int(d.name) if d.name.isdigit() else label
        for f in sorted(d.glob("*.pgm")):
            samples.append(Sample(load_pgm(f), target, f"{d.name}/{f.name}"))
    if not samples:
        raise DatasetNotFound(f"no .pgm images under {root}")
    return samples


def write_folder(samples, path, maxval: int = 255) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    counters: dict[int, int] = {}
    for s in samples:
        k = counters.get(s.label, 0)
        counters[s.label] = k + 1
        rel = Path(str(s.label)) / f"{k:05d}.pgm"
        (root / rel.parent).mkdir(exist_ok=True)
        save_pgm(root / rel, s.image, maxval)
        rows.append((rel.as_posix(), s.label))
    with (root / "index.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "label"])
        w.writerows(rows)
    return root
