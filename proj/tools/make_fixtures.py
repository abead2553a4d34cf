"""Regenerates the bundled fixtures in data/ (deterministic)."""

import math
import pathlib
import random


def two_moons(n, noise, seed):
    rng = random.Random(seed)
    rows = []
    for k in range(n):
        upper = k % 2 == 0
        t = math.pi * rng.random()
        if upper:
            x, y, label = math.cos(t), math.sin(t), 1
        else:
            x, y, label = 1.0 - math.cos(t), 0.5 - math.sin(t), -1
        rows.append((x + rng.gauss(0.0, noise), y + rng.gauss(0.0, noise), label))
    return rows


def write(path, rows):
    with open(path, "w") as fh:
        for x, y, label in rows:
            fh.write(f"{x:.6f},{y:.6f},{label:+d}\n")


def sparse_lines(n, width, seed):
    # First line is the canonical "1 2:0.5"; the last line pins the widest index.
    rng = random.Random(seed)
    lines = ["1 2:0.5"]
    for k in range(1, n):
        label = rng.choice([1, -1])
        cols = sorted(rng.sample(range(1, width + 1), rng.randint(1, 4)))
        if k == n - 1 and width not in cols:
            cols.append(width)
        cells = " ".join(f"{c}:{rng.uniform(-3, 3):.5g}" for c in cols)
        lines.append(f"{label:+d} {cells}" if k % 3 == 0 else f"{label} {cells}")
    return lines


def duplicated(rows):
    # Every point appears twice, so the full hyper-Gram has repeated rows
    # beyond the (i, j) / (j, i) symmetry.
    out = []
    for row in rows:
        out.extend([row, row])
    return out


if __name__ == "__main__":
    data = pathlib.Path(__file__).resolve().parent.parent / "data"
    write(data / "two_moons.csv", two_moons(40, 0.1, 7))
    write(data / "two_moons_20.csv", two_moons(20, 0.1, 11))
    (data / "sparse_20.libsvm").write_text("\n".join(sparse_lines(20, 7, 5)) + "\n")
    write(data / "duplicate_rows.csv", duplicated(two_moons(4, 0.1, 3)))
