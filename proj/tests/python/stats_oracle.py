"""Independent per-measure attribute statistics for corpus text files.

Usage: python stats_oracle.py CORPUS... > stats.csv
"""

import math
import pathlib
import re
import sys

NAMES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
# Slot weights of a 24-slot 4/4 measure: downbeat, half, quarters, eighths, sixteenth-triplet grid.
WEIGHTS = [1 if s % 2 == 0 else 0 for s in range(24)]
for s in (3, 9, 15, 21):
    WEIGHTS[s] = 2
WEIGHTS[6] = WEIGHTS[18] = 3
WEIGHTS[12] = 4
WEIGHTS[0] = 5


def midi(symbol):
    m = re.fullmatch(r"([A-G])([#b]?)(-?\d+)", symbol)
    if not m:
        raise ValueError(symbol)
    shift = {"#": 1, "b": -1, "": 0}[m.group(2)]
    return 12 * (int(m.group(3)) + 1) + NAMES[m.group(1)] + shift


def attributes(line):
    symbols = line.split()
    assert len(symbols) == 24, line
    onsets = [(s, midi(sym)) for s, sym in enumerate(symbols) if sym not in ("_", "r")]
    pitches = [p for _, p in onsets]
    nd = len(onsets)
    nr = max(pitches) - min(pitches) if nd >= 2 else 0
    rc = sum(5 - WEIGHTS[s] for s, _ in onsets)
    aij = sum(abs(b - a) for a, b in zip(pitches, pitches[1:])) / (nd - 1) if nd >= 2 else 0.0
    return nd, nr, rc, aij


def stats_row(path):
    lines = [l for l in pathlib.Path(path).read_text().splitlines() if l.strip() and not l.startswith("#")]
    table = [attributes(l) for l in lines]
    row = [pathlib.Path(path).stem]
    for col in zip(*table):
        mean = sum(col) / len(col)
        sd = math.sqrt(sum((x - mean) ** 2 for x in col) / len(col))
        row += [repr(float(mean)), repr(float(sd))]
    row += [str(sum(t[0] for t in table)), str(len(table))]
    return row


HEADER = "dataset,nd_mean,nd_std,nr_mean,nr_std,rc_mean,rc_std,aij_mean,aij_std,notes,measures"


def main(paths):
    print(HEADER)
    for p in paths:
        print(",".join(stats_row(p)))


if __name__ == "__main__":
    main(sys.argv[1:])
