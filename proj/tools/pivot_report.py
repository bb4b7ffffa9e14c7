#!/usr/bin/env python3
"""Pivot an lsrlab grid report into summary tables.

--table loss             one block per regularised set, rows = latent dims,
                         columns = <dataset>_loss, <dataset>_accuracy
--table interpretability rows = (regularised set, latent dim),
                         columns = <dataset>_<attribute> for each bound attribute
"""

import argparse
import csv
import sys

VERSION_LINE = "# lsrlab-report v1"
ATTRIBUTES = ("nd", "nr", "rc", "aij")


def read_rows(stream):
    first = stream.readline().rstrip("\r\n")
    if first != VERSION_LINE:
        raise ValueError(f"expected '{VERSION_LINE}', got '{first}'")
    return list(csv.DictReader(stream))


def ordered(values):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def cell_value(row, column):
    if row is None or row["status"] != "ok":
        return "NA"
    return row[column]


def loss_table(rows, out):
    datasets = ordered(r["dataset"] for r in rows)
    sets = ordered(r["regularised"] for r in rows)
    dims = sorted({int(r["latent_dim"]) for r in rows})
    index = {(r["regularised"], int(r["latent_dim"]), r["dataset"]): r for r in rows}
    writer = csv.writer(out, lineterminator="\n")
    header = ["regularised", "latent_dim"]
    for ds in datasets:
        header += [f"{ds}_loss", f"{ds}_accuracy"]
    writer.writerow(header)
    for reg in sets:
        for d in dims:
            line = [reg, d]
            for ds in datasets:
                row = index.get((reg, d, ds))
                line += [cell_value(row, "loss_total"), cell_value(row, "reconstruction_accuracy")]
            writer.writerow(line)


def interpretability_table(rows, out):
    datasets = ordered(r["dataset"] for r in rows)
    sets = ordered(r["regularised"] for r in rows)
    dims = sorted({int(r["latent_dim"]) for r in rows})
    index = {(r["regularised"], int(r["latent_dim"]), r["dataset"]): r for r in rows}
    bound = [a for a in ATTRIBUTES if any(a in s.split("+") for s in sets)]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["regularised", "latent_dim"] + [f"{ds}_{a}" for ds in datasets for a in bound])
    for reg in sets:
        members = reg.split("+")
        for d in dims:
            line = [reg, d]
            for ds in datasets:
                row = index.get((reg, d, ds))
                for a in bound:
                    line.append(cell_value(row, f"interpretability_{a}") if a in members else "")
            writer.writerow(line)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("report", help="grid.csv written by `lsrlab grid`")
    parser.add_argument("--table", choices=("loss", "interpretability"), default="loss")
    parser.add_argument("--out", help="output CSV (default stdout)")
    args = parser.parse_args(argv)
    with open(args.report, newline="") as f:
        rows = read_rows(f)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        (loss_table if args.table == "loss" else interpretability_table)(rows, out)
    finally:
        if args.out:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
