#!/usr/bin/env python3
"""Plot the CSV written by `qenv price` or `qenv compare`.

    qenv price --refs -1,0,1 --out prices.csv
    python3 tools/plot_prices.py prices.csv -o prices.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="prices.png")
    ap.add_argument("--title", default=None)
    args = ap.parse_args()

    df = pd.read_csv(args.csv)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(df["x"], df["payoff"], color="0.6", lw=1, label="payoff")
    bounds = [c for c in df.columns if c.startswith(("upper", "lower"))]
    for c in bounds:
        ax.plot(df["x"], df[c], lw=1.8, ls="-" if c.startswith("upper") else "--", label=c)
    for c in (c for c in df.columns if c.startswith("ref_")):
        ax.plot(df["x"], df[c], lw=0.8, alpha=0.7, label="lambda = " + c[4:])
    ax.set_xlabel("x")
    ax.set_ylabel("price")
    if args.title:
        ax.set_title(args.title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print("wrote", args.out)


if __name__ == "__main__":
    main()
