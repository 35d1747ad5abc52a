"""Betti numbers of the selected cell complex as delta shrinks."""

import argparse

from reachcert import expr as ex
from reachcert import homology as hm

CASES = {
    "circle": ("x^2 + y^2 - 1", 2.0, 0.0625),
    "two_circles": ("((x - 3)^2 + y^2 - 1)*((x + 3)^2 + y^2 - 1)", 5.0, 0.03),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("case", choices=sorted(CASES), nargs="?", default="circle")
    ap.add_argument("--halvings", type=int, default=4)
    args = ap.parse_args()

    text, L, tau = CASES[args.case]
    f = ex.parse(text, 2)
    delta, _ = hm.delta_for_reach(L, tau)
    for _ in range(args.halvings):
        grid = hm.select_boxes(f, L, delta, tau_lower=tau)
        cx = hm.complex_of(grid)
        print(f"delta={grid.delta:.5g} n={grid.n} cells={grid.selected.shape[0]} "
              f"V={cx.V} E={cx.E} F={cx.F} betti={cx.betti}")
        delta /= 2


if __name__ == "__main__":
    main()
