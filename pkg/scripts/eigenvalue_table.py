"""Covering numbers and log-space eigenvalue bounds over a small grid of inputs."""

from reachcert import apps


def main():
    print(f"{'N':>3} {'T':>8} {'nu':>14}  branch")
    for N in (2, 3, 5):
        for T in (0.75, 4.0, 32.0):
            c = apps.covering(T, N)
            print(f"{N:>3} {T:>8} {c.value:>14.6g}  {c.branch}")
    print()
    print(f"{'tau':>8} {'diameter':>12} {'log lambda1':>14}")
    for tau in (0.0625, 0.125, 0.25, 0.5):
        r = apps.eigenvalue_report(2, 2, 2.0, tau)
        print(f"{tau:>8} {r.diameterUpper:>12.6g} {r.log_lambda1_lower:>14.7g}")


if __name__ == "__main__":
    main()
