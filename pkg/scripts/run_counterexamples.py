"""Stream both chain constructions and print their growth summaries."""
import argparse
import time

from twoweight.counterexamples import run_large_gamma, run_small_gamma


def summarize(res, keys):
    for name in keys:
        rep = res.reports[name]
        N = res.depth
        print(f"  {name:12s} S(1e3)={rep.at(1000):.6g}  S(N)={rep.at(N):.6g}  "
              f"increment slope={rep.increment_slope:.4f}  verdict={rep.verdict}")
    for name, v in res.verdicts.items():
        print(f"  classifier {name}: a={v.term.a:.4g} b={v.term.b:.4g} -> {v.label}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=10**6)
    args = ap.parse_args()

    t0 = time.perf_counter()
    res = run_small_gamma(N=args.depth)
    print(f"decreasing chain (p=2, q=1/2, gamma=1/4, eps=1/2), {time.perf_counter() - t0:.1f} s")
    summarize(res, ("necessary", "gamma_wolff"))

    t0 = time.perf_counter()
    res = run_large_gamma(N=args.depth)
    print(f"increasing chain (p=2, q=1/2, beta=5/4), {time.perf_counter() - t0:.1f} s")
    summarize(res, ("sufficient", "sup_form", "comparison"))
    print(f"  lower estimate {res.extras['lower_estimate']:.6g}, expected slope {res.extras['expected_slope']:.4f}")


if __name__ == "__main__":
    main()
