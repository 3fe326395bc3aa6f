"""Certify every preset and print its admissible step sizes.

    python demos/01_certify_presets.py
"""

from graphsplit import parameter_ranges
from graphsplit.presets import default_instances
from graphsplit.scheme import check_assumptions, check_explicit

ELL = 1.0

for pre in default_instances(n=5):
    report = check_assumptions(pre.scheme)
    explicit = check_explicit(pre.scheme).ok
    rng = parameter_ranges(pre.scheme, ELL)
    status = "ok" if report.passed and explicit else "FAILED " + ",".join(report.failed())
    print(f"{pre.name:20s} n={pre.n:<2d} p={pre.p:<2d} {pre.regularity:11s} "
          f"tau={rng.tau:8.4f} gamma_max={rng.gamma_max:8.4g}  {status}")

# A detailed report for one scheme.
print()
print("\n".join(check_assumptions(default_instances(5)[2].scheme).lines()))
