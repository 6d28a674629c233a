"""Miniature coverage study (a few minutes on a laptop).

Shrinks every knob of the Monte Carlo experiment so the qualitative pattern
shows up quickly: the credible interval (QB) under-covers the true
coefficient, the bootstrap percentile interval (QBB) restores coverage at
the cost of extra length, and the single-draw variant (QBB1) over-covers.
For report-quality numbers use the `qbcf coverage` command at desk scale
(n=500, 200 replications, B=100, S=1000).
"""

import warnings

from qbcf import DgpSpec, RandomStream, run_coverage_experiment

warnings.filterwarnings("ignore")

spec = DgpSpec(design="I", J=2, n=300)
report = run_coverage_experiment(
    spec,
    reps=40,
    rng=RandomStream(seed=2024),
    levels=(0.90,),
    methods=("QB", "QBB", "QBB-t", "QBB1"),
    B=60,
    S=400,
    burn_in=400,
    threads=4,
)

print(report.format_table())
print(f"\n(effective replications: {report.reps_effective}; "
      f"failures: {len(report.failures)})")
