# Radon: a regression that forgets the floor of the measurement.
#
# The data depend on floor and uppm; the fitted model only sees uppm.
# County and soil are distractors that should not light up.

import numpy as np

from modelcritic import SignificanceConfig, build_report, propose_catalog, radon_scenario, render_report, run_check, validate_batch
from modelcritic.benchmarks import RADON_METADATA

d, s, model = radon_scenario(seed=0, include_floor=False)
print(d.n_rows, "rows,", s.m, "replicates")   # 500 rows, 500 replicates
print(model.program_text)                      # the model shown to a proposer

# group means: basement vs first floor
floor = d["floor"].values
print("mean radon, basement   ", d.y[floor == 0].mean())
print("mean radon, first floor", d.y[floor == 1].mean())

# the same contrast inside each replicate stays near zero
rep_gap = s.replicates[:, floor == 1].mean(1) - s.replicates[:, floor == 0].mean(1)
print("replicate gap 2.5/50/97.5%:", np.percentile(rep_gap, [2.5, 50, 97.5]))

# 20 catalog statistics, Bonferroni over all 20, alpha 0.01
batch = validate_batch(propose_catalog(d.schema(), 20, seed=0), d)
check = run_check(d, s, batch.accepted, SignificanceConfig(alpha=0.01), batch.rejected, batch.family_size)
for r in check.decision.significant:
    print("significant:", r.spec.text, "adjusted p", r.p_adjusted)

# human-readable report
print(render_report(build_report(check, RADON_METADATA, "radon"), "markdown"))

# the control model includes floor; nothing should be flagged
d2, s2, _ = radon_scenario(seed=0, include_floor=True)
check2 = run_check(d2, s2, validate_batch(propose_catalog(d2.schema(), 20), d2).accepted,
                   SignificanceConfig(alpha=0.01), family_size=20)
print("control discrepant:", check2.discrepant)
