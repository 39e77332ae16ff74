# Heavy tails: a Gaussian model fit to Student-t data.
#
# Mean and variance look fine; kurtosis does not.

import numpy as np

from modelcritic import ModelFamily, parse_spec, posterior_predictive, run_check, sample_data
from modelcritic.checks import null_distribution
from modelcritic.families import GAUSSIAN, STUDENT_T

d = sample_data(ModelFamily(STUDENT_T, {"df": 3}), 200, seed=1)
s = posterior_predictive(ModelFamily(GAUSSIAN), d, 500, seed=2)

specs = [parse_spec(t) for t in ("mean()", "variance()", "excess_kurtosis()", "range()")]
report = run_check(d, s, specs)   # family of 4, Bonferroni
for r in report.ordered_results():
    print(f"{r.spec.text:22s} observed {r.observed:9.4f}  p {r.p_raw:.3f}  adjusted {r.p_adjusted:.3f}")

# where the observed kurtosis sits relative to its null
null = null_distribution(parse_spec("excess_kurtosis()"), d, s)
print("null kurtosis quantiles:", np.quantile(null.values, [0.5, 0.9, 0.99, 1.0]))
print("observed:", report.results[2].observed)

# resolution of the p-value is 1/m
print("smallest nonzero p possible:", 1 / s.m)
