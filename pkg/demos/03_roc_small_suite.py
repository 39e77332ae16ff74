# Detection rate against false alarms on a small labelled suite.
#
# Catalog proposals versus the fixed {mean, variance} pair.

from modelcritic import evaluate_suite, generate_suite, rates, roc
from modelcritic.benchmarks import standard_suite
from modelcritic.calibration import dominance, wilson_interval

suite = standard_suite(n=200, m=300, copies=5).select(
    ["t_vs_gaussian", "negbin_vs_poisson", "gaussian_control", "poisson_control"])
pairs = generate_suite(suite, seed=0)
print(len(pairs), "pairs:", sorted({p.config for p in pairs}))

catalog = evaluate_suite(pairs, "catalog", n_proposals=24)
baseline = evaluate_suite(pairs, "baseline")

for alpha in (0.01, 0.05, 0.1):
    print(f"alpha {alpha}: catalog tpr/fpr {rates(catalog, alpha)}  baseline {rates(baseline, alpha)}")

# decisions at any alpha come from the stored min adjusted p
pid = pairs[0].pair_id
print(pid, "min adjusted p:", catalog.decisions[pid][1])

print(dominance(roc(catalog), roc(baseline)).describe())

# with 10 no-discovery pairs and zero false alarms, the FPR could still be this high
print("95% Wilson upper bound, 0/10:", wilson_interval(0, 10)[1])

# ROC points as CSV, ready for any plotting tool
print(roc(catalog).to_csv()[:200])
