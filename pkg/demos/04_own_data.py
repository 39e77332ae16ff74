# Your own data: CSV in, replicates in, statistics as text.

import tempfile
from pathlib import Path

import numpy as np

from modelcritic import load_dataset, load_samples, parse_spec, run_check
from modelcritic.critique import build_report, render_report
from modelcritic.errors import SpecError

tmp = Path(tempfile.mkdtemp())
rng = np.random.default_rng(0)

# a treatment that doubles the spread, a model that ignores it
n = 120
group = rng.integers(0, 2, n)
y = rng.normal(0, np.where(group == 1, 2.0, 1.0))
rows = ["group,site,y"] + [f"{g},{'north' if i % 3 else 'south'},{float(v)!r}" for i, (g, v) in enumerate(zip(group.tolist(), y))]
(tmp / "data.csv").write_text("\n".join(rows) + "\n")

reps = rng.normal(0, y.std(), (400, n))
(tmp / "reps.csv").write_text("\n".join(",".join(repr(v) for v in r.tolist()) for r in reps) + "\n")

d = load_dataset(tmp / "data.csv", target="y")
s = load_samples(tmp / "reps.csv")
print(d.schema())

# statistics are plain text; unknown columns are caught before anything runs
try:
    parse_spec("std(where treatment == 1)", d.schema())
except SpecError as exc:
    print("rejected:", exc)

specs = [
    "std(where group == 1) - std(where group == 0)",
    "abs(mean(where site == south) - mean(where site == north))",
    "proportion_outside(-3, 3)",
]
check = run_check(d, s, specs)
print(render_report(build_report(check, target="y"), "markdown"))
