"""
A small seeded sweep over the sample size, written to CSV.

Every trial draws from its own stream keyed by (seed, s, trial index), so
the files are identical across runs and independent of execution order.
"""

import sys
import tempfile

from fbcert.harness.config import make_config
from fbcert.harness.sweep import run_sweep

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp()
cfg = make_config("pev-sweep-s", s_values=[100, 500, 1000], k_values=[300], trials=10,
                  output_dir=out)
res = run_sweep(cfg)
for s in cfg.s_values:
    st = res.stats[s]
    print(f"s={s:>5d}  median={st.median:.4f}  IQR={st.iqr:.2e}  outliers={len(st.outliers)}")
print("outputs in", out)
