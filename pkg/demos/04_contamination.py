"""l1 versus l2 innovations when the noise has a heavy component."""
import numpy as np

from tswlad.experiment import run_seed, table1_config

print("\nBoth estimators see the same stream; only the innovation differs.")
print("   q    TSWLAD   l2 baseline")
for q in (0.0, 0.1, 0.3):
    cfg = table1_config(q, n_seeds=1, horizon=4000)
    errs = np.array([[r.final_errors["tswlad"], r.final_errors["l2-baseline"]]
                     for r in (run_seed(cfg, s) for s in range(3))])
    med = np.median(errs, axis=0)
    print(f"  {q:.1f}   {med[0]:.4f}    {med[1]:.4f}")

print("\nThe mixture's wide component has variance 10.  Under that mild contamination the")
print("l2 baseline, which models the saturated mean exactly, is competitive; the gap")
print("opens when outliers are far larger than the clean noise (see the sentencing demo).")
