"""
Coverage of the z-interval under the spiked model
=================================================

A reduced run of the coverage study (20 trials of 50 replications rather
than 100 of 100).  The command-line equivalent of the full run is::

    olsinterp simulate coverage --model spiked --n 50,100 --p 200 --seed 7
"""

import time

from olsinterp.simlab import CovariateModel, ModelKind, SimConfig, default_workers, run_coverage_sim

cfg = SimConfig(CovariateModel(ModelKind.SPIKED), n=50, p=200, trials=20, reps=50, seed=7)

start = time.perf_counter()
report = run_coverage_sim(cfg, alpha=0.1, workers=default_workers(), sweep=[(50, 200, 1.0), (100, 200, 1.0)])
for pt in report.points:
    s = pt.summary()
    print(f"n={s['n']:4d}  coverage {s['coverage']:.3f}  mean length {s['mean_length']:.3f}  "
          f"mean bias {s['mean']:+.4f} (se {s['se']:.4f})")
print(f"{time.perf_counter() - start:.1f}s")
