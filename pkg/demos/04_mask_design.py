"""
Mask design: transparency, feature size and flatness
====================================================

Singular-value experiments comparing mask patterns, the blur-optimal
feature size, and the thickness-to-width ratio of the visible prototype.
"""

import numpy as np

from flatcam import analysis, optics
from flatcam.config import build_mask, preset

# %%
# Denser random masks multiplex more but condition worse; the M-sequence
# keeps a flat spectrum.
reports = analysis.compare_transparency(seeds=range(10))
for kind in ("random50", "random75", "uniform", "mls50"):
    rs = [r for r in reports if r.params["kind"] == kind]
    print("%-9s median cond %9.3g  median sigma_min %8.3g" % (
        kind, np.median([r.condition_number for r in rs]),
        np.median([r.sigma_min_nonzero for r in rs])))

# %%
# Shrinking the feature size starves a pinhole of light. Under the box-blur
# model used here the M-sequence mask also loses conditioning, because the
# diffraction blur 2.44 lambda d / delta grows past the feature size.
for r in analysis.compare_pinhole_mls((30.0, 10.0, 5.0), n=255):
    print("%-12s sigma_max %8.3g  cond %9.3g" % (r.label, r.sigma_max, r.condition_number))

# %%
vis = preset("visible")
print("blur-optimal feature size (um):", optics.blur_sizes(vis.optics)["optimal_delta_um"])
m = analysis.design_metrics(vis.optics.d_um, vis.sensor_width, build_mask(vis.mask, vis.optics))
print("TWR %.4f, open fraction of the printed mask %.3f" % (m.twr, m.light_fraction))
