"""Map and time-series exports from a pipeline run.

The heatmap export writes one interval of a matrix as a GeoJSON layer
(one line feature per road, value scaled by the matrix-wide maximum),
ready for any GIS viewer. The time-series export overlays the days of a
scenario as CSV plus a dependency-free SVG plot. Both writers are
byte-deterministic: identical inputs give identical files.
"""

import json
import os
import tempfile

import numpy as np

from tracepattern.export import export_heatmap, export_timeseries, read_matrix_csv
from tracepattern.network import load_network
from tracepattern.pipeline import RunConfig, run_pipeline
from tracepattern.synth import Scenario, generate, uniform_profile, write_scenario

out_root = tempfile.mkdtemp(prefix="tracepattern_demo_")
scenario = Scenario(seed=23, grid_rows=4, grid_cols=4,
                    demand_profile=uniform_profile(10), n_days=3)
gen = generate(scenario)
net_path, trace_path = write_scenario(gen, os.path.join(out_root, "data"))
config = RunConfig(traces_path=trace_path, network_path=net_path,
                   out_dir=os.path.join(out_root, "run"))
run_pipeline(config)

# one-interval heatmap of flow
flow = read_matrix_csv(os.path.join(config.out_dir, "flow.csv"))
net = load_network(net_path)
layer = export_heatmap(flow, net, "2016-10-01T08:00")
heat_path = os.path.join(out_root, "flow_0800.geojson")
with open(heat_path, "w", encoding="utf-8") as fh:
    json.dump(layer, fh, indent=2, sort_keys=True)
ratios = [f["properties"]["ratio"] for f in layer["features"]]
print(f"heatmap: {len(layer['features'])} road features -> {heat_path}")
print(f"  ratio range [{min(ratios):.3f}, {max(ratios):.3f}] "
      f"(max over the whole matrix = 1.0 reference)")

# daily-overlay time series of total flow per slot
days = sorted({iv.day for iv in flow.intervals})
day_matrix = np.stack([
    flow.values[:, [i for i, iv in enumerate(flow.intervals) if iv.day == d]].sum(axis=0)
    for d in days])
csv_path = os.path.join(out_root, "flow_by_slot.csv")
svg_path = os.path.join(out_root, "flow_by_slot.svg")
export_timeseries(day_matrix, days, csv_path, svg_path,
                  "Total flow by slot", "orders")
print(f"time series: {day_matrix.shape[0]} days x {day_matrix.shape[1]} slots")
print(f"  -> {csv_path}")
print(f"  -> {svg_path}")
