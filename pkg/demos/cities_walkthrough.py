"""Build one city instance and compare the three tour constructions on it.

    python3 demos/cities_walkthrough.py

Four connected cities of side 0.1 with gaps of 0.35 each receive 12
nodes on average.  The script prints the per-city cycles, the merged tour
with its step increments, and an exact solution of a small sub-instance
to show the lower and upper sides of the sandwich.
"""

import math

import numpy as np

from densetsp import (
    CitySelection,
    DensityField,
    build_city_grid,
    city_cycles,
    exact_tsp,
    merge_cycles,
    sample_binomial,
    strips_tour,
)
from densetsp.experiments import merge_step_bound

r, s = 0.1, 0.35
grid = build_city_grid(r, s)
selection = CitySelection.from_lattice(grid, [(0, 0), (0, 1), (1, 1), (1, 2)])
inst = sample_binomial(selection, DensityField.uniform(), 48, seed=11)

cycles = city_cycles(inst)
print("city  nodes  method  length")
for l, c in enumerate(cycles):
    print(f"{l:4d}  {len(c.nodes):5d}  {c.method:6s}  {c.length:.4f}")
v_n = math.fsum(c.length for c in cycles)

merged, trace = merge_cycles(inst.nodes, selection, cycles, strict=False)
print(f"\nsum of city cycles V_n  {v_n:.4f}")
print(f"merged tour             {merged.length:.4f}")
print(f"per-step budget         {merge_step_bound(r, s):.4f}")
print("step increments        ", np.round(trace.step_increments(), 4))

whole = strips_tour(inst.nodes)[0]
print(f"strips on the whole square {whole.length:.4f}")

# with three nodes per city the whole instance fits the exact solver
small = sample_binomial(selection, DensityField.uniform(), 12, seed=3)
small_cycles = city_cycles(small)
lower = math.fsum(c.length for c in small_cycles)
optimum = exact_tsp(small.nodes).length
upper = merge_cycles(small.nodes, selection, small_cycles, strict=False)[0].length
print(f"\n12 nodes: V_n {lower:.4f} <= optimum {optimum:.4f} <= merged {upper:.4f}")
