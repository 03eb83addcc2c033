"""
Bracketing a missing value with a small regression forest
==========================================================

Four windowed CART trees predict normalized Education from the other nine
variables. The spread of their leaf values, widened by a margin, becomes the
search interval for the genetic algorithm.
"""
import numpy as np

from aeimpute import SynthConfig, derive_bounds, generate, normalize, train_forest

data = normalize(generate(SynthConfig(n_records=3000, seed=2))).values
train_rows, test_rows = data[:2400], data[2400:]

forest = train_forest(train_rows, response_index=4, n_trees=4, seed=2)
for t in forest.trees:
    print(f"tree: depth {t.root.depth()}, {t.root.n_nodes()} nodes, "
          f"window {t.window_size} rows after {t.window_rounds} rounds")

rec = test_rows[0].copy()
true_z = rec[4]
rec[4] = np.nan
b = derive_bounds(forest, rec, margin=0.05)
print("leaf predictions:", forest.leaf_predictions(rec).round(3))
print(f"bounds [{b.lo[0]:.3f}, {b.hi[0]:.3f}] vs true {true_z:.3f}")

# how often the interval holds the truth
hits = 0
for r in test_rows:
    q = r.copy()
    q[4] = np.nan
    bb = derive_bounds(forest, q)
    hits += bb.lo[0] <= r[4] <= bb.hi[0]
print(f"containment on held-out rows: {hits / len(test_rows):.1%}")
