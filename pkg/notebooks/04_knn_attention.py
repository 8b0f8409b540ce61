# %% [markdown]
# # Neighborhood attention
#
# Each thing voxel attends only to its k nearest voxels (itself included).
# With k equal to the voxel count the layer reduces to ordinary dense
# attention, which the reference implementation computes with full matrices.

# %%
import time

import numpy as np

from pseudoheat import AttentionWeights, ThingFeatures, attention_forward, knn_indices
from pseudoheat.reference import dense_attention

rng = np.random.default_rng(2)
m, c = 64, 32
feat = ThingFeatures(rng.normal(size=(m, c)), rng.uniform(-5, 5, size=(m, 3)))
w = AttentionWeights.random(c, heads=4, seed=0)

out = attention_forward(feat, knn_indices(feat.positions, m), w)
print("max |knn - dense| at k = M:", np.abs(out - dense_attention(feat.features, w)).max())

# %%
# with fixed k the cost grows linearly in the number of voxels
for m in (1_000, 10_000, 50_000):
    pos = rng.uniform(-50, 50, size=(m, 3)) * [1, 1, 0.05]
    f = ThingFeatures(rng.normal(size=(m, c)), pos)
    t0 = time.perf_counter()
    attention_forward(f, knn_indices(pos, 25), w)
    print(f"M = {m:6d}: {(time.perf_counter() - t0) * 1e3:7.1f} ms")
