# %% [markdown]
# # Pseudo heatmap and center extraction
#
# Shifted thing voxels are counted per class on a cartesian BEV grid. The
# class-agnostic sum is the heatmap; local maxima under a window max-pool are
# the instance centers. Equal scores inside one window keep the row-major
# earliest cell only.

# %%
import numpy as np

from pseudoheat import GridConfig, build_pseudo_image, class_agnostic, extract_centers
from pseudoheat.heatmap import Heatmap

cfg = GridConfig()
rng = np.random.default_rng(1)

# three objects: two cars and a pedestrian, each a tight cloud of shifted voxels
centers = np.array([[10.0, 4.0], [-6.0, 12.0], [3.0, -8.0]])
classes = np.array([1, 1, 6])
shifted = np.concatenate([c + rng.normal(0, 0.08, size=(60, 2)) for c in centers])
cls = np.repeat(classes, 60)

img = build_pseudo_image(shifted, cls, cfg, n_classes=20)
hm = class_agnostic(img)
print("pseudo image", img.counts.shape, "total voxels", img.total)

# %%
cs = extract_centers(hm, cfg)
print("centers found:", len(cs))
for xy, s in zip(cs.xy, cs.scores):
    print(f"  ({xy[0]:6.2f}, {xy[1]:6.2f}) m  score {s}")

# %%
# a flat plateau yields one center, at its row-major first cell
flat = np.zeros((8, 8), dtype=np.int64)
flat[3:5, 3:5] = 4
cs = extract_centers(Heatmap(flat, 0.2, 0.0), cfg)
print("plateau centers (row, col):", list(zip(cs.rows.tolist(), cs.cols.tolist())))
