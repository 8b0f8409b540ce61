# %% [markdown]
# # Panoptic quality
#
# Segments match when their IoU exceeds 0.5. PQ is SQ times RQ per class;
# PQ-dagger replaces PQ with SQ for stuff classes.

# %%
from pseudoheat import PanopticLabeling, panoptic_quality, semantic_kitti_table

table = semantic_kitti_table()
# one car of 4 points, two road points
gt = PanopticLabeling([1, 1, 1, 1, 9, 9], [1, 1, 1, 1, 0, 0])

# %%
good = PanopticLabeling([1, 1, 1, 9, 9, 9], [7, 7, 7, 0, 0, 0])
half = PanopticLabeling([1, 1, 9, 9, 9, 9], [7, 7, 0, 0, 0, 0])
for name, pred in (("IoU 0.75", good), ("IoU 0.50", half)):
    rep = panoptic_quality(pred, gt, table)
    print(f"{name}: car PQ {rep.pq[1]:.3f} SQ {rep.sq[1]:.3f} RQ {rep.rq[1]:.3f}")

# %%
rep = panoptic_quality(good, gt, table)
for k in ("PQ", "PQ_dagger", "PQ_Th", "PQ_St", "mIoU"):
    print(f"{k:10s} {rep[k]:6.2f}")
csv = rep.to_csv({c: table.name(c) for c in table.class_ids}).splitlines()
print("\n".join(l for l in csv if l.split(",")[0] in ("class_id", "1", "9")))
