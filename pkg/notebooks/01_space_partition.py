# %% [markdown]
# # Cylindrical voxels and the polar BEV map
#
# Points are binned in (rho, phi, z) with half-open bins. Voxels then collapse
# onto a polar bird's-eye grid by dropping the z index.

# %%
import numpy as np

from pseudoheat import GridConfig, PointCloud, cylindrical_voxelize, voxel_to_bev
from pseudoheat.partition import voxel_means

cfg = GridConfig()
print("voxel grid (n_rho, n_phi, n_z):", cfg.cyl_dims)

# %%
# a point at rho = 10 m on the +y axis, one behind the sensor and one too far away
cloud = PointCloud(np.array([[0.0, 10.0, 0.0], [-10.0, 0.0, 0.0], [80.0, 0.0, 0.0]]))
va = cylindrical_voxelize(cloud, cfg)
print("flat voxel per point (-1 = out of range):", va.point_to_voxel)
print("(i_rho, i_phi, i_z) of non-empty voxels:\n", va.coords)

# %%
# phi = pi folds onto -pi, so the point behind the sensor lands in phi bin 0
print("phi bin of (-10, 0, 0):", va.coords[va.point_voxel[1], 1])

# %%
rng = np.random.default_rng(0)
pts = rng.uniform(-40, 40, size=(20_000, 3)) * [1, 1, 0.05]
va = cylindrical_voxelize(PointCloud(pts), cfg)
bev = voxel_to_bev(va, cfg)
print("non-empty voxels:", va.n_nonempty, "occupied polar cells:", len(bev.cell_ids))
print("points per voxel, max:", va.counts.max())
print("mean xy of the first three voxels:\n", voxel_means(va, pts[:, :2])[:3])
