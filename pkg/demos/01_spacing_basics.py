"""Maximal spacings of small point clouds.

Run with ``python demos/01_spacing_basics.py``.
"""
# %%
import numpy as np

from maxgap import CUBE, PointCloud, ReferenceShape, max_spacing, max_spacing_1d_exact

# %% [markdown]
# In one dimension the largest empty interval is just the largest gap between
# sorted points, boundaries included. Branch-and-bound agrees with it.

# %%
cloud = PointCloud(np.array([[0.2], [0.5], [0.9]]))
print("exact 1D:", max_spacing_1d_exact(cloud).scale)
print("bnb 1D:  ", max_spacing(cloud, tol=1e-9).scale)

# %% [markdown]
# In the square, the result carries a certificate: the true spacing lies in
# ``[scale, scale + certificate_gap]``.

# %%
rng = np.random.default_rng(0)
cloud = PointCloud(rng.random((500, 2)))
cube = max_spacing(cloud, CUBE)
ball = max_spacing(cloud, ReferenceShape.ball())
print(f"cube: side {cube.scale:.5f}, volume {cube.volume:.6f}, gap {cube.certificate_gap:.1e}")
print(f"ball: scale {ball.scale:.5f}, volume {ball.volume:.6f}, center {np.round(ball.center, 4)}")
