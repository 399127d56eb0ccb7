import numpy as np
import pytest

from poreshape import (PhysicalParams, RunConfig, build_reference_domain,
                       nondimensionalize, triangulate)
from poreshape.equilibrium import build_context
from poreshape.mesh import MeshParams


@pytest.fixture(scope="session")
def table_params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def scales_nd(table_params):
    return nondimensionalize(table_params)


@pytest.fixture(scope="session")
def ref_geom():
    return build_reference_domain(d=2.0, l=10.0, s=0.5)


@pytest.fixture(scope="session")
def coarse_mesh(ref_geom):
    """Two-channel reference mesh at h = 0.5 nm (dimensionless units)."""
    return triangulate(ref_geom, MeshParams(h=0.5, refine_interface=4.0, seed=0))


@pytest.fixture(scope="session")
def coarse_ctx(table_params):
    """Evaluation context on the coarse mesh with charged fluid."""
    ctx, scales, nd = build_context(RunConfig(h=0.5e-9, seed=0), table_params)
    return ctx, scales, nd


@pytest.fixture(scope="session")
def base_state(coarse_ctx):
    """Coupled state at zero displacement on the coarse mesh."""
    ctx, scales, nd = coarse_ctx
    lam0 = np.zeros((ctx.layout_ref.size, 2))
    return ctx.evaluate(lam0, remember=True)
