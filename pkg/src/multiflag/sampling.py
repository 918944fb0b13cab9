"""Random and constructed arm configurations for verification sweeps."""

from __future__ import annotations

import numpy as np

from . import hyperspherical as hs
from .arm import AngularConfig, ArmDims


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_config(dims: ArmDims, rng: np.random.Generator,
                  x0_scale: float = 1.0) -> AngularConfig:
    """Uniform directions on each sphere, Gaussian base point."""
    z = np.vstack([random_unit(rng, dims.ambient) for _ in range(dims.n + 1)])
    return AngularConfig(dims=dims, x0=x0_scale * rng.normal(size=dims.ambient), z=z)


def random_regular_config(dims: ArmDims, rng: np.random.Generator,
                          min_abs_a: float = 0.05,
                          chart_margin: float = 0.0,
                          max_tries: int = 10000) -> AngularConfig:
    """Rejection-sample a configuration with every |A_i| >= min_abs_a.

    chart_margin > 0 additionally keeps every sphere's chart angles away
    from the chart boundary (needed by chart-coefficient operations, not by
    the embedded machinery).
    """
    for _ in range(max_tries):
        q = random_config(dims, rng)
        a = np.sum(q.z[:-1] * q.z[1:], axis=1)
        if a.size and np.min(np.abs(a)) < min_abs_a:
            continue
        if chart_margin > 0.0:
            if hs.interior_margin(q.z) <= chart_margin:
                continue
        return q
    raise RuntimeError("rejection sampling failed; loosen the margins")


def singular_config(dims: ArmDims, rng: np.random.Generator,
                    index: int) -> AngularConfig:
    """Configuration with segments `index` and `index`+1 exactly orthogonal
    (A_index = 0), everything else random with the regular margins."""
    if not 1 <= index <= dims.n:
        raise IndexError("singular index needs 1 <= index <= n")
    q = random_regular_config(dims, rng)
    z = np.array(q.z)
    w = z[index] - (z[index] @ z[index - 1]) * z[index - 1]
    nrm = np.linalg.norm(w)
    if nrm < 1e-8:  # z_{index+1} nearly parallel to z_index; redraw direction
        w = random_unit(rng, dims.ambient)
        w -= (w @ z[index - 1]) * z[index - 1]
        nrm = np.linalg.norm(w)
    z[index] = w / nrm
    return AngularConfig(dims=dims, x0=q.x0, z=z)


def collinear_config(dims: ArmDims, direction: np.ndarray | None = None,
                     x0: np.ndarray | None = None) -> AngularConfig:
    """Perfectly straight arm; defaults to the first ambient axis, which is
    interior for every chart."""
    if direction is None:
        direction = np.zeros(dims.ambient)
        direction[0] = 1.0
    if x0 is None:
        x0 = np.zeros(dims.ambient)
    z = np.tile(np.asarray(direction, dtype=float), (dims.n + 1, 1))
    return AngularConfig(dims=dims, x0=x0, z=z)
