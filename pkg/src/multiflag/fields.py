"""Control vector fields of the articulated arm.

Every angular field is evaluable in an embedded form that lives in the flat
ambient space [x0 | z_1 | ... | z_{n+1}] of R^{(k+1)(n+2)} and never touches
a chart; this is the form the bracket engine differentiates, and it stays
smooth across chart boundaries.  Chart-coefficient forms (coordinates on
[x | theta_0 | ... | theta_n]) are derived on demand and fail loudly at
degenerate chart points.

Fields are batch-evaluable callables on ambient points so that the
finite-difference Jacobians of the bracket engine run as single vectorized
calls.  Off the constraint manifold each field follows a fixed smooth
extension that remains tangent to the manifold along it, which makes the
numerical brackets independent of the extension choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from . import hyperspherical as hs
from .arm import AngularConfig, ArmDims, CartesianConfig, gamma
from .numerics import subspace_angle, svd_rank

# Modes of a tangent vector's coordinate representation.
MODE_EMBEDDED = "embedded"    # [x0 | z_1 .. z_{n+1}], dim (k+1)(n+2)
MODE_CHART = "chart"          # [x | theta_0 .. theta_n], dim k(n+2)+1
MODE_CARTESIAN = "cartesian"  # [x_0 | .. | x_{n+1}], dim (k+1)(n+2)
MODE_CAR = "car"              # [x, y, theta_0 .. theta_n], dim n+3


@dataclass(frozen=True)
class TangentVector:
    """Coordinates of a tangent vector plus the layout they refer to."""

    coords: np.ndarray
    mode: str

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


@dataclass(frozen=True)
class FieldId:
    """Symbolic name of a field family plus its indices."""

    family: str
    i: Optional[int] = None
    m: Optional[int] = None
    r: Optional[int] = None

    FAMILIES = ("Z0", "Zi", "X0_m", "Xi_m",
                "cartesian_Zi", "cartesian_delta_r", "car_X1", "car_X2")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown field family {self.family!r}")


class Field:
    """Batch-evaluable vector field on a flat ambient space."""

    def __init__(self, mode: str, dim: int,
                 fn: Callable[[np.ndarray], np.ndarray], label: str):
        self.mode = mode
        self.dim = dim
        self._fn = fn
        self.label = label

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"{self.label}: expected points in R^{self.dim}")
        return self._fn(pts)

    def at(self, point: np.ndarray) -> np.ndarray:
        return self(np.asarray(point, dtype=float)[None])[0]

    def __repr__(self):  # pragma: no cover
        return f"Field({self.label}, mode={self.mode})"


def field_jacobian(f: Field, point: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a field at `point`, one batched call."""
    point = np.asarray(point, dtype=float)
    d = point.size
    eye = np.eye(d) * h
    pts = np.vstack([point[None] + eye, point[None] - eye])
    vals = f(pts)
    return (vals[:d] - vals[d:]).T / (2.0 * h)


# ---------------------------------------------------------------------------
# ambient layout helpers
# ---------------------------------------------------------------------------

def _blocks(y: np.ndarray, dims: ArmDims) -> np.ndarray:
    """View an angular/cartesian ambient batch (B, D) as (B, n+2, k+1)."""
    b = y.shape[0]
    return y.reshape(b, dims.joints, dims.ambient)


def _normalized(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _a_chain(z: np.ndarray) -> np.ndarray:
    """A_1..A_n from segment rows (B, n+1, k+1): A_j = <z_j, z_{j+1}>."""
    return np.sum(z[:, :-1, :] * z[:, 1:, :], axis=2)


def _f_products(a: np.ndarray, m: int) -> np.ndarray:
    """f_m^r = prod_{j=r+1}^m A_j for r = 0..m, as columns (B, m+1).

    a holds A_1..A_n (B, n); f_m^m = 1.
    """
    b = a.shape[0]
    out = np.ones((b, m + 1))
    for r in range(m - 1, -1, -1):
        out[:, r] = out[:, r + 1] * a[:, r]
    return out


# ---------------------------------------------------------------------------
# angular (embedded) field constructors
# ---------------------------------------------------------------------------

def z0_field(dims: ArmDims) -> Field:
    """Unit direction of the first segment, acting on the base point."""
    def fn(y):
        z = _blocks(y, dims)
        out = np.zeros_like(y)
        _blocks(out, dims)[:, 0, :] = z[:, 1, :]
        return out
    return Field(MODE_EMBEDDED, dims.cartesian_dim, fn, "Z0")


def z_field(dims: ArmDims, i: int) -> Field:
    """Projection of z_{i+1} onto the tangent of sphere i-1 (at z_i)."""
    if not 1 <= i <= dims.n:
        raise IndexError("Z_i needs 1 <= i <= n")
    def fn(y):
        z = _blocks(y, dims)
        zi = z[:, i, :]
        zi1 = z[:, i + 1, :]
        a = np.sum(zi * zi1, axis=1, keepdims=True)
        out = np.zeros_like(y)
        _blocks(out, dims)[:, i, :] = zi1 - a * zi
        return out
    return Field(MODE_EMBEDDED, dims.cartesian_dim, fn, f"Z{i}")


def x0_field(dims: ArmDims, m: int) -> Field:
    """Steering field of joint m+1: sum_i f_m^i Z_i.

    Its component on sphere i-1 is exactly f_m^i times the projected
    direction Z_i, and the base-point component is f_m^0 z_1.
    """
    if not 0 <= m <= dims.n:
        raise IndexError("X_m^0 needs 0 <= m <= n")
    def fn(y):
        z = _blocks(y, dims)
        a = _a_chain(z[:, 1:, :])  # A_1..A_n from the segment rows
        f = _f_products(a, m)
        out = np.zeros_like(y)
        ob = _blocks(out, dims)
        ob[:, 0, :] = f[:, 0:1] * z[:, 1, :]
        for i in range(1, m + 1):
            ai = np.sum(z[:, i, :] * z[:, i + 1, :], axis=1, keepdims=True)
            ob[:, i, :] = f[:, i:i + 1] * (z[:, i + 1, :] - ai * z[:, i, :])
        return out
    return Field(MODE_EMBEDDED, dims.cartesian_dim, fn, f"X{m}^0")


def xi_field(dims: ArmDims, m: int, i: int) -> Field:
    """Chart coordinate field d/d theta_m^i of sphere m, in embedded form.

    Extended off the unit sphere as the coordinate field of the radial
    chart (rho, theta) -> rho * phi(theta); evaluation raises
    ChartDegenerate at chart-singular directions.
    """
    if not 0 <= m <= dims.n:
        raise IndexError("X_m^i needs 0 <= m <= n")
    if not 1 <= i <= dims.k:
        raise IndexError("X_m^i needs 1 <= i <= k")
    def fn(y):
        z = _blocks(y, dims)
        zm = z[:, m + 1, :]
        rho = np.linalg.norm(zm, axis=1, keepdims=True)
        theta = hs.angles_from_unit(zm / rho, eps=1e-12, strict=True)
        _, jac = hs.unit_and_jacobian(theta)
        out = np.zeros_like(y)
        _blocks(out, dims)[:, m + 1, :] = rho * jac[:, :, i - 1]
        return out
    return Field(MODE_EMBEDDED, dims.cartesian_dim, fn, f"X{m}^{i}")


def sphere_axis_field(dims: ArmDims, sphere: int, axis: int) -> Field:
    """Projection of the constant ambient axis onto the sphere tangent.

    A chart-free generating family for the tangent of sphere `sphere`:
    smooth wherever the segment direction is nonzero, so it is usable at
    chart-degenerate points where the theta coordinate fields collapse.
    """
    if not 0 <= sphere <= dims.n:
        raise IndexError("sphere index out of range")
    if not 0 <= axis <= dims.k:
        raise IndexError("axis index out of range")
    def fn(y):
        z = _blocks(y, dims)
        zh = _normalized(z[:, sphere + 1, :])
        out = np.zeros_like(y)
        ob = _blocks(out, dims)
        ob[:, sphere + 1, :] = -zh[:, axis:axis + 1] * zh
        ob[:, sphere + 1, axis] += 1.0
        return out
    return Field(MODE_EMBEDDED, dims.cartesian_dim, fn, f"V{sphere}[{axis}]")


def sphere_tangent_fields(dims: ArmDims, sphere: int,
                          at: AngularConfig) -> list[Field]:
    """k projected-axis fields spanning the tangent of `sphere` near `at`.

    Drops the ambient axis most aligned with the segment direction, which
    keeps the remaining projections uniformly well conditioned.
    """
    drop = int(np.argmax(np.abs(at.z[sphere])))
    return [sphere_axis_field(dims, sphere, a)
            for a in range(dims.k + 1) if a != drop]


# ---------------------------------------------------------------------------
# Cartesian fields
# ---------------------------------------------------------------------------

def cart_z_field(dims: ArmDims, i: int) -> Field:
    """Segment direction x_{i+1} - x_i acting on joint i."""
    if not 0 <= i <= dims.n:
        raise IndexError("cartesian Z_i needs 0 <= i <= n")
    def fn(y):
        x = _blocks(y, dims)
        out = np.zeros_like(y)
        _blocks(out, dims)[:, i, :] = x[:, i + 1, :] - x[:, i, :]
        return out
    return Field(MODE_CARTESIAN, dims.cartesian_dim, fn, f"cZ{i}")


def cart_normal_field(dims: ArmDims, i: int) -> Field:
    """Constraint normal of segment i (half the residual gradient)."""
    if not 0 <= i <= dims.n:
        raise IndexError("normal index out of range")
    def fn(y):
        x = _blocks(y, dims)
        seg = x[:, i + 1, :] - x[:, i, :]
        out = np.zeros_like(y)
        ob = _blocks(out, dims)
        ob[:, i + 1, :] = seg
        ob[:, i, :] = -seg
        return out
    return Field(MODE_CARTESIAN, dims.cartesian_dim, fn, f"N{i}")


def cart_delta_field(dims: ArmDims, r: int) -> Field:
    """Generator r of the constrained distribution in Cartesian form:
    (x_{n+1} - x_n)^r * sum_i f_n^i cZ_i + d/dx_{n+1}^r."""
    if not 0 <= r <= dims.k:
        raise IndexError("generator index needs 0 <= r <= k")
    n = dims.n
    def fn(y):
        x = _blocks(y, dims)
        z = np.diff(x, axis=1)  # (B, n+1, k+1), rows z_1..z_{n+1}
        a = _a_chain(z)         # A_1..A_n from consecutive segments
        f = _f_products(a, n)   # f_n^0..f_n^n
        lead = z[:, n, r][:, None]  # component r of z_{n+1}
        out = np.zeros_like(y)
        ob = _blocks(out, dims)
        for i in range(n + 1):
            ob[:, i, :] = lead * f[:, i:i + 1] * z[:, i, :]
        ob[:, n + 1, r] += 1.0
        return out
    return Field(MODE_CARTESIAN, dims.cartesian_dim, fn, f"delta{r}")


# ---------------------------------------------------------------------------
# planar car fields on [x, y, theta_0 .. theta_n]
# ---------------------------------------------------------------------------

def car_x1_field(n: int) -> Field:
    """Angular-velocity input: d/d theta_n."""
    dim = n + 3
    def fn(y):
        out = np.zeros_like(y)
        out[:, -1] = 1.0
        return out
    return Field(MODE_CAR, dim, fn, "carX1")


def car_x2_field(n: int) -> Field:
    """Drive field: heading times the cosine cascade, plus the trailer
    angle rates sin(theta_{r+1} - theta_r) scaled by the cascade above r."""
    dim = n + 3
    def fn(y):
        th = y[:, 2:]
        diffs = th[:, 1:] - th[:, :-1]           # (B, n)
        cos = np.cos(diffs)
        b = y.shape[0]
        f = np.ones((b, n + 1))                  # f[r] = prod_{j=r+1}^n cos
        for r_ in range(n - 1, -1, -1):
            f[:, r_] = f[:, r_ + 1] * cos[:, r_]
        out = np.zeros_like(y)
        out[:, 0] = np.cos(th[:, 0]) * f[:, 0]
        out[:, 1] = np.sin(th[:, 0]) * f[:, 0]
        if n > 0:
            out[:, 2:-1] = np.sin(diffs) * f[:, 1:]
        return out
    return Field(MODE_CAR, dim, fn, "carX2")


# ---------------------------------------------------------------------------
# field registry
# ---------------------------------------------------------------------------

def field_from_id(dims: ArmDims, fid: FieldId) -> Field:
    fam = fid.family
    if fam == "Z0":
        return z0_field(dims)
    if fam == "Zi":
        return z_field(dims, fid.i)
    if fam == "X0_m":
        return x0_field(dims, fid.m)
    if fam == "Xi_m":
        return xi_field(dims, fid.m, fid.i)
    if fam == "cartesian_Zi":
        return cart_z_field(dims, fid.i)
    if fam == "cartesian_delta_r":
        return cart_delta_field(dims, fid.r)
    if fam == "car_X1":
        if dims.k != 1:
            raise ValueError("car fields need k = 1")
        return car_x1_field(dims.n)
    if fam == "car_X2":
        if dims.k != 1:
            raise ValueError("car fields need k = 1")
        return car_x2_field(dims.n)
    raise ValueError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# coefficient operations on configurations
# ---------------------------------------------------------------------------

def A_coeff(q: AngularConfig, i: int) -> float:
    """Alignment of consecutive segments: <z_i, z_{i+1}> for i <= n, and 1
    for the conventional top index i = n+1."""
    if not 1 <= i <= q.dims.n + 1:
        raise IndexError("A_i needs 1 <= i <= n+1")
    if i == q.dims.n + 1:
        return 1.0
    return float(q.z[i - 1] @ q.z[i])


def a_values(q: AngularConfig) -> np.ndarray:
    """A_1..A_n as an array (empty for n = 0)."""
    return np.sum(q.z[:-1] * q.z[1:], axis=1)


def f_coeff(q: AngularConfig, r: int, m: int) -> float:
    """Cascade product f_m^r = prod_{j=r+1}^m A_j (1 when r = m)."""
    if not 0 <= r <= m <= q.dims.n:
        raise IndexError("f_m^r needs 0 <= r <= m <= n")
    out = 1.0
    for j in range(r + 1, m + 1):
        out *= A_coeff(q, j)
    return out


# ---------------------------------------------------------------------------
# chart <-> embedded conversion
# ---------------------------------------------------------------------------

def embedded_to_chart(q: AngularConfig, vec: np.ndarray) -> np.ndarray:
    """Express an embedded tangent vector in chart coordinates
    [x | theta_0 .. theta_n].  Raises ChartDegenerate where a sphere chart
    is singular."""
    dims = q.dims
    k, k1 = dims.k, dims.ambient
    vec = np.asarray(vec, dtype=float)
    out = np.empty(dims.angular_dim)
    out[:k1] = vec[:k1]
    for s in range(dims.n + 1):
        ang = q.angles(s)
        rows = hs.jacobian_inverse(ang)[1:]  # drop the radial row
        dz = vec[k1 * (s + 1):k1 * (s + 2)]
        out[k1 + k * s:k1 + k * (s + 1)] = rows @ dz
    return out


def chart_to_embedded(q: AngularConfig, vec: np.ndarray) -> np.ndarray:
    """Inverse of `embedded_to_chart` (pushes theta components through the
    chart frame)."""
    dims = q.dims
    k, k1 = dims.k, dims.ambient
    vec = np.asarray(vec, dtype=float)
    out = np.zeros(dims.cartesian_dim)
    out[:k1] = vec[:k1]
    for s in range(dims.n + 1):
        theta = hs.angles_from_unit(q.z[s], eps=1e-12, strict=True)
        _, jac = hs.unit_and_jacobian(theta)
        dth = vec[k1 + k * s:k1 + k * (s + 1)]
        out[k1 * (s + 1):k1 * (s + 2)] = jac[0] @ dth
    return out


# ---------------------------------------------------------------------------
# public field evaluation at configurations
# ---------------------------------------------------------------------------

def _b_coeffs(q: AngularConfig, i: int) -> np.ndarray:
    """Projection coefficients of z_{i+1} over the frame of sphere i-1."""
    ang = q.angles(i - 1)
    _, b = hs.projection_coefficients(ang, q.z[i])
    return b


def Z_field(q: AngularConfig, i: int, form: str = MODE_EMBEDDED) -> TangentVector:
    """Evaluate Z_i at q; i = 0 gives the base-point direction field.

    The chart form carries the projection coefficients B_i^j on the theta
    block of sphere i-1 and is refused at degenerate charts; the embedded
    form is available everywhere.
    """
    dims = q.dims
    if not 0 <= i <= dims.n:
        raise IndexError("Z_i needs 0 <= i <= n")
    if form == MODE_EMBEDDED:
        f = z0_field(dims) if i == 0 else z_field(dims, i)
        return TangentVector(f.at(q.flat()), MODE_EMBEDDED)
    if form == MODE_CHART:
        out = np.zeros(dims.angular_dim)
        k1, k = dims.ambient, dims.k
        if i == 0:
            out[:k1] = q.z[0]
        else:
            out[k1 + k * (i - 1):k1 + k * i] = _b_coeffs(q, i)
        return TangentVector(out, MODE_CHART)
    raise ValueError(f"unknown form {form!r}")


def X0_field(q: AngularConfig, m: int, form: str = MODE_EMBEDDED) -> TangentVector:
    """Evaluate X_m^0 = sum_i f_m^i Z_i at q."""
    dims = q.dims
    if not 0 <= m <= dims.n:
        raise IndexError("X_m^0 needs 0 <= m <= n")
    if form == MODE_EMBEDDED:
        return TangentVector(x0_field(dims, m).at(q.flat()), MODE_EMBEDDED)
    if form == MODE_CHART:
        out = np.zeros(dims.angular_dim)
        k1, k = dims.ambient, dims.k
        out[:k1] = f_coeff(q, 0, m) * q.z[0]
        for i in range(1, m + 1):
            out[k1 + k * (i - 1):k1 + k * i] = f_coeff(q, i, m) * _b_coeffs(q, i)
        return TangentVector(out, MODE_CHART)
    raise ValueError(f"unknown form {form!r}")


def Xi_field(q: AngularConfig, m: int, i: int,
             form: str = MODE_EMBEDDED) -> TangentVector:
    """Evaluate the chart coordinate field X_m^i = d/d theta_m^i at q."""
    dims = q.dims
    if form == MODE_EMBEDDED:
        return TangentVector(xi_field(dims, m, i).at(q.flat()), MODE_EMBEDDED)
    if form == MODE_CHART:
        if not 0 <= m <= dims.n:
            raise IndexError("X_m^i needs 0 <= m <= n")
        if not 1 <= i <= dims.k:
            raise IndexError("X_m^i needs 1 <= i <= k")
        out = np.zeros(dims.angular_dim)
        out[dims.ambient + dims.k * m + (i - 1)] = 1.0
        return TangentVector(out, MODE_CHART)
    raise ValueError(f"unknown form {form!r}")


def cartesian_Z(q: CartesianConfig, i: int) -> TangentVector:
    """Evaluate the Cartesian segment field at q."""
    return TangentVector(cart_z_field(q.dims, i).at(q.flat()), MODE_CARTESIAN)


@dataclass(frozen=True)
class GeneratorSet:
    """Ordered tangent vectors at one configuration, with rank machinery."""

    point: object
    vectors: Sequence[TangentVector]
    labels: Sequence[str]
    fields: Optional[Sequence[Field]] = dc_field(default=None)

    def __post_init__(self):
        modes = {v.mode for v in self.vectors}
        if len(modes) > 1:
            raise ValueError(f"mixed tangent modes in one set: {modes}")

    @property
    def mode(self) -> str:
        return self.vectors[0].mode if self.vectors else MODE_EMBEDDED

    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((0, 0))
        return np.vstack([v.coords for v in self.vectors])

    def rank(self, tol: float = 1e-8) -> int:
        return svd_rank(self.matrix(), tol)


def cartesian_delta(q: CartesianConfig) -> GeneratorSet:
    """The k+1 generators of the constrained distribution at q, each
    orthogonal to every constraint normal."""
    dims = q.dims
    flds = [cart_delta_field(dims, r) for r in range(dims.k + 1)]
    vecs = [TangentVector(f.at(q.flat()), MODE_CARTESIAN) for f in flds]
    return GeneratorSet(point=q, vectors=vecs,
                        labels=[f.label for f in flds], fields=flds)


def pushforward_check(q: CartesianConfig, tol: float = 1e-8) -> float:
    """Largest principal angle between the pushforward of the Cartesian
    generators and the angular-chart span {X_n^0, X_n^1..X_n^k} at the
    image configuration.

    The pushforward is assembled in closed form: the bidiagonal difference
    map on joint blocks composed with each sphere's inverse chart Jacobian.
    Raises ChartDegenerate when the image hits a chart boundary.
    """
    a = gamma(q)
    dims = q.dims
    k, k1 = dims.k, dims.ambient
    inv_rows = []
    for s in range(dims.n + 1):
        inv_rows.append(hs.jacobian_inverse(a.angles(s))[1:])

    gs = cartesian_delta(q)
    pushed = np.empty((dims.k + 1, dims.angular_dim))
    for row, vec in enumerate(gs.matrix()):
        joints = vec.reshape(dims.joints, k1)
        dx0 = joints[0]
        dz = np.diff(joints, axis=0)
        out = np.empty(dims.angular_dim)
        out[:k1] = dx0
        for s in range(dims.n + 1):
            out[k1 + k * s:k1 + k * (s + 1)] = inv_rows[s] @ dz[s]
        pushed[row] = out

    target = np.vstack(
        [X0_field(a, dims.n, form=MODE_CHART).coords]
        + [Xi_field(a, dims.n, i, form=MODE_CHART).coords
           for i in range(1, dims.k + 1)])
    return subspace_angle(pushed, target, tol)
