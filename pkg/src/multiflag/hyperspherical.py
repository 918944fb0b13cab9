"""Hyperspherical chart on the unit sphere S^k in R^{k+1}.

Uses the "geographical" convention: sines accumulate from the first angle,
the last Cartesian component is cos(theta^1), and for k = 1 the chart reduces
to (sin t, cos t).  Angles theta^1..theta^{k-1} live in (0, pi); theta^k is
periodic on [0, 2*pi).  The chart degenerates where some interior sine
vanishes; operations that need the inverse or the frame normalization fail
loudly there instead of returning garbage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartDegenerate

# Guard on sin(theta^j), j < k, below which chart-dependent quantities are
# refused.  Chart degeneracy is a coordinate artifact, distinct from any
# geometric singularity of the arm.
EPS_DOM = 1e-8

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# batch kernels (plain ndarrays, leading batch dimension allowed)
# ---------------------------------------------------------------------------

def unit_from_angles(theta: np.ndarray) -> np.ndarray:
    """Map angles (..., k) to unit vectors (..., k+1)."""
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    c = np.cos(theta)
    k = theta.shape[-1]
    prefix = np.concatenate(
        [np.ones(theta.shape[:-1] + (1,)), np.cumprod(s, axis=-1)], axis=-1)
    z = np.empty(theta.shape[:-1] + (k + 1,))
    z[..., 0] = prefix[..., k]
    z[..., 1:] = prefix[..., k - 1::-1] * c[..., ::-1]
    return z


def unit_and_jacobian(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (phi, d phi / d theta) with shapes (B, k+1) and (B, k+1, k).

    Built by unrolling the recursion
    Phi_k(t, rest) = (sin t * Phi_{k-1}(rest), cos t) from the innermost angle
    outward, which keeps every entry a product of stored sines/cosines.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    b, k = theta.shape
    val = np.ones((b, 1))
    jac = np.zeros((b, 1, 0))
    for j in range(k - 1, -1, -1):
        s = np.sin(theta[:, j])
        c = np.cos(theta[:, j])
        m = val.shape[1]
        a = jac.shape[2]
        nval = np.concatenate([s[:, None] * val, c[:, None]], axis=1)
        njac = np.zeros((b, m + 1, a + 1))
        njac[:, :m, 0] = c[:, None] * val
        njac[:, m, 0] = -s
        if a:
            njac[:, :m, 1:] = s[:, None, None] * jac
        val, jac = nval, njac
    return val, jac


def frame_norms(theta: np.ndarray) -> np.ndarray:
    """Column norms of d phi / d theta: (1, |sin t1|, |sin t1 sin t2|, ...)."""
    theta = np.asarray(theta, dtype=float)
    k = theta.shape[-1]
    out = np.ones(theta.shape[:-1] + (k,))
    if k > 1:
        out[..., 1:] = np.cumprod(np.abs(np.sin(theta[..., :-1])), axis=-1)
    return out


def angles_from_unit(z: np.ndarray, eps: float = EPS_DOM,
                     strict: bool = True) -> np.ndarray:
    """Invert the chart on unit vectors (B, k+1) -> angles (B, k).

    strict=True raises ChartDegenerate when an interior sine falls at or
    below eps; strict=False resolves the undetermined trailing angles to a
    canonical representative instead (any representative maps back to the
    same point).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    b, kp1 = z.shape
    k = kp1 - 1
    theta = np.empty((b, k))
    v = z
    for j in range(k - 1):
        r = np.linalg.norm(v[:, :-1], axis=1)
        theta[:, j] = np.arctan2(r, v[:, -1])
        if strict and np.any(r <= eps):
            raise ChartDegenerate(
                f"sin(theta^{j + 1}) <= {eps:g} while inverting the chart")
        safe = np.where(r > 1e-300, r, 1.0)
        v = v[:, :-1] / safe[:, None]
        fallback = np.zeros(v.shape[1])
        fallback[-1] = 1.0
        v = np.where((r > 1e-300)[:, None], v, fallback)
    theta[:, k - 1] = np.arctan2(v[:, 0], v[:, 1]) % TWO_PI
    return theta


def interior_margin(z: np.ndarray) -> float:
    """Smallest interior sine of the chart angles of unit vector(s) z.

    Returns +inf for k = 1, where the chart has no interior angles.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    k = z.shape[1] - 1
    if k == 1:
        return float("inf")
    theta = angles_from_unit(z, strict=False)
    return float(np.min(np.abs(np.sin(theta[:, : k - 1]))))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Angles:
    """Chart angles (theta^1..theta^k); the periodic angle is stored
    reduced to [0, 2*pi)."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size < 1:
            raise ValueError("need at least one angle")
        if not np.all(np.isfinite(theta)):
            raise ValueError("angles must be finite")
        theta[-1] = theta[-1] % TWO_PI
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def k(self) -> int:
        return self.theta.size

    def interior(self, eps: float = EPS_DOM) -> bool:
        """True when every non-periodic angle stays away from {0, pi}."""
        if self.k == 1:
            return True
        return bool(np.all(np.abs(np.sin(self.theta[:-1])) > eps))


@dataclass(frozen=True)
class UnitVector:
    """Point on S^k, renormalized on construction."""

    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=float).reshape(-1)
        if z.size < 2:
            raise ValueError("need a vector in R^{k+1}, k >= 1")
        nrm = np.linalg.norm(z)
        if not np.isfinite(nrm) or nrm < 1e-12:
            raise ValueError("cannot normalize a (near-)zero vector")
        z = z / nrm
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def k(self) -> int:
        return self.z.size - 1


@dataclass(frozen=True)
class TangentFrame:
    """Moving frame at phi(theta): the radial unit vector nu plus the k
    chart tangent vectors Theta^j, with their closed-form norms."""

    nu: UnitVector
    Theta: np.ndarray          # (k, k+1), row j-1 = d phi / d theta^j
    norms: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        Theta = np.array(self.Theta, dtype=float)
        Theta.setflags(write=False)
        object.__setattr__(self, "Theta", Theta)
        norms = self.norms
        if norms is None:
            norms = np.linalg.norm(Theta, axis=1)
        norms = np.array(norms, dtype=float)
        norms.setflags(write=False)
        object.__setattr__(self, "norms", norms)


# ---------------------------------------------------------------------------
# chart operations
# ---------------------------------------------------------------------------

def phi(angles: Angles) -> UnitVector:
    """Evaluate the chart at unit radius."""
    return UnitVector(unit_from_angles(angles.theta))


def phi_inverse(z: UnitVector, eps_dom: float = EPS_DOM) -> Angles:
    """Recover chart angles from a sphere point.

    Raises ChartDegenerate when a non-periodic angle is within eps_dom of
    the chart boundary (measured on its sine).
    """
    theta = angles_from_unit(z.z, eps=eps_dom, strict=True)
    return Angles(theta[0])


def jacobian(rho: float, angles: Angles) -> np.ndarray:
    """Jacobian of (rho, theta) -> rho * phi(theta).

    Column 0 is phi(theta); column j is rho * d phi / d theta^j.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    val, jac = unit_and_jacobian(angles.theta)
    return np.column_stack([val[0], rho * jac[0]])


def jacobian_det(rho: float, angles: Angles) -> float:
    """Closed-form determinant of `jacobian`:
    (-1)^floor((k+1)/2) * rho^k * prod_{i=1}^{k-1} sin(theta^{k-i})^i."""
    th = angles.theta
    k = th.size
    sign = -1.0 if ((k + 1) // 2) % 2 else 1.0
    prod = 1.0
    for i in range(1, k):
        prod *= np.sin(th[k - i - 1]) ** i
    return float(sign * rho**k * prod)


def jacobian_inverse(angles: Angles, eps_dom: float = EPS_DOM) -> np.ndarray:
    """Inverse of jacobian(1, theta).

    The Jacobian columns are orthogonal with norms (1, 1, |sin t1|, ...), so
    the inverse is diag(1/norm^2) times the transpose.  Note the squared
    norm: a single norm factor would leave a diagonal of column norms
    instead of the identity.
    """
    th = angles.theta
    k = th.size
    if k > 1 and np.any(np.abs(np.sin(th[:-1])) <= eps_dom):
        raise ChartDegenerate("chart Jacobian is singular: interior sine ~ 0")
    val, jac = unit_and_jacobian(th)
    mat = np.column_stack([val[0], jac[0]])
    norms2 = np.concatenate([[1.0], frame_norms(th) ** 2])
    return mat.T / norms2[:, None]


def frame(angles: Angles) -> TangentFrame:
    """Moving frame {nu, Theta^1..Theta^k} at phi(theta)."""
    val, jac = unit_and_jacobian(angles.theta)
    return TangentFrame(nu=UnitVector(val[0]), Theta=jac[0].T,
                        norms=frame_norms(angles.theta))


def projection_coefficients(angles: Angles, target: np.ndarray,
                            eps_dom: float = EPS_DOM) -> tuple[float, np.ndarray]:
    """Decompose `target` over the frame at `angles`:
    target = A * nu + sum_j B^j * Theta^j with B^j = <target, Theta^j> / |Theta^j|^2.

    Exact for any target in R^{k+1} because the frame is an orthogonal basis.
    """
    th = angles.theta
    k = th.size
    if k > 1 and np.any(np.abs(np.sin(th[:-1])) <= eps_dom):
        raise ChartDegenerate("frame is degenerate: interior sine ~ 0")
    val, jac = unit_and_jacobian(th)
    target = np.asarray(target, dtype=float)
    a = float(val[0] @ target)
    norms2 = frame_norms(th) ** 2
    b = (jac[0].T @ target) / norms2
    return a, b


def frame_change(angles: Angles, angles_prime: Angles,
                 eps_dom: float = EPS_DOM) -> tuple[float, np.ndarray]:
    """Coefficients of nu' = phi(theta') in the frame at theta.

    A is the radial coefficient <nu, nu'>; B^j are orthogonal-projection
    coefficients onto the tangent directions, so the reconstruction
    nu' = A nu + sum B^j Theta^j is exact.  For k = 1 this reduces to
    (cos(t' - t), sin(t' - t)).
    """
    nu_prime = unit_from_angles(angles_prime.theta)
    return projection_coefficients(angles, nu_prime, eps_dom=eps_dom)
