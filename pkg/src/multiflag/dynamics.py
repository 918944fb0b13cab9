"""Controlled kinematics of the arm: fixed-step RK4 integrators with
per-step projection onto the product of unit spheres.

Three routes to the same motion are implemented independently so they can
cross-check each other:

* `integrate_car`: the planar cascade in car variables (x, y, headings),
  valid for k = 1 only;
* `integrate_arm`: the general system on the base point and unit segment
  directions, driven by the normal velocity of the head and the k tangential
  chart rates of the last sphere;
* `integrate_cartesian`: the flow of the constrained-distribution
  generators on raw joint positions.

The angular right-hand side is evaluated on unit vectors, so it stays
well defined where intermediate sphere charts degenerate; only the head
sphere carries chart angles, and those are themselves state variables.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import hyperspherical as hs
from .arm import AngularConfig, ArmDims, CartesianConfig
from .errors import StepRejected

FMT = "%.17g"


# ---------------------------------------------------------------------------
# controls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlSignal:
    """Head controls: normal velocity v_n(t) and tangential rates w(t).

    w returns the k chart rates of the head sphere; for k = 1 this is the
    single angular velocity of the classical car."""

    v_n: Callable[[float], float]
    w: Callable[[float], np.ndarray]

    @staticmethod
    def constant(vn: float, w) -> "ControlSignal":
        wv = np.atleast_1d(np.asarray(w, dtype=float)).copy()
        return ControlSignal(lambda t: float(vn), lambda t: wv)

    @staticmethod
    def sinusoid(k: int, vn_amp: float = 1.0, w_amp=0.5,
                 freq: float = 0.5, phase: float = 0.0) -> "ControlSignal":
        """Smooth periodic preset: vn = a*cos(2 pi f t + phase),
        w_j = b_j*sin(2 pi f t + phase + j)."""
        w_amp = np.broadcast_to(np.asarray(w_amp, dtype=float), (k,)).copy()
        om = 2.0 * np.pi * freq

        def vn(t: float) -> float:
            return float(vn_amp * np.cos(om * t + phase))

        def w(t: float) -> np.ndarray:
            return w_amp * np.sin(om * t + phase + np.arange(1, k + 1))

        return ControlSignal(vn, w)

    @staticmethod
    def from_table(times, vn_values, w_values) -> "ControlSignal":
        """Linear interpolation of sampled controls."""
        times = np.asarray(times, dtype=float)
        vn_values = np.asarray(vn_values, dtype=float)
        w_values = np.atleast_2d(np.asarray(w_values, dtype=float))
        if w_values.shape[0] != times.size:
            w_values = w_values.T
        cols = [w_values[:, j] for j in range(w_values.shape[1])]

        def vn(t: float) -> float:
            return float(np.interp(t, times, vn_values))

        def w(t: float) -> np.ndarray:
            return np.array([np.interp(t, times, c) for c in cols])

        return ControlSignal(vn, w)


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed-step RK4 options."""

    h: float
    projection: bool = True
    method: str = "rk4"
    max_step_drift: float = 1e-6

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size must be positive")
        if self.method != "rk4":
            raise ValueError("only the classical rk4 stepper is provided")


# ---------------------------------------------------------------------------
# trajectory container
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Recorded motion plus per-step diagnostics.

    All modes store the angular view of each state (base point, unit
    segment rows and head-sphere angles); the Cartesian integrator also
    keeps its raw joint positions.
    """

    mode: str
    dims: ArmDims
    times: np.ndarray          # (M,)
    x0: np.ndarray             # (M, k+1)
    z: np.ndarray              # (M, n+1, k+1)
    theta_n: np.ndarray        # (M, k)
    vn: np.ndarray             # (M,)
    w: np.ndarray              # (M, k)
    v: np.ndarray              # (M, n+1) normal velocities of joints 1..n+1
    drift_pre: np.ndarray      # (M,) pre-projection constraint drift
    drift_post: np.ndarray     # (M,)
    h: float
    T: float
    projection: bool
    seed: Optional[int] = None
    points: Optional[np.ndarray] = None  # (M, n+2, k+1), cartesian mode

    def __len__(self) -> int:
        return self.times.size

    def config_at(self, idx: int) -> AngularConfig:
        return AngularConfig(dims=self.dims, x0=self.x0[idx], z=self.z[idx])

    def index_of(self, t: float) -> int:
        """Index of the recorded time closest to t; t must sit on the grid."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)) + 1e-12:
            raise ValueError(f"time {t} is not on the recorded grid")
        return idx

    def min_abs_a(self) -> float:
        """Smallest |A_i| seen along the trajectory (inf when n = 0)."""
        if self.dims.n == 0:
            return float("inf")
        a = np.sum(self.z[:, :-1, :] * self.z[:, 1:, :], axis=2)
        return float(np.min(np.abs(a)))

    # -- export ------------------------------------------------------------

    def csv_header(self) -> list[str]:
        k1 = self.dims.ambient
        cols = ["t"]
        cols += [f"x0_{r + 1}" for r in range(k1)]
        for i in range(1, self.dims.n + 2):
            cols += [f"z{i}_{r + 1}" for r in range(k1)]
        cols += [f"v{i}" for i in range(self.dims.n + 1)]
        return cols

    def to_csv(self, path) -> None:
        meta = (f"# multiflag trajectory mode={self.mode} k={self.dims.k} "
                f"n={self.dims.n} h={FMT % self.h} T={FMT % self.T} "
                f"projection={'on' if self.projection else 'off'} "
                f"seed={self.seed if self.seed is not None else 'none'}")
        with open(path, "w", newline="") as fh:
            fh.write(meta + "\n")
            writer = csv.writer(fh)
            writer.writerow(self.csv_header())
            for j in range(len(self)):
                row = [FMT % self.times[j]]
                row += [FMT % x for x in self.x0[j]]
                row += [FMT % x for x in self.z[j].reshape(-1)]
                row += [FMT % x for x in self.v[j]]
                writer.writerow(row)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "k": self.dims.k,
            "n": self.dims.n,
            "h": self.h,
            "T": self.T,
            "projection": self.projection,
            "seed": self.seed,
            "times": self.times.tolist(),
            "x0": self.x0.tolist(),
            "z": self.z.tolist(),
            "theta_n": self.theta_n.tolist(),
            "vn": self.vn.tolist(),
            "w": self.w.tolist(),
            "v": self.v.tolist(),
            "drift_pre": self.drift_pre.tolist(),
            "drift_post": self.drift_post.tolist(),
        }
        if self.points is not None:
            out["points"] = self.points.tolist()
        return out

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_dict(d: dict) -> "Trajectory":
        dims = ArmDims(k=int(d["k"]), n=int(d["n"]))
        points = d.get("points")
        return Trajectory(
            mode=d["mode"], dims=dims,
            times=np.asarray(d["times"], dtype=float),
            x0=np.asarray(d["x0"], dtype=float),
            z=np.asarray(d["z"], dtype=float),
            theta_n=np.asarray(d["theta_n"], dtype=float),
            vn=np.asarray(d["vn"], dtype=float),
            w=np.asarray(d["w"], dtype=float),
            v=np.asarray(d["v"], dtype=float),
            drift_pre=np.asarray(d["drift_pre"], dtype=float),
            drift_post=np.asarray(d["drift_post"], dtype=float),
            h=float(d["h"]), T=float(d["T"]),
            projection=bool(d["projection"]),
            seed=d.get("seed"),
            points=None if points is None else np.asarray(points, dtype=float))

    @staticmethod
    def from_json(path) -> "Trajectory":
        with open(path) as fh:
            return Trajectory.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# shared kinematic quantities
# ---------------------------------------------------------------------------

def _suffix_products(a: np.ndarray) -> np.ndarray:
    """f_n^i = prod_{j=i+1}^n A_j for i = 0..n, from A_1..A_n."""
    n = a.size
    out = np.ones(n + 1)
    for i in range(n - 1, -1, -1):
        out[i] = out[i + 1] * a[i]
    return out


def _block_rates(z: np.ndarray, theta_n: np.ndarray, vn: float,
                 w: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Embedded time derivatives (dx0, dz rows, normal velocity chain).

    z rows are z_1..z_{n+1}; dz row j is the rate of z_{j+1}.  The head row
    rate is expressed through the chart frame at theta_n.
    """
    a = np.sum(z[:-1] * z[1:], axis=1)
    f = _suffix_products(a)
    v = f * vn
    dx0 = v[0] * z[0]
    dz = np.empty_like(z)
    if z.shape[0] > 1:
        dz[:-1] = v[1:, None] * (z[1:] - a[:, None] * z[:-1])
    _, jac = hs.unit_and_jacobian(theta_n)
    dz[-1] = jac[0] @ w
    return dx0, dz, v


def _geometric_velocities(z: np.ndarray, dx0: np.ndarray,
                          dz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normal velocities v_i = <xdot_{i+1}, z_{i+1}> and the residual norms
    of xdot_i off the direction of the segment ahead of it."""
    n1 = z.shape[0]
    xdot = np.empty((n1 + 1, z.shape[1]))
    xdot[0] = dx0
    for i in range(n1):
        xdot[i + 1] = xdot[i] + dz[i]
    v = np.sum(xdot[1:] * z, axis=1)
    along = np.sum(xdot[:-1] * z, axis=1)
    resid = np.linalg.norm(xdot[:-1] - along[:, None] * z, axis=1)
    return v, resid


# ---------------------------------------------------------------------------
# stepping machinery
# ---------------------------------------------------------------------------

def _rk4_step(rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _steps(T: float, h: float) -> list[float]:
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    if T == 0.0:
        return []
    if h >= T:
        return [T]
    full = int(np.floor(T / h + 1e-12))
    rem = T - full * h
    out = [h] * full
    if rem > 1e-12 * max(1.0, T):
        out.append(rem)
    return out


def _integrate(rhs, project, y0: np.ndarray, T: float,
               settings: IntegratorSettings):
    """Run the stepper; yields (t, y, drift_pre, drift_post) per record."""
    records = [(0.0, y0.copy(), 0.0, 0.0)]
    t, y = 0.0, y0.copy()
    for h in _steps(T, settings.h):
        y_raw = _rk4_step(rhs, t, y, h)
        if not np.all(np.isfinite(y_raw)):
            raise StepRejected(f"non-finite state at t={t + h:g}")
        y_proj, drift_pre = project(y_raw, apply=settings.projection)
        if drift_pre > settings.max_step_drift:
            raise StepRejected(
                f"constraint drift {drift_pre:.3e} in one step at t={t + h:g}")
        _, drift_post = project(y_proj, apply=False)
        t = t + h
        y = y_proj
        records.append((t, y.copy(), drift_pre, drift_post))
    return records


# ---------------------------------------------------------------------------
# the arm integrator (also used for sub-arms)
# ---------------------------------------------------------------------------

def _arm_unpack(y: np.ndarray, dims: ArmDims):
    k1, k, n = dims.ambient, dims.k, dims.n
    x0 = y[:k1]
    zmid = y[k1:k1 + n * k1].reshape(n, k1)
    th = y[k1 + n * k1:]
    return x0, zmid, th


def _arm_state(q: AngularConfig, theta_n: np.ndarray) -> np.ndarray:
    return np.concatenate([q.x0, q.z[:-1].reshape(-1), theta_n])


def integrate_arm(q0: AngularConfig, u: ControlSignal, T: float,
                  settings: IntegratorSettings, *, mode: str = "arm",
                  seed: Optional[int] = None) -> Trajectory:
    """Integrate the angular controlled system.

    The state carries the base point, the unit rows z_1..z_n, and the chart
    angles of the head sphere (so the head control semantics never needs a
    chart inversion mid-run).  Requires a non-degenerate head chart at t=0
    for k >= 2: the tangential controls are chart components and a pole
    start would make their meaning ambiguous.
    """
    dims = q0.dims
    k = dims.k
    theta0 = q0.angles(dims.n).theta

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x0, zmid, th = _arm_unpack(y, dims)
        vn = float(u.v_n(t))
        w = np.asarray(u.w(t), dtype=float).reshape(-1)
        if w.size != k:
            raise ValueError(f"tangential control must have {k} components")
        zn1 = hs.unit_from_angles(th)
        z = np.vstack([zmid, zn1[None]]) if dims.n else zn1[None]
        a = np.sum(z[:-1] * z[1:], axis=1)
        f = _suffix_products(a)
        v = f * vn
        dx0 = v[0] * z[0]
        out = np.empty_like(y)
        out[:dims.ambient] = dx0
        if dims.n:
            dz = v[1:, None] * (z[1:] - a[:, None] * z[:-1])
            out[dims.ambient:dims.ambient + dims.n * dims.ambient] = \
                dz.reshape(-1)
        out[dims.ambient + dims.n * dims.ambient:] = w
        return out

    def project(y: np.ndarray, apply: bool):
        x0, zmid, th = _arm_unpack(y, dims)
        if dims.n == 0:
            return y, 0.0
        norms = np.linalg.norm(zmid, axis=1)
        drift = float(np.max(np.abs(norms - 1.0)))
        if not apply:
            return y, drift
        out = y.copy()
        out[dims.ambient:dims.ambient + dims.n * dims.ambient] = \
            (zmid / norms[:, None]).reshape(-1)
        return out, drift

    y0 = _arm_state(q0, theta0)
    records = _integrate(rhs, project, y0, T, settings)

    m = len(records)
    k1 = dims.ambient
    times = np.empty(m)
    x0s = np.empty((m, k1))
    zs = np.empty((m, dims.n + 1, k1))
    ths = np.empty((m, k))
    vns = np.empty(m)
    ws = np.empty((m, k))
    vs = np.empty((m, dims.n + 1))
    dpre = np.empty(m)
    dpost = np.empty(m)
    for j, (t, y, dr_pre, dr_post) in enumerate(records):
        x0, zmid, th = _arm_unpack(y, dims)
        zn1 = hs.unit_from_angles(th)
        z = np.vstack([zmid, zn1[None]]) if dims.n else zn1[None]
        vn = float(u.v_n(t))
        w = np.asarray(u.w(t), dtype=float).reshape(-1)
        dx0, dz, _ = _block_rates(z, th, vn, w)
        v, _ = _geometric_velocities(z, dx0, dz)
        times[j], x0s[j], zs[j], ths[j] = t, x0, z, th
        vns[j], ws[j], vs[j], dpre[j], dpost[j] = vn, w, v, dr_pre, dr_post
    return Trajectory(mode=mode, dims=dims, times=times, x0=x0s, z=zs,
                      theta_n=ths, vn=vns, w=ws, v=vs, drift_pre=dpre,
                      drift_post=dpost, h=settings.h, T=T,
                      projection=settings.projection, seed=seed)


# ---------------------------------------------------------------------------
# the planar car integrator (k = 1 oracle)
# ---------------------------------------------------------------------------

def car_state_from_config(q: AngularConfig) -> np.ndarray:
    """(x, y, theta_0..theta_n) from an angular config with k = 1.

    The planar axes are swapped relative to the arm's ambient coordinates:
    the heading z = (sin t, cos t) means arm axis 1 is the car's y axis.
    """
    if q.dims.k != 1:
        raise ValueError("car variables need k = 1")
    thetas = np.arctan2(q.z[:, 0], q.z[:, 1])
    return np.concatenate([[q.x0[1], q.x0[0]], thetas])


def config_from_car_state(y: np.ndarray, dims: ArmDims) -> AngularConfig:
    th = y[2:]
    z = np.column_stack([np.sin(th), np.cos(th)])
    return AngularConfig(dims=dims, x0=np.array([y[1], y[0]]), z=z)


def integrate_car(q0: AngularConfig, u: ControlSignal, T: float,
                  settings: IntegratorSettings,
                  seed: Optional[int] = None) -> Trajectory:
    """Integrate the planar car cascade in (x, y, headings) variables.

    Independent of `integrate_arm`: different state variables, same motion.
    """
    dims = q0.dims
    if dims.k != 1:
        raise ValueError("integrate_car needs k = 1")
    n = dims.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        th = y[2:]
        vn = float(u.v_n(t))
        wv = np.asarray(u.w(t), dtype=float).reshape(-1)
        diffs = th[1:] - th[:-1]
        f = _suffix_products(np.cos(diffs))
        v = f * vn
        out = np.empty_like(y)
        out[0] = v[0] * np.cos(th[0])
        out[1] = v[0] * np.sin(th[0])
        if n:
            out[2:-1] = v[1:] * np.sin(diffs)
        out[-1] = wv[0]
        return out

    def project(y: np.ndarray, apply: bool):
        return y, 0.0  # headings carry no constraint to drift from

    records = _integrate(rhs, project, car_state_from_config(q0), T, settings)

    m = len(records)
    times = np.empty(m)
    x0s = np.empty((m, 2))
    zs = np.empty((m, n + 1, 2))
    ths = np.empty((m, 1))
    vns = np.empty(m)
    ws = np.empty((m, 1))
    vs = np.empty((m, n + 1))
    dpre = np.zeros(m)
    dpost = np.zeros(m)
    for j, (t, y, _, _) in enumerate(records):
        cfg = config_from_car_state(y, dims)
        th_n = np.array([y[-1] % (2 * np.pi)])
        vn = float(u.v_n(t))
        wv = np.asarray(u.w(t), dtype=float).reshape(-1)
        dx0, dz, _ = _block_rates(cfg.z, th_n, vn, wv)
        v, _ = _geometric_velocities(cfg.z, dx0, dz)
        times[j], x0s[j], zs[j], ths[j] = t, cfg.x0, cfg.z, th_n
        vns[j], ws[j], vs[j] = vn, wv, v
    return Trajectory(mode="car", dims=dims, times=times, x0=x0s, z=zs,
                      theta_n=ths, vn=vns, w=ws, v=vs, drift_pre=dpre,
                      drift_post=dpost, h=settings.h, T=T,
                      projection=settings.projection, seed=seed)


# ---------------------------------------------------------------------------
# the Cartesian integrator
# ---------------------------------------------------------------------------

def integrate_cartesian(q0: CartesianConfig, u: ControlSignal, T: float,
                        settings: IntegratorSettings,
                        seed: Optional[int] = None) -> Trajectory:
    """Flow the joint positions along the constrained-distribution
    generators, with the head control mapped through the head frame.

    Serves as the independent oracle for `integrate_arm` through the
    segment-difference map.
    """
    dims = q0.dims
    k1, n = dims.ambient, dims.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y.reshape(dims.joints, k1)
        z = np.diff(x, axis=0)
        vn = float(u.v_n(t))
        w = np.asarray(u.w(t), dtype=float).reshape(-1)
        zh = z[n] / np.linalg.norm(z[n])
        theta = hs.angles_from_unit(zh[None], eps=1e-12, strict=True)
        _, jac = hs.unit_and_jacobian(theta)
        head = vn * zh + jac[0] @ w
        a = np.sum(z[:-1] * z[1:], axis=1)
        f = _suffix_products(a)
        lead = float(head @ z[n])
        out = np.empty_like(x)
        out[:n + 1] = lead * f[:, None] * z
        out[n + 1] = head
        return out.reshape(-1)

    def project(y: np.ndarray, apply: bool):
        x = y.reshape(dims.joints, k1)
        z = np.diff(x, axis=0)
        norms = np.linalg.norm(z, axis=1)
        drift = float(np.max(np.abs(norms - 1.0)))
        if not apply:
            return y, drift
        zh = z / norms[:, None]
        out = np.vstack([x[0], x[0] + np.cumsum(zh, axis=0)])
        return out.reshape(-1), drift

    records = _integrate(rhs, project, q0.flat().copy(), T, settings)

    m = len(records)
    times = np.empty(m)
    x0s = np.empty((m, k1))
    zs = np.empty((m, n + 1, k1))
    ths = np.empty((m, dims.k))
    vns = np.empty(m)
    ws = np.empty((m, dims.k))
    vs = np.empty((m, n + 1))
    dpre = np.empty(m)
    dpost = np.empty(m)
    pts = np.empty((m, dims.joints, k1))
    for j, (t, y, dr_pre, dr_post) in enumerate(records):
        x = y.reshape(dims.joints, k1)
        z = np.diff(x, axis=0)
        zu = z / np.linalg.norm(z, axis=1)[:, None]
        th = hs.angles_from_unit(zu[n][None], eps=1e-12, strict=True)[0]
        vn = float(u.v_n(t))
        w = np.asarray(u.w(t), dtype=float).reshape(-1)
        dx0, dz, _ = _block_rates(zu, th, vn, w)
        v, _ = _geometric_velocities(zu, dx0, dz)
        times[j], x0s[j], zs[j], ths[j], pts[j] = t, x[0], zu, th, x
        vns[j], ws[j], vs[j], dpre[j], dpost[j] = vn, w, v, dr_pre, dr_post
    return Trajectory(mode="cartesian", dims=dims, times=times, x0=x0s, z=zs,
                      theta_n=ths, vn=vns, w=ws, v=vs, drift_pre=dpre,
                      drift_post=dpost, h=settings.h, T=T,
                      projection=settings.projection, seed=seed, points=pts)


# ---------------------------------------------------------------------------
# sub-arms
# ---------------------------------------------------------------------------

def project_subarm(q: AngularConfig, p: int, m: int) -> AngularConfig:
    """Project the full configuration onto the sub-arm spanning joints
    p-1 .. m+1: base point x_{p-1} with segments z_p..z_{m+1}."""
    dims = q.dims
    if not 1 <= p < m <= dims.n:
        raise ValueError("need 1 <= p < m <= n")
    h = m - p + 1
    x0 = q.x0 + np.sum(q.z[:p - 1], axis=0)
    return AngularConfig(dims=ArmDims(dims.k, h), x0=x0, z=q.z[p - 1:m + 1])


def integrate_subarm(q0: AngularConfig, p: int, m: int, u: ControlSignal,
                     T: float, settings: IntegratorSettings,
                     seed: Optional[int] = None) -> Trajectory:
    """Integrate the projected sub-arm under its own head controls.

    The sub-arm obeys the same controlled system as a full arm of length
    m-p+2, so this delegates to `integrate_arm` on the projected state.
    """
    sub0 = project_subarm(q0, p, m)
    return integrate_arm(sub0, u, T, settings, mode="subarm", seed=seed)


def induced_subarm_controls(traj: Trajectory, p: int, m: int) -> ControlSignal:
    """Controls the segment [M_m, M_{m+1}] exerts on the sub-arm below it,
    read off a recorded full-arm trajectory.

    The returned callables only accept times on the trajectory grid, so the
    source run must be recorded on a grid containing every stage time of
    the consuming integrator (e.g. at half its step).
    """
    dims = traj.dims
    if not 1 <= p < m <= dims.n:
        raise ValueError("need 1 <= p < m <= n")
    mm = len(traj)
    u0 = np.empty(mm)
    wv = np.empty((mm, dims.k))
    for j in range(mm):
        z = traj.z[j]
        a = np.sum(z[:-1] * z[1:], axis=1)
        vn = traj.vn[j]
        u0[j] = vn * np.prod(a[m:])            # v_m = vn * prod_{l=m+1}^n A_l
        if m == dims.n:
            wv[j] = traj.w[j]
        else:
            v_m1 = vn * np.prod(a[m + 1:])     # v_{m+1}
            theta_m = hs.Angles(hs.angles_from_unit(z[m])[0])
            _, b = hs.projection_coefficients(theta_m, z[m + 1])
            wv[j] = v_m1 * b

    times = traj.times

    def lookup(t: float) -> int:
        idx = int(np.argmin(np.abs(times - t)))
        if abs(times[idx] - t) > 1e-9 * max(1.0, abs(t)) + 1e-12:
            raise ValueError(
                f"induced controls sampled off the source grid at t={t!r}")
        return idx

    return ControlSignal(lambda t: float(u0[lookup(t)]),
                         lambda t: wv[lookup(t)].copy())


def project_subarm_states(traj: Trajectory, p: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Sub-arm view (x0', z') of every recorded state of a full run."""
    x0 = traj.x0 + np.sum(traj.z[:, :p - 1, :], axis=1)
    return x0, traj.z[:, p - 1:m + 1, :]


# ---------------------------------------------------------------------------
# velocity diagnostics
# ---------------------------------------------------------------------------

def velocity_report(traj: Trajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Normal velocities (v_0..v_n) and the tangential head rates at a
    recorded time.  v_i is the projection of the velocity of joint i+1 on
    the outward direction z_{i+1}."""
    idx = traj.index_of(t)
    return traj.v[idx].copy(), traj.w[idx].copy()


def collinearity_residuals(traj: Trajectory) -> np.ndarray:
    """Per record, the norm of each joint velocity's component off the
    segment ahead of it (the nonholonomic constraint), shape (M, n+1)."""
    out = np.empty((len(traj), traj.dims.n + 1))
    for j in range(len(traj)):
        dx0, dz, _ = _block_rates(traj.z[j], traj.theta_n[j],
                                  traj.vn[j], traj.w[j])
        _, resid = _geometric_velocities(traj.z[j], dx0, dz)
        out[j] = resid
    return out


def cascade_residuals(traj: Trajectory) -> np.ndarray:
    """Per record, |v_{i-1} - A_i v_i| for i = 1..n, shape (M, n)."""
    a = np.sum(traj.z[:, :-1, :] * traj.z[:, 1:, :], axis=2)
    return np.abs(traj.v[:, :-1] - a * traj.v[:, 1:])
