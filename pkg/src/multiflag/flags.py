"""Numerical verification of the nested bracket-generated structure of the
arm's control distribution.

At a sampled configuration the levels are generated by the steering field
of joint m plus the sphere-tangent fields of all spheres above it; dropping
the steering field gives the integrable sublevel.  The checks are all
distribution-level (ranks, spans of brackets, inclusion residuals), so any
smooth generating family with the same pointwise span may be used: the
default family replaces the chart coordinate fields on each sphere with
projections of fixed ambient axes, which stay smooth across chart
boundaries.  The chart fields themselves remain available (`basis="chart"`)
and must agree wherever both are defined.

All span computations run on embedded coordinates with tangency to the
sphere factors enforced on bracket values; Jacobians for brackets use
central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence, Union

import numpy as np

from . import fields as fl
from .arm import AngularConfig, ArmDims, CartesianConfig, gamma, gamma_inverse
from .dynamics import car_state_from_config
from .fields import (Field, FieldId, GeneratorSet, TangentVector,
                     field_from_id, field_jacobian)
from .numerics import orthonormal_rows, subspace_angle, svd_rank

RESIDUAL_TOL = 1e-6   # involutivity / inclusion gate
EPS_SING = 1e-9       # |A_i| below this marks the configuration singular
BRACKET_H = 1e-5      # central-difference step for bracket Jacobians


def expected_rank_d(dims: ArmDims, m: int) -> int:
    """Rank of level m at any point: (n-m+2)k+1 (level 0 is the whole
    tangent space)."""
    return (dims.n - m + 2) * dims.k + 1


def expected_rank_e(dims: ArmDims, m: int) -> int:
    return (dims.n - m + 2) * dims.k


# ---------------------------------------------------------------------------
# bracket engine
# ---------------------------------------------------------------------------

BracketArg = Union[Field, FieldId, tuple]


def bracket_field(x: Field, y: Field, h: float = BRACKET_H) -> Field:
    """The bracket of two fields as a field itself (for nested brackets)."""
    if x.mode != y.mode or x.dim != y.dim:
        raise ValueError("bracket needs two fields on the same space")

    def fn(pts: np.ndarray) -> np.ndarray:
        out = np.empty_like(pts)
        for row, p in enumerate(pts):
            jx = field_jacobian(x, p, h)
            jy = field_jacobian(y, p, h)
            out[row] = jy @ x.at(p) - jx @ y.at(p)
        return out

    return Field(x.mode, x.dim, fn, f"[{x.label},{y.label}]")


def _resolve(arg: BracketArg, dims: ArmDims, h: float) -> Field:
    if isinstance(arg, Field):
        return arg
    if isinstance(arg, FieldId):
        return field_from_id(dims, arg)
    if isinstance(arg, tuple) and len(arg) == 2:
        return bracket_field(_resolve(arg[0], dims, h),
                             _resolve(arg[1], dims, h), h)
    raise TypeError(f"cannot interpret {arg!r} as a field")


def _point_for_mode(q, mode: str) -> np.ndarray:
    if mode == fl.MODE_EMBEDDED:
        if isinstance(q, CartesianConfig):
            q = gamma(q)
        return q.flat()
    if mode == fl.MODE_CARTESIAN:
        if isinstance(q, AngularConfig):
            q = gamma_inverse(q)
        return q.flat()
    if mode == fl.MODE_CAR:
        if isinstance(q, CartesianConfig):
            q = gamma(q)
        return car_state_from_config(q)
    raise ValueError(f"cannot evaluate fields of mode {mode!r}")


def lie_bracket(x: BracketArg, y: BracketArg, q, h: float = BRACKET_H) -> TangentVector:
    """[X, Y](q) = DY.X - DX.Y with central-difference Jacobians.

    Accepts Field objects, FieldIds, or nested pairs; q may be an angular or
    Cartesian configuration and is converted to the fields' ambient space.
    """
    dims = q.dims
    fx = _resolve(x, dims, h)
    fy = _resolve(y, dims, h)
    if fx.mode != fy.mode:
        raise ValueError(f"mixed field modes: {fx.mode} vs {fy.mode}")
    point = _point_for_mode(q, fx.mode)
    jx = field_jacobian(fx, point, h)
    jy = field_jacobian(fy, point, h)
    return TangentVector(jy @ fx.at(point) - jx @ fy.at(point), fx.mode)


# ---------------------------------------------------------------------------
# per-point evaluation context with caches
# ---------------------------------------------------------------------------

class _FlagContext:
    """Field values, Jacobians and pairwise brackets at one configuration,
    computed once and shared across all level checks."""

    def __init__(self, q: AngularConfig, basis: str = "projected",
                 h: float = BRACKET_H):
        if basis not in ("projected", "chart"):
            raise ValueError("basis must be 'projected' or 'chart'")
        self.q = q
        self.dims = q.dims
        self.basis = basis
        self.h = h
        self.point = q.flat()
        dims = q.dims
        if basis == "projected":
            self.sphere_fields = [fl.sphere_tangent_fields(dims, j, q)
                                  for j in range(dims.n + 1)]
        else:
            self.sphere_fields = [[fl.xi_field(dims, j, i)
                                   for i in range(1, dims.k + 1)]
                                  for j in range(dims.n + 1)]
        self.x0_fields = [fl.x0_field(dims, m) for m in range(dims.n + 1)]
        self._values: dict[int, np.ndarray] = {}
        self._jacs: dict[int, np.ndarray] = {}
        self._brackets: dict[tuple[int, int], np.ndarray] = {}

    # -- caches -------------------------------------------------------------

    def value(self, f: Field) -> np.ndarray:
        key = id(f)
        if key not in self._values:
            self._values[key] = f.at(self.point)
        return self._values[key]

    def jac(self, f: Field) -> np.ndarray:
        key = id(f)
        if key not in self._jacs:
            self._jacs[key] = field_jacobian(f, self.point, self.h)
        return self._jacs[key]

    def tangent_project(self, vec: np.ndarray) -> np.ndarray:
        """Remove radial components on each sphere block (FD noise)."""
        dims = self.dims
        k1 = dims.ambient
        out = vec.copy()
        for i in range(1, dims.n + 2):
            zi = self.q.z[i - 1]
            blk = out[k1 * i:k1 * (i + 1)]
            blk -= (blk @ zi) * zi
        return out

    def bracket(self, f: Field, g: Field) -> np.ndarray:
        key = (id(f), id(g))
        if key not in self._brackets:
            raw = self.jac(g) @ self.value(f) - self.jac(f) @ self.value(g)
            self._brackets[key] = self.tangent_project(raw)
        return self._brackets[key]

    # -- generating families --------------------------------------------------

    def e_fields(self, m: int) -> list[Field]:
        """Generators of the integrable sublevel: sphere tangents m-1..n."""
        if not 1 <= m <= self.dims.n + 1:
            raise IndexError("level needs 1 <= m <= n+1")
        out: list[Field] = []
        for j in range(m - 1, self.dims.n + 1):
            out.extend(self.sphere_fields[j])
        return out

    def d_fields(self, m: int) -> list[Field]:
        """Generators of level m: the steering field of joint m plus the
        sphere tangents above it."""
        return [self.x0_fields[m - 1]] + self.e_fields(m)

    def matrix(self, flds: Sequence[Field]) -> np.ndarray:
        return np.vstack([self.value(f) for f in flds])

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal rows spanning the whole tangent space at q."""
        dims = self.dims
        k1 = dims.ambient
        rows = []
        for r in range(k1):
            e = np.zeros(dims.cartesian_dim)
            e[r] = 1.0
            rows.append(e)
        for i in range(1, dims.n + 2):
            zi = self.q.z[i - 1]
            proj = np.eye(k1) - np.outer(zi, zi)
            basis = orthonormal_rows(proj)
            for b in basis:
                e = np.zeros(dims.cartesian_dim)
                e[k1 * i:k1 * (i + 1)] = b
                rows.append(e)
        return np.vstack(rows)

    # -- residuals ------------------------------------------------------------

    def pair_residual(self, f: Field, g: Field, span_q: np.ndarray) -> float:
        b = self.bracket(f, g)
        resid = b - (b @ span_q.T) @ span_q
        scale = max(float(np.linalg.norm(b)),
                    float(np.linalg.norm(self.value(f))
                          * np.linalg.norm(self.value(g))), 1e-300)
        return float(np.linalg.norm(resid)) / scale


# ---------------------------------------------------------------------------
# public level operations
# ---------------------------------------------------------------------------

def build_level(q: AngularConfig, m: int, basis: str = "projected"
                ) -> tuple[GeneratorSet, GeneratorSet]:
    """Generator sets (D^m, E^m) at q, for m = 1..n+1.

    E^m spans the sphere tangents of spheres m-1..n; D^m adds the steering
    field of joint m.  basis="chart" uses the chart coordinate fields as
    the sphere-tangent family and fails at degenerate charts.
    """
    ctx = _FlagContext(q, basis=basis)
    dflds = ctx.d_fields(m)
    eflds = ctx.e_fields(m)

    def pack(flds: list[Field]) -> GeneratorSet:
        vecs = [TangentVector(ctx.value(f), fl.MODE_EMBEDDED) for f in flds]
        return GeneratorSet(point=q, vectors=vecs,
                            labels=[f.label for f in flds], fields=flds)

    return pack(dflds), pack(eflds)


def rank_of(gs: GeneratorSet, tol: float = 1e-8) -> int:
    """Numerical rank of the span (relative SVD threshold)."""
    return gs.rank(tol)


def _derived_stack(ctx: _FlagContext, m: int) -> np.ndarray:
    """Level m+1 generators together with all their pairwise brackets."""
    gens = ctx.d_fields(m + 1)
    rows = [ctx.value(f) for f in gens]
    for a in range(len(gens)):
        for b in range(a + 1, len(gens)):
            rows.append(ctx.bracket(gens[a], gens[b]))
    return np.vstack(rows)


def derived_rank(q: AngularConfig, m: int, tol: float = 1e-8,
                 h: float = BRACKET_H, basis: str = "projected") -> int:
    """Rank of span(D^{m+1} together with its pairwise brackets), m = 0..n."""
    if not 0 <= m <= q.dims.n:
        raise IndexError("derived level needs 0 <= m <= n")
    ctx = _FlagContext(q, basis=basis, h=h)
    return svd_rank(_derived_stack(ctx, m), tol)


def involutivity_residual(gs: GeneratorSet, h: float = BRACKET_H) -> float:
    """Worst normalized component of a pairwise bracket outside the span.

    Normalization floors at the product of the generator norms so that
    commuting pairs (bracket = pure finite-difference noise) report noise,
    not noise divided by noise.
    """
    if gs.fields is None:
        raise ValueError("generator set carries no fields to differentiate")
    if not isinstance(gs.point, AngularConfig):
        raise ValueError("involutivity check expects an angular base point")
    ctx = _FlagContext(gs.point, h=h)
    span_q = orthonormal_rows(gs.matrix())
    worst = 0.0
    flds = list(gs.fields)
    for a in range(len(flds)):
        for b in range(a + 1, len(flds)):
            worst = max(worst, ctx.pair_residual(flds[a], flds[b], span_q))
    return worst


def cauchy_inclusion_residual(q: AngularConfig, m: int,
                              h: float = BRACKET_H,
                              basis: str = "projected") -> float:
    """Worst normalized component of [E^{m+1}, D^{m+1}] outside span(D^m),
    for m = 1..n."""
    if not 1 <= m <= q.dims.n:
        raise IndexError("inclusion level needs 1 <= m <= n")
    ctx = _FlagContext(q, basis=basis, h=h)
    span_q = orthonormal_rows(ctx.matrix(ctx.d_fields(m)))
    worst = 0.0
    for e in ctx.e_fields(m + 1):
        for d in ctx.d_fields(m + 1):
            if e is d:
                continue
            worst = max(worst, ctx.pair_residual(e, d, span_q))
    return worst


# ---------------------------------------------------------------------------
# point classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointClassification:
    singular: bool
    indices: tuple[int, ...]   # i with A_i ~ 0, 1-based
    a_values: np.ndarray
    eps: float

    @property
    def verdict(self) -> str:
        return "singular" if self.singular else "regular"


def classify_point(q: AngularConfig, eps_sing: float = EPS_SING
                   ) -> PointClassification:
    """Singular iff some consecutive segments are (numerically) orthogonal."""
    a = fl.a_values(q)
    idx = tuple(int(i) + 1 for i in np.flatnonzero(np.abs(a) < eps_sing))
    return PointClassification(singular=bool(idx), indices=idx,
                               a_values=a, eps=eps_sing)


def sandwich_singular_indices(q: AngularConfig, tol: float = 1e-8,
                              basis: str = "projected") -> tuple[int, ...]:
    """Independent singularity test from the sandwich relative position:
    index l fails when the steering field of joint l already lies in the
    sphere-tangent span of spheres l-1..n (no rank increase)."""
    ctx = _FlagContext(q, basis=basis)
    bad = []
    for l in range(1, q.dims.n + 1):
        e_mat = ctx.matrix(ctx.e_fields(l))
        aug = np.vstack([e_mat, ctx.value(ctx.x0_fields[l])])
        if svd_rank(aug, tol) == svd_rank(e_mat, tol):
            bad.append(l)
    return tuple(bad)


# ---------------------------------------------------------------------------
# full verification
# ---------------------------------------------------------------------------

@dataclass
class LevelReport:
    m: int
    rank_d: int
    rank_e: int
    expected_rank_d: int
    expected_rank_e: int
    involutivity_e: float
    cauchy_residual: Optional[float]  # None at the top level

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "rank_D": self.rank_d,
            "rank_E": self.rank_e,
            "expected_rank_D": self.expected_rank_d,
            "expected_rank_E": self.expected_rank_e,
            "involutivity_E": self.involutivity_e,
            "cauchy_residual": self.cauchy_residual,
        }


@dataclass
class DerivedReport:
    m: int                 # target level: brackets of level m+1 vs level m
    rank: int
    expected_rank: int
    angle: float

    def to_dict(self) -> dict:
        return {"m": self.m, "rank": self.rank,
                "expected_rank": self.expected_rank, "angle": self.angle}


@dataclass
class FlagReport:
    """Everything `verify_flag` measured at one configuration; the verdicts
    are recomputable from the recorded numbers alone."""

    dims: ArmDims
    point: dict
    a_values: list
    verdict: str
    singular_indices: tuple
    sandwich_indices: tuple
    levels: list[LevelReport]
    derived: list[DerivedReport]
    delta_involutivity: float
    basis: str
    svd_tol: float
    bracket_h: float
    residual_tol: float
    passed: bool
    failures: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.dims.k,
            "n": self.dims.n,
            "point": self.point,
            "A": self.a_values,
            "verdict": self.verdict,
            "singular_indices": list(self.singular_indices),
            "sandwich_indices": list(self.sandwich_indices),
            "levels": [lv.to_dict() for lv in self.levels],
            "derived": [dv.to_dict() for dv in self.derived],
            "delta_involutivity": self.delta_involutivity,
            "basis": self.basis,
            "tolerances": {"svd": self.svd_tol, "bracket_h": self.bracket_h,
                           "residual": self.residual_tol},
            "passed": self.passed,
            "failures": self.failures,
        }

    def render(self) -> str:
        """Text sandwich diagram with the measured ranks per level."""
        n = self.dims.n
        top = "  ".join([f"D^{m}" for m in range(n + 1, 0, -1)] + ["D^0=TM"])
        ranks_d = "  ".join(
            [f"{lv.rank_d:3d}" for lv in sorted(self.levels,
                                                key=lambda l: -l.m)]
            + [f"{expected_rank_d(self.dims, 0):3d}"])
        bottom = "  ".join([f"E^{m}" for m in range(n + 1, 0, -1)])
        ranks_e = "  ".join(f"{lv.rank_e:3d}" for lv in
                            sorted(self.levels, key=lambda l: -l.m))
        lines = [
            f"flag report (k={self.dims.k}, n={self.dims.n}, "
            f"basis={self.basis})",
            f"  {top}",
            f"  {ranks_d}",
            f"  {bottom}",
            f"  {ranks_e}",
            f"  verdict: {self.verdict}"
            + (f" at indices {list(self.singular_indices)}"
               if self.singular_indices else ""),
            f"  derived spans: " + ", ".join(
                f"[{d.m + 1}]->{d.m}: rank {d.rank} angle {d.angle:.2e}"
                for d in self.derived),
            f"  involutivity: max {max(lv.involutivity_e for lv in self.levels):.2e}"
            f"; top-level non-involutivity {self.delta_involutivity:.2e}",
            f"  {'PASS' if self.passed else 'FAIL: ' + '; '.join(self.failures)}",
        ]
        return "\n".join(lines)


def verify_flag(q: AngularConfig, tol: float = 1e-8, h: float = BRACKET_H,
                basis: str = "projected",
                residual_tol: float = RESIDUAL_TOL,
                eps_sing: float = EPS_SING) -> FlagReport:
    """Measure ranks, derived spans, involutivity and inclusion residuals at
    q, classify the point, and aggregate pass/fail per condition.

    The structural conditions are asserted by the caller only at regular
    points; singular points get the same measurements recorded with a
    `singular` verdict and never raise.
    """
    dims = q.dims
    ctx = _FlagContext(q, basis=basis, h=h)
    cls = classify_point(q, eps_sing)
    sandwich = sandwich_singular_indices(q, tol, basis=basis) if dims.k >= 2 \
        else cls.indices

    failures: list[str] = []
    levels: list[LevelReport] = []
    for m in range(1, dims.n + 2):
        d_mat = ctx.matrix(ctx.d_fields(m))
        e_flds = ctx.e_fields(m)
        e_mat = ctx.matrix(e_flds)
        rank_d = svd_rank(d_mat, tol)
        rank_e = svd_rank(e_mat, tol)
        span_e = orthonormal_rows(e_mat)
        inv = 0.0
        for a in range(len(e_flds)):
            for b in range(a + 1, len(e_flds)):
                inv = max(inv, ctx.pair_residual(e_flds[a], e_flds[b], span_e))
        cauchy = None
        if m <= dims.n:
            span_d = orthonormal_rows(d_mat)
            cauchy = 0.0
            for e in ctx.e_fields(m + 1):
                for d in ctx.d_fields(m + 1):
                    if e is d:
                        continue
                    cauchy = max(cauchy, ctx.pair_residual(e, d, span_d))
        lv = LevelReport(m=m, rank_d=rank_d, rank_e=rank_e,
                         expected_rank_d=expected_rank_d(dims, m),
                         expected_rank_e=expected_rank_e(dims, m),
                         involutivity_e=inv, cauchy_residual=cauchy)
        levels.append(lv)
        if rank_d != lv.expected_rank_d:
            failures.append(f"rank D^{m} = {rank_d} != {lv.expected_rank_d}")
        if rank_e != lv.expected_rank_e:
            failures.append(f"rank E^{m} = {rank_e} != {lv.expected_rank_e}")
        if inv >= residual_tol:
            failures.append(f"E^{m} involutivity residual {inv:.2e}")
        if cauchy is not None and cauchy >= residual_tol:
            failures.append(f"Cauchy inclusion at level {m}: {cauchy:.2e}")

    derived: list[DerivedReport] = []
    for m in range(dims.n, -1, -1):
        stack = _derived_stack(ctx, m)
        rank = svd_rank(stack, tol)
        target = ctx.matrix(ctx.d_fields(m)) if m >= 1 else ctx.tangent_basis()
        angle = subspace_angle(stack, target, tol)
        dv = DerivedReport(m=m, rank=rank,
                           expected_rank=expected_rank_d(dims, m),
                           angle=angle)
        derived.append(dv)
        if rank != dv.expected_rank:
            failures.append(
                f"derived rank of [D^{m + 1},D^{m + 1}] = {rank} "
                f"!= {dv.expected_rank}")
        if angle >= residual_tol:
            failures.append(f"derived span angle at level {m}: {angle:.2e}")

    # top-level non-involutivity (bracket-generating witness, not a gate)
    top = ctx.d_fields(dims.n + 1)
    span_top = orthonormal_rows(ctx.matrix(top))
    delta_inv = 0.0
    for a in range(len(top)):
        for b in range(a + 1, len(top)):
            delta_inv = max(delta_inv,
                            ctx.pair_residual(top[a], top[b], span_top))

    return FlagReport(
        dims=dims,
        point={"x0": q.x0.tolist(), "z": q.z.tolist()},
        a_values=fl.a_values(q).tolist(),
        verdict=cls.verdict,
        singular_indices=cls.indices,
        sandwich_indices=sandwich,
        levels=levels,
        derived=sorted(derived, key=lambda d: d.m),
        delta_involutivity=delta_inv,
        basis=basis,
        svd_tol=tol,
        bracket_h=h,
        residual_tol=residual_tol,
        passed=not failures,
        failures=failures)


# ---------------------------------------------------------------------------
# chart-built basis of the steering plane (used by tests as a cross-check)
# ---------------------------------------------------------------------------

def chart_delta_basis(q: AngularConfig, m: int) -> GeneratorSet:
    """The k+1 combinations of {X_{m-1}^0, X_{m-1}^r} with chart-frame
    coefficients that span the steering plane of joint m-1; the span is what
    matters (coefficient normalization drops out of it)."""
    if not 1 <= m <= q.dims.n:
        raise IndexError("needs 1 <= m <= n")
    dims = q.dims
    from . import hyperspherical as hs
    ang = q.angles(m - 1)
    val, jac = hs.unit_and_jacobian(ang.theta)
    norms = hs.frame_norms(ang.theta)
    x0v = fl.X0_field(q, m - 1).coords
    xiv = [fl.Xi_field(q, m - 1, i).coords for i in range(1, dims.k + 1)]
    vecs = []
    for j in range(dims.k + 1):
        v = val[0][j] * x0v
        for r in range(dims.k):
            v = v + (jac[0][j, r] / norms[r]) * xiv[r]
        vecs.append(TangentVector(v, fl.MODE_EMBEDDED))
    return GeneratorSet(point=q, vectors=vecs,
                        labels=[f"Y{m - 1}^{j + 1}" for j in range(dims.k + 1)])
