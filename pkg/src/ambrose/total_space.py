"""Connection metric and adapted connection on a locally trivialized
principal-bundle total space.

Vector fields are restricted to the module generated by horizontal lifts of
base fields, fundamental fields of constant algebra elements, and vertical
fields of adjoint sections.  Vertical values produced by the case tables
track the provenance of each slot: adjoint-section slots differentiate by the
bundle connection along horizontal directions and are inert vertically, while
constant slots are inert horizontally and move by the bracket vertically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cholesky

from .bundle_conn import (
    LocalConnectionForm,
    assoc_covariant_field,
    curvature_form,
    curvature_form_field,
    form_difference,
)
from .chart_calculus import (
    Chart,
    ConnectionCoeffs,
    MetricField,
    covariant_derivative_field,
    curvature,
    curvature_field,
    fd_array,
    ortho_frame,
    torsion,
    torsion_field,
)
from .errors import RepMismatch, UnsupportedFieldKind
from .homogeneity import VerificationReport
from .lie_core import AdInvariantInner, LieAlgebra
from .tensor_core import to_frame

HORIZONTAL = "horizontal"
VERTICAL = "vertical"
HYP_TOL = 1e-6
DEFAULT_TOL = 1e-5


@dataclass(frozen=True)
class TotalSpaceModel:
    """Base chart with metric and linear connection, structure algebra with
    invariant inner product, and a principal connection form."""

    chart: Chart
    g: MetricField
    gamma: ConnectionCoeffs
    algebra: LieAlgebra
    inner: AdInvariantInner
    a: LocalConnectionForm

    def __post_init__(self):
        if self.a.algebra.labels != self.algebra.labels:
            raise RepMismatch("connection form algebra differs from model algebra")


@dataclass(frozen=True)
class AdaptedFrameVector:
    """A single-block tangent vector on the total space."""

    tag: str
    payload: np.ndarray

    def __post_init__(self):
        if self.tag not in (HORIZONTAL, VERTICAL):
            raise UnsupportedFieldKind(f"unknown tag {self.tag!r}")
        object.__setattr__(self, "payload", np.asarray(self.payload, float))


@dataclass(frozen=True)
class TotalVector:
    """Full tangent value: horizontal part in base coordinates plus vertical
    part in algebra coordinates."""

    horizontal: np.ndarray
    vertical: np.ndarray

    def __add__(self, other: "TotalVector") -> "TotalVector":
        return TotalVector(self.horizontal + other.horizontal,
                           self.vertical + other.vertical)

    def __sub__(self, other: "TotalVector") -> "TotalVector":
        return TotalVector(self.horizontal - other.horizontal,
                           self.vertical - other.vertical)


def total_zero(model: TotalSpaceModel) -> TotalVector:
    return TotalVector(np.zeros(model.chart.dim), np.zeros(model.algebra.dim))


LIFT = "lift"
FUNDAMENTAL = "fundamental"
ADJOINT = "adjoint"


@dataclass(frozen=True)
class GeneratedField:
    """Horizontal lift of a base field, fundamental field of a constant
    algebra element, or vertical field of an adjoint section."""

    kind: str
    payload: np.ndarray | Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.kind not in (LIFT, FUNDAMENTAL, ADJOINT):
            raise UnsupportedFieldKind(f"unknown field kind {self.kind!r}")
        if self.kind == FUNDAMENTAL and callable(self.payload):
            raise UnsupportedFieldKind("fundamental fields take a constant element")

    def at(self, x: np.ndarray) -> np.ndarray:
        if callable(self.payload):
            return np.asarray(self.payload(np.asarray(x, float)), float)
        return np.asarray(self.payload, float)

    def value(self, model: TotalSpaceModel, x: np.ndarray) -> TotalVector:
        v = self.at(x)
        if self.kind == LIFT:
            return TotalVector(v, np.zeros(model.algebra.dim))
        return TotalVector(np.zeros(model.chart.dim), v)


def lift(payload) -> GeneratedField:
    return GeneratedField(LIFT, payload)


def fundamental(c) -> GeneratedField:
    return GeneratedField(FUNDAMENTAL, c)


def xi(nu) -> GeneratedField:
    return GeneratedField(ADJOINT, nu)


def horizontal_lift_shift(z, a0: LocalConnectionForm, a: LocalConnectionForm,
                          x: np.ndarray) -> np.ndarray:
    """The algebra element alpha(Z) by which the two horizontal lifts of Z
    differ at x, with alpha = a - a0."""
    x = np.asarray(x, float)
    zv = np.asarray(z(x) if callable(z) else z, float)
    return (a.at(x) - a0.at(x)).T @ zv


def base_cov(model: TotalSpaceModel, h, x: np.ndarray,
             xv: np.ndarray) -> np.ndarray:
    """Base covariant derivative of the base field h along vector xv at x."""
    x = np.asarray(x, float)
    if callable(h):
        dh = np.stack([fd_array(h, model.chart, x, mu)
                       for mu in range(model.chart.dim)])
    else:
        dh = np.zeros((model.chart.dim, model.chart.dim))
    hv = np.asarray(h(x) if callable(h) else h, float)
    G = model.gamma.at(x)
    return np.einsum("m,mk->k", xv, dh) + np.einsum("kmj,m,j->k", G, xv, hv)


def conn_cov(model: TotalSpaceModel, nu, x: np.ndarray,
             xv: np.ndarray) -> np.ndarray:
    """Bundle covariant derivative of the adjoint section nu along xv at x."""
    x = np.asarray(x, float)
    if callable(nu):
        dn = np.stack([fd_array(nu, model.chart, x, mu)
                       for mu in range(model.chart.dim)])
    else:
        dn = np.zeros((model.chart.dim, model.algebra.dim))
    nv = np.asarray(nu(x) if callable(nu) else nu, float)
    av = model.a.at(x)
    out = np.einsum("m,mi->i", xv, dn)
    for mu in range(model.chart.dim):
        out += xv[mu] * model.algebra.bracket(av[mu], nv)
    return out


class VertExpr:
    """Vertical value with provenance-aware derivative rules."""

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d_h(self, model: TotalSpaceModel, x: np.ndarray,
            xv: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d_v(self, model: TotalSpaceModel, x: np.ndarray,
            a: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ConstVert(VertExpr):
    def __init__(self, c: np.ndarray):
        self.c = np.asarray(c, float)

    def value(self, x):
        return self.c

    def d_h(self, model, x, xv):
        return np.zeros_like(self.c)

    def d_v(self, model, x, a):
        return model.algebra.bracket(a, self.c)


class SectionVert(VertExpr):
    def __init__(self, nu: Callable[[np.ndarray], np.ndarray]):
        self.nu = nu

    def value(self, x):
        return np.asarray(self.nu(np.asarray(x, float)), float)

    def d_h(self, model, x, xv):
        return conn_cov(model, self.nu, x, xv)

    def d_v(self, model, x, a):
        return np.zeros(model.algebra.dim)


class BracketVert(VertExpr):
    def __init__(self, left: VertExpr, right: VertExpr):
        self.left = left
        self.right = right

    def value(self, x):
        raise NotImplementedError  # bracket needs the algebra; use methods below

    def value_in(self, model, x):
        return model.algebra.bracket(self.left.value(x), self.right.value(x))

    def d_h(self, model, x, xv):
        return model.algebra.bracket(
            self.left.d_h(model, x, xv), self.right.value(x)
        ) + model.algebra.bracket(self.left.value(x), self.right.d_h(model, x, xv))

    def d_v(self, model, x, a):
        return model.algebra.bracket(
            self.left.d_v(model, x, a), self.right.value(x)
        ) + model.algebra.bracket(self.left.value(x), self.right.d_v(model, x, a))


def vert_value(model: TotalSpaceModel, expr: VertExpr, x: np.ndarray) -> np.ndarray:
    if isinstance(expr, BracketVert):
        return expr.value_in(model, x)
    return expr.value(x)


def bar_connection_apply(model: TotalSpaceModel, u: GeneratedField,
                         v: GeneratedField, x: np.ndarray) -> TotalVector:
    """Case table of the adapted connection on generated fields at x."""
    x = np.asarray(x, float)
    out = total_zero(model)
    if u.kind == LIFT:
        xv = u.at(x)
        if v.kind == LIFT:
            return TotalVector(base_cov(model, v.payload, x, xv),
                               out.vertical)
        if v.kind == ADJOINT:
            return TotalVector(out.horizontal, conn_cov(model, v.payload, x, xv))
        return out
    w = u.at(x)
    if v.kind == FUNDAMENTAL:
        return TotalVector(out.horizontal, model.algebra.bracket(w, v.at(x)))
    return out


def bar_torsion(model: TotalSpaceModel, u: GeneratedField, v: GeneratedField,
                x: np.ndarray) -> TotalVector:
    """Torsion case table: horizontal pair gives base torsion plus curvature
    form; mixed pairs vanish; vertical pairs give the bracket."""
    x = np.asarray(x, float)
    if u.kind == LIFT and v.kind == LIFT:
        xv, yv = u.at(x), v.at(x)
        t = torsion(model.gamma, x).data
        f = curvature_form(model.a, x).data
        return TotalVector(np.einsum("kij,i,j->k", t, xv, yv),
                           np.einsum("ijc,i,j->c", f, xv, yv))
    if u.kind != LIFT and v.kind != LIFT:
        return TotalVector(np.zeros(model.chart.dim),
                           model.algebra.bracket(u.at(x), v.at(x)))
    return total_zero(model)


def _pair_torsion(model: TotalSpaceModel, uv: TotalVector, vv: TotalVector,
                  x: np.ndarray) -> TotalVector:
    t = torsion(model.gamma, x).data
    f = curvature_form(model.a, x).data
    h = np.einsum("kij,i,j->k", t, uv.horizontal, vv.horizontal)
    w = np.einsum("ijc,i,j->c", f, uv.horizontal, vv.horizontal)
    w = w + model.algebra.bracket(uv.vertical, vv.vertical)
    return TotalVector(h, w)


def _pair_curvature(model: TotalSpaceModel, uv: TotalVector, vv: TotalVector,
                    wv: TotalVector, x: np.ndarray) -> TotalVector:
    r = curvature(model.gamma, x).data
    f = curvature_form(model.a, x).data
    h = np.einsum("lkij,i,j,k->l", r, uv.horizontal, vv.horizontal, wv.horizontal)
    fv = np.einsum("ijc,i,j->c", f, uv.horizontal, vv.horizontal)
    return TotalVector(h, model.algebra.bracket(fv, wv.vertical))


def bracket_fields(model: TotalSpaceModel, u: GeneratedField, v: GeneratedField,
                   x: np.ndarray) -> TotalVector:
    """Lie bracket of generated fields at x: base bracket minus the curvature
    obstruction for lifts; fundamental pairs bracket in the algebra; a lift
    and a fundamental field commute."""
    x = np.asarray(x, float)
    if u.kind == LIFT and v.kind == LIFT:
        xv, yv = u.at(x), v.at(x)
        du = np.stack([fd_array(u.payload, model.chart, x, mu)
                       for mu in range(model.chart.dim)]) if callable(u.payload) \
            else np.zeros((model.chart.dim, model.chart.dim))
        dv = np.stack([fd_array(v.payload, model.chart, x, mu)
                       for mu in range(model.chart.dim)]) if callable(v.payload) \
            else np.zeros((model.chart.dim, model.chart.dim))
        hx = np.einsum("m,mk->k", xv, dv) - np.einsum("m,mk->k", yv, du)
        f = curvature_form(model.a, x).data
        return TotalVector(hx, -np.einsum("ijc,i,j->c", f, xv, yv))
    if u.kind == FUNDAMENTAL and v.kind == FUNDAMENTAL:
        return TotalVector(np.zeros(model.chart.dim),
                           model.algebra.bracket(u.at(x), v.at(x)))
    if LIFT in (u.kind, v.kind) and FUNDAMENTAL in (u.kind, v.kind):
        return total_zero(model)
    raise UnsupportedFieldKind("bracket supports lift and fundamental fields")


def bar_torsion_direct(model: TotalSpaceModel, u: GeneratedField,
                       v: GeneratedField, x: np.ndarray) -> TotalVector:
    """Torsion from its definition, for comparison against the case table."""
    return (bar_connection_apply(model, u, v, x)
            - bar_connection_apply(model, v, u, x)
            - bracket_fields(model, u, v, x))


def connection_metric(model: TotalSpaceModel, u: TotalVector, v: TotalVector,
                      x: np.ndarray) -> float:
    """g_A: base metric on horizontal parts plus the invariant inner product
    on vertical parts."""
    gx = model.g.at(np.asarray(x, float))
    return float(u.horizontal @ gx @ v.horizontal
                 + u.vertical @ model.inner.matrix @ v.vertical)


def _vertical_coframe(model: TotalSpaceModel) -> np.ndarray:
    # rows w -> orthonormal coordinates for the inner product
    return cholesky(model.inner.matrix, lower=True).T


def _frame_fields(model: TotalSpaceModel) -> tuple[list[GeneratedField], list[GeneratedField]]:
    n = model.chart.dim
    lifts = [
        lift(lambda y, a=a: ortho_frame(model.g, y).frame[:, a]) for a in range(n)
    ]
    l_inv = np.linalg.inv(_vertical_coframe(model))
    funds = [fundamental(l_inv[:, i]) for i in range(model.algebra.dim)]
    return lifts, funds


def _tv_norm2(model: TotalSpaceModel, tv: TotalVector, x: np.ndarray) -> float:
    fr = ortho_frame(model.g, x)
    h = fr.coframe @ tv.horizontal
    w = _vertical_coframe(model) @ tv.vertical
    return float(h @ h + w @ w)


def _bar_torsion_field(model: TotalSpaceModel, v: GeneratedField,
                       w: GeneratedField):
    """T-bar(v, w) as (horizontal base field, vertical expression)."""
    if v.kind == LIFT and w.kind == LIFT:
        def h_field(y):
            t = torsion(model.gamma, y).data
            return np.einsum("kij,i,j->k", t, v.at(y), w.at(y))

        def nu_field(y):
            f = curvature_form(model.a, y).data
            return np.einsum("ijc,i,j->c", f, v.at(y), w.at(y))

        return h_field, SectionVert(nu_field)
    if v.kind == FUNDAMENTAL and w.kind == FUNDAMENTAL:
        return None, ConstVert(
            model.algebra.bracket(np.asarray(v.payload, float),
                                  np.asarray(w.payload, float))
        )
    return None, None


def _bar_curvature_field(model: TotalSpaceModel, v: GeneratedField,
                         w: GeneratedField, z: GeneratedField):
    """R-bar(v, w)z as (horizontal base field, vertical expression)."""
    if v.kind != LIFT or w.kind != LIFT:
        return None, None
    if z.kind == LIFT:
        def h_field(y):
            r = curvature(model.gamma, y).data
            return np.einsum("lkij,i,j,k->l", r, v.at(y), w.at(y), z.at(y))

        return h_field, None

    def f_field(y):
        f = curvature_form(model.a, y).data
        return np.einsum("ijc,i,j->c", f, v.at(y), w.at(y))

    return None, BracketVert(SectionVert(f_field), ConstVert(z.payload))


def _derive_output(model: TotalSpaceModel, h_field, vert: VertExpr | None,
                   u: GeneratedField, x: np.ndarray) -> TotalVector:
    """Covariant derivative of a case-table output field along frame field u."""
    out = total_zero(model)
    if u.kind == LIFT:
        xv = u.at(x)
        h = base_cov(model, h_field, x, xv) if h_field is not None else out.horizontal
        w = vert.d_h(model, x, xv) if vert is not None else out.vertical
        return TotalVector(h, w)
    a = u.at(x)
    w = vert.d_v(model, x, a) if vert is not None else out.vertical
    return TotalVector(out.horizontal, w)


def bar_torsion_derivative(model: TotalSpaceModel, u: GeneratedField,
                           v: GeneratedField, w: GeneratedField,
                           x: np.ndarray) -> TotalVector:
    """(del-bar T-bar)(u; v, w) on adapted frame fields."""
    x = np.asarray(x, float)
    h_field, vert = _bar_torsion_field(model, v, w)
    term1 = _derive_output(model, h_field, vert, u, x)
    dv = bar_connection_apply(model, u, v, x)
    dw = bar_connection_apply(model, u, w, x)
    term2 = _pair_torsion(model, dv, w.value(model, x), x)
    term3 = _pair_torsion(model, v.value(model, x), dw, x)
    return term1 - term2 - term3


def bar_curvature_derivative(model: TotalSpaceModel, u: GeneratedField,
                             v: GeneratedField, w: GeneratedField,
                             z: GeneratedField, x: np.ndarray) -> TotalVector:
    """(del-bar R-bar)(u; v, w, z) on adapted frame fields."""
    x = np.asarray(x, float)
    h_field, vert = _bar_curvature_field(model, v, w, z)
    term1 = _derive_output(model, h_field, vert, u, x)
    dv = bar_connection_apply(model, u, v, x)
    dw = bar_connection_apply(model, u, w, x)
    dz = bar_connection_apply(model, u, z, x)
    vv, wv, zv = (f.value(model, x) for f in (v, w, z))
    term2 = _pair_curvature(model, dv, wv, zv, x)
    term3 = _pair_curvature(model, vv, dw, zv, x)
    term4 = _pair_curvature(model, vv, wv, dz, x)
    return term1 - term2 - term3 - term4


def bar_curvature(model: TotalSpaceModel, u: GeneratedField, v: GeneratedField,
                  w: GeneratedField, x: np.ndarray) -> TotalVector:
    """Curvature case table: nonzero only for horizontal direction pairs."""
    x = np.asarray(x, float)
    if u.kind != LIFT or v.kind != LIFT:
        return total_zero(model)
    uv, vv, wv = (f.value(model, x) for f in (u, v, w))
    return _pair_curvature(model, uv, vv, wv, x)


def _hypotheses_residuals(model: TotalSpaceModel,
                          points: np.ndarray) -> dict[str, float]:
    dr = covariant_derivative_field(model.gamma, curvature_field(model.gamma))
    dt = covariant_derivative_field(model.gamma, torsion_field(model.gamma))
    df = assoc_covariant_field(model.a, model.gamma, curvature_form_field(model.a))
    out = {"nabla_R": 0.0, "nabla_T": 0.0, "nabla_F": 0.0}
    for x in points:
        fr = ortho_frame(model.g, x)
        out["nabla_R"] = max(out["nabla_R"], to_frame(dr.at(x), fr).norm())
        out["nabla_T"] = max(out["nabla_T"], to_frame(dt.at(x), fr).norm())
        out["nabla_F"] = max(out["nabla_F"], to_frame(df.at(x), fr).norm())
    return out


def bar_parallelism_check(model: TotalSpaceModel, points: np.ndarray,
                          tol: float = DEFAULT_TOL, hyp_tol: float = HYP_TOL,
                          fixture: str = "") -> VerificationReport:
    """Torsion and curvature of the adapted connection are parallel, given
    the base parallelism hypotheses."""
    points = np.atleast_2d(np.asarray(points, float))
    residuals = _hypotheses_residuals(model, points)
    flags: list[str] = []
    if max(residuals.values()) > hyp_tol:
        flags.append("hypotheses-failed")
    lifts, funds = _frame_fields(model)
    frame = lifts + funds
    bar_t = 0.0
    bar_r = 0.0
    for x in points:
        acc_t = 0.0
        for u in frame:
            for v in frame:
                for w in frame:
                    tv = bar_torsion_derivative(model, u, v, w, x)
                    acc_t += _tv_norm2(model, tv, x)
        acc_r = 0.0
        for u in frame:
            for v in lifts:
                for w in lifts:
                    for z in frame:
                        rv = bar_curvature_derivative(model, u, v, w, z, x)
                        acc_r += _tv_norm2(model, rv, x)
        bar_t = max(bar_t, float(np.sqrt(acc_t)))
        bar_r = max(bar_r, float(np.sqrt(acc_r)))
    residuals["nabla_bar_T"] = bar_t
    residuals["nabla_bar_R"] = bar_r
    tolerances = {
        "nabla_R": hyp_tol, "nabla_T": hyp_tol, "nabla_F": hyp_tol,
        "nabla_bar_T": tol, "nabla_bar_R": tol,
    }
    passed = ("hypotheses-failed" not in flags) and bar_t < tol and bar_r < tol
    return VerificationReport(
        scenario="total-space",
        fixture=fixture,
        points=points,
        residuals=residuals,
        tolerances=tolerances,
        passed=passed,
        flags=tuple(flags),
    )


def distribution_parallel_check(model: TotalSpaceModel, a0: LocalConnectionForm,
                                points: np.ndarray, tol: float = DEFAULT_TOL,
                                hyp_tol: float = HYP_TOL,
                                fixture: str = "") -> VerificationReport:
    """The reference horizontal distribution is parallel for the adapted
    connection iff the shift form is parallel."""
    points = np.atleast_2d(np.asarray(points, float))
    alpha = form_difference(model.a, a0)
    dalpha = assoc_covariant_field(model.a, model.gamma, alpha)
    hyp = 0.0
    for x in points:
        fr = ortho_frame(model.g, x)
        hyp = max(hyp, to_frame(dalpha.at(x), fr).norm())
    flags: list[str] = []
    if hyp > hyp_tol:
        flags.append("hypotheses-failed")
    lifts, _ = _frame_fields(model)
    vc = _vertical_coframe(model)
    worst = 0.0
    for x in points:
        for xf in lifts:
            xv = xf.at(x)
            for zf in lifts:
                def shift(y, zf=zf):
                    return alpha.at(y).data.T @ zf.at(y)

                dz = base_cov(model, zf.payload, x, xv)
                resid = conn_cov(model, shift, x, xv) - alpha.at(x).data.T @ dz
                worst = max(worst, float(np.linalg.norm(vc @ resid)))
    residuals = {"alpha_parallel": hyp, "distribution": worst}
    tolerances = {"alpha_parallel": hyp_tol, "distribution": tol}
    passed = ("hypotheses-failed" not in flags) and worst < tol
    return VerificationReport(
        scenario="total-space",
        fixture=fixture,
        points=points,
        residuals=residuals,
        tolerances=tolerances,
        passed=passed,
        flags=tuple(flags),
    )
