"""Derivative towers, stabilizer chains, the Singer-type invariant, adapted
connections, and the local homogeneity / local symmetry criteria.

Tower entries are expressed in the Cholesky orthonormal frame at the base
point, so group actions on them are orthogonal and norms are gauge-invariant.
Gauge-covariant derivatives of frame-expressed fields use the moving-frame
form of the connection: del_mu = d_mu + action(b_mu).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .bundle_conn import (
    LocalConnectionForm,
    SectionSpec,
    assoc_covariant_field,
    curvature_form_field,
    form_difference,
)
from .chart_calculus import (
    Chart,
    ConnectionCoeffs,
    MetricField,
    TensorFieldSpec,
    covariant_derivative_field,
    curvature_field,
    levi_civita,
    ortho_frame,
    ortho_frame_partial,
    torsion_field,
)
from .errors import (
    DepthMismatch,
    NotInvariant,
    NotMetric,
    NotReductive,
    NumericalFailure,
    RepMismatch,
)
from .lie_core import (
    AdInvariantInner,
    LieAlgebra,
    LinearRep,
    TensorRep,
    nullspace,
    principal_angles,
    reductive_complement,
    stacked_action_matrix,
)
from .tensor_core import DOWN, LIE, UP, DenseTensor, OrthoFrame, to_frame

NULL_TOL = 1e-8
ANGLE_TOL = 1e-6
DEFAULT_TOL = 1e-5
KMAX_START = 2
KMAX_CAP = 4


@dataclass(frozen=True)
class DerivativeTower:
    """Iterated covariant derivatives of a section, frame-expressed at x."""

    point: np.ndarray
    frame: OrthoFrame
    kmax: int
    entries: tuple[tuple[DenseTensor, ...], ...]

    def up_to(self, depth: int) -> list[DenseTensor]:
        if depth >= len(self.entries):
            raise DepthMismatch(
                f"tower has entries up to {len(self.entries) - 1}, need {depth}"
            )
        return [t for entry in self.entries[: depth + 1] for t in entry]


@dataclass(frozen=True)
class StabilizerChain:
    """Nested stabilizer subalgebras of the tower entries."""

    bases: tuple[np.ndarray, ...]
    dims: tuple[int, ...]
    singer_k: int | None
    flags: tuple[str, ...]


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    theta: np.ndarray | None
    residual: float
    reason: str = ""


@dataclass(frozen=True)
class TripleSpec:
    """A metric, a structure algebra with invariant inner product, and a
    reference connection form on the trivialized bundle."""

    g: MetricField
    algebra: LieAlgebra
    inner: AdInvariantInner
    a0: LocalConnectionForm


@dataclass(frozen=True)
class VerificationReport:
    scenario: str
    fixture: str
    points: np.ndarray
    residuals: dict[str, float]
    tolerances: dict[str, float]
    passed: bool
    stabilizer_dims: tuple[int, ...] | None = None
    singer_k: int | None = None
    flags: tuple[str, ...] = ()


def section_fields(sigma: SectionSpec) -> tuple[TensorFieldSpec, ...]:
    return tuple(sigma.fields)


def derivative_fields(sigma: SectionSpec, b0: LocalConnectionForm | None,
                      gamma0: ConnectionCoeffs, kmax: int,
                      ) -> list[tuple[TensorFieldSpec, ...]]:
    """Field wrappers for sigma and its first kmax iterated derivatives."""
    levels = [tuple(sigma.fields)]
    for _ in range(kmax):
        if b0 is None:
            nxt = tuple(covariant_derivative_field(gamma0, f) for f in levels[-1])
        else:
            nxt = tuple(assoc_covariant_field(b0, gamma0, f) for f in levels[-1])
        levels.append(nxt)
    return levels


def build_tower(sigma: SectionSpec, b0: LocalConnectionForm | None,
                gamma0: ConnectionCoeffs, g: MetricField, x: np.ndarray,
                kmax: int, frame: OrthoFrame | None = None) -> DerivativeTower:
    """Evaluate the derivative tower at x, frame-expressed via the Cholesky
    orthonormal frame of g (or a caller-supplied orthonormal frame)."""
    if kmax < 1:
        raise DepthMismatch("tower depth kmax must be at least 1")
    x = np.asarray(x, float)
    fr = ortho_frame(g, x) if frame is None else frame
    levels = derivative_fields(sigma, b0, gamma0, kmax)
    entries = tuple(
        tuple(to_frame(f.at(x), fr) for f in level) for level in levels
    )
    return DerivativeTower(point=x, frame=fr, kmax=kmax, entries=entries)


def stabilizer_chain(tower: DerivativeTower, rep: TensorRep,
                     rel_tol: float = NULL_TOL,
                     angle_tol: float = ANGLE_TOL) -> StabilizerChain:
    """h(k) = kernel of the stacked action matrix over entries 0..k."""
    bases: list[np.ndarray] = []
    flags: list[str] = []
    ambiguous = False
    for k in range(len(tower.entries)):
        tensors = tower.up_to(k)
        # cutoff floored at the entry scale so levels that vanish in exact
        # arithmetic do not present their FD noise as full-rank columns
        scale = float(np.sqrt(sum(t.norm() ** 2 for t in tensors)))
        mat = stacked_action_matrix(tensors, rep)
        bases.append(nullspace(mat, rel_tol=rel_tol, scale=scale))
        if mat.any():
            sing = np.linalg.svd(mat, compute_uv=False)
            cutoff = rel_tol * max(sing[0], scale)
            below = sing[sing <= cutoff]
            above = sing[sing > cutoff]
            # kernel and range must be separated by a clear spectral gap
            if below.size and above.size and above.min() < 10.0 * below.max():
                ambiguous = True
    dims = tuple(b.shape[1] for b in bases)
    singer_k: int | None = None
    for k in range(len(bases) - 1):
        if dims[k + 1] != dims[k]:
            continue
        if dims[k] == 0 or principal_angles(bases[k + 1], bases[k]).max() < angle_tol:
            singer_k = k
            break
    if singer_k is None:
        flags.append("truncated")
    elif any(d != dims[singer_k] for d in dims[singer_k + 1 :]):
        # a later level shrank again: the stabilization was spurious
        ambiguous = True
    if ambiguous:
        flags.append("ambiguous")
    return StabilizerChain(
        bases=tuple(bases), dims=dims, singer_k=singer_k, flags=tuple(flags)
    )


def tower_and_chain(sigma: SectionSpec, b0: LocalConnectionForm | None,
                    gamma0: ConnectionCoeffs, g: MetricField, x: np.ndarray,
                    rep: TensorRep, kmax: int | None = None,
                    ) -> tuple[DerivativeTower, StabilizerChain]:
    """Build the tower deep enough to observe stabilization, within the cap."""
    depth = KMAX_START if kmax is None else kmax
    while True:
        tower = build_tower(sigma, b0, gamma0, g, x, depth)
        chain = stabilizer_chain(tower, rep)
        if kmax is not None or chain.singer_k is not None or depth >= KMAX_CAP:
            return tower, chain
        depth += 1


def group_action(theta: np.ndarray, rep: TensorRep, t: DenseTensor) -> DenseTensor:
    """Action of exp(theta) on a frame-expressed tensor, axis by axis."""
    theta = np.asarray(theta, float)
    gv = expm(rep.vector.matrix(theta))
    gv_dual = expm(-rep.vector.matrix(theta)).T
    gl = expm(rep.lie.matrix(theta)) if rep.lie is not None else None
    data = t.data
    from .tensor_core import apply_axis

    for ax, marker in enumerate(t.markers):
        if marker == UP:
            data = apply_axis(gv, data, ax)
        elif marker == DOWN:
            data = apply_axis(gv_dual, data, ax)
        else:
            if gl is None:
                raise RepMismatch("tensor has lie axes but no lie representation")
            data = apply_axis(gl, data, ax)
    return DenseTensor(t.markers, data)


def _axis_kind(marker: str) -> str:
    return "lie" if marker == LIE else "frame"


def _even_rank_spectrum(t: DenseTensor) -> np.ndarray | None:
    """Sorted eigenvalues of the symmetrized square reshape, when invariant.

    Valid as a G-invariant only when the two axis-half patterns match kind by
    kind, so both halves transform by the same orthogonal factor."""
    r = len(t.markers)
    if r == 0 or r % 2 != 0:
        return None
    half = r // 2
    for i in range(half):
        if _axis_kind(t.markers[i]) != _axis_kind(t.markers[half + i]):
            return None
        if t.dims[i] != t.dims[half + i]:
            return None
    d = int(np.prod(t.dims[:half]))
    a = t.data.reshape(d, d)
    return np.sort(np.linalg.eigvalsh(0.5 * (a + a.T)))


def _compass_search(f: Callable[[np.ndarray], float], theta0: np.ndarray,
                    max_sweeps: int = 500, target: float = 1e-14,
                    ) -> tuple[np.ndarray, float]:
    """Coordinate descent with backtracking step halving."""
    theta = np.asarray(theta0, float).copy()
    val = f(theta)
    step = 0.5
    for _ in range(max_sweeps):
        if val < target or step < 1e-10:
            break
        improved = False
        for i in range(theta.size):
            for sgn in (1.0, -1.0):
                trial = theta.copy()
                trial[i] += sgn * step
                tv = f(trial)
                if tv < val:
                    theta, val = trial, tv
                    improved = True
        if not improved:
            step *= 0.5
    return theta, val


def orbit_match(t1: DerivativeTower, t2: DerivativeTower, rep: TensorRep,
                depth: int, rel_tol: float = 1e-6, starts: int = 16,
                seed: int = 0) -> MatchResult:
    """Search the identity component for a group element matching the towers."""
    e1 = t1.up_to(depth)
    e2 = t2.up_to(depth)
    if len(e1) != len(e2):
        raise DepthMismatch("towers have different component counts")
    chain1 = stabilizer_chain(t1, rep)
    chain2 = stabilizer_chain(t2, rep)
    if chain1.singer_k != chain2.singer_k or chain1.dims != chain2.dims:
        return MatchResult(False, None, np.inf, "singer-mismatch")

    scale = max(
        sum(t.norm() ** 2 for t in e1), sum(t.norm() ** 2 for t in e2)
    )
    if scale < 1e-300:
        return MatchResult(True, np.zeros(rep.algebra.dim), 0.0)
    ref = float(np.sqrt(scale))
    for a, b in zip(e1, e2):
        if a.markers != b.markers or a.dims != b.dims:
            raise DepthMismatch("tower entries have mismatched shapes")
        if abs(a.norm() - b.norm()) > 1e-5 * ref:
            return MatchResult(False, None, np.inf, "prescreen-norm")
        s1, s2 = _even_rank_spectrum(a), _even_rank_spectrum(b)
        if s1 is not None and np.abs(s1 - s2).max() > 1e-5 * ref:
            return MatchResult(False, None, np.inf, "prescreen-spectrum")

    def objective(theta: np.ndarray) -> float:
        num = sum(
            (group_action(theta, rep, a) - b).norm() ** 2 for a, b in zip(e1, e2)
        )
        return num / scale

    m = rep.algebra.dim
    rng = np.random.default_rng(seed)
    best_theta = np.zeros(m)
    best = objective(best_theta)
    target = rel_tol**2
    for s in range(starts):
        theta0 = np.zeros(m) if s == 0 else rng.uniform(-np.pi, np.pi, size=m)
        theta, val = _compass_search(objective, theta0, target=0.01 * target)
        if val < best:
            best_theta, best = theta, val
        if best < 0.01 * target:
            break
    residual = float(np.sqrt(best))
    if residual < rel_tol:
        return MatchResult(True, best_theta, residual)
    return MatchResult(False, best_theta, residual, "residual")


def frame_gauge_form(gamma: ConnectionCoeffs, g: MetricField,
                     so_rep: LinearRep) -> LocalConnectionForm:
    """Moving-frame form of a metric connection in the Cholesky gauge.

    Returns algebra coordinates of w_mu = E^{-1}(d_mu E + Gamma_mu E), which
    must be antisymmetric (the connection must be metric for g)."""
    algebra = so_rep.algebra
    mats = so_rep.matrices
    pinv = np.linalg.pinv(mats.reshape(algebra.dim, -1).T)

    def ev(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        fr = ortho_frame(g, x)
        G = gamma.at(x)
        rows = []
        for mu in range(g.chart.dim):
            dframe, _ = ortho_frame_partial(g, x, mu)
            w = fr.coframe @ (dframe + G[:, mu, :] @ fr.frame)
            if np.abs(w + w.T).max() > 1e-6 * max(1.0, np.abs(w).max()):
                raise NotMetric("connection is not metric: gauge form not antisymmetric")
            w = 0.5 * (w - w.T)
            rows.append(pinv @ w.reshape(-1))
        return np.array(rows)

    return LocalConnectionForm(chart=g.chart, algebra=algebra, evaluator=ev)


def with_adjoint_rep(rep: TensorRep) -> TensorRep:
    """Same frame action, with lie axes carrying the full adjoint action."""
    return TensorRep(rep.algebra, rep.vector, rep.algebra.adjoint_rep())


def gauge_derivative(b: LocalConnectionForm, rep: TensorRep,
                     t_hat: TensorFieldSpec, x: np.ndarray) -> DenseTensor:
    """Covariant derivative of a frame-expressed field: d + action(b_mu)."""
    from .lie_core import tensor_action

    x = np.asarray(x, float)
    bv = b.at(x)
    tx = t_hat.at(x)
    n = b.chart.dim
    rows = []
    for mu in range(n):
        d = t_hat.partial_at(x, mu).data + tensor_action(bv[mu], tx, rep).data
        rows.append(d)
    return DenseTensor((DOWN,) + tuple(t_hat.markers), np.stack(rows))


def gauge_residual(b: LocalConnectionForm, rep: TensorRep,
                   t_hat: TensorFieldSpec, g: MetricField,
                   x: np.ndarray) -> float:
    """Frame-invariant norm of the gauge-covariant derivative at x."""
    d = gauge_derivative(b, rep, t_hat, x)
    fr = ortho_frame(g, x)
    hat = np.tensordot(fr.frame, d.data, axes=(0, 0))
    return float(np.linalg.norm(hat))


def frame_expressed_field(t: TensorFieldSpec, g: MetricField) -> TensorFieldSpec:
    """Re-express a coordinate tensor field in the moving Cholesky frame."""
    return TensorFieldSpec(
        chart=t.chart,
        markers=t.markers,
        evaluator=lambda x: to_frame(t.at(x), ortho_frame(g, x)),
    )


def form_as_field(b: LocalConnectionForm, g: MetricField) -> TensorFieldSpec:
    """Frame-expressed adjoint-valued 1-form field b_a = b(e_a)."""

    def ev(x: np.ndarray) -> DenseTensor:
        fr = ortho_frame(g, x)
        return DenseTensor((DOWN, LIE), fr.frame.T @ b.at(x))

    return TensorFieldSpec(chart=b.chart, markers=(DOWN, LIE), evaluator=ev)


def adapted_connection(b0: LocalConnectionForm, b_prime: LocalConnectionForm,
                       chain_field: Callable[[np.ndarray], StabilizerChain],
                       inner: AdInvariantInner) -> LocalConnectionForm:
    """b = b0 + component of (b' - b0) in the invariant complement of the
    stabilized subalgebra."""
    if b0.algebra.labels != b_prime.algebra.labels:
        raise RepMismatch("connection forms live over different algebras")

    def ev(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        chain = chain_field(x)
        if chain.singer_k is None:
            raise NumericalFailure("stabilizer chain did not stabilize")
        h = chain.bases[min(chain.singer_k + 1, len(chain.bases) - 1)]
        try:
            reductive_complement(h, inner)
        except NotInvariant as exc:
            raise NotReductive(str(exc)) from exc
        beta = b_prime.at(x) - b0.at(x)
        if h.shape[1] == 0:
            return b0.at(x) + beta
        m = inner.matrix
        gram = h.T @ m @ h
        proj = h @ np.linalg.solve(gram, h.T @ m)
        beta_k = beta - beta @ proj.T
        return b0.at(x) + beta_k

    return LocalConnectionForm(chart=b0.chart, algebra=b0.algebra, evaluator=ev)


def opozda_section_spec(gamma: ConnectionCoeffs) -> SectionSpec:
    """Torsion and curvature of a reference connection as a section pair."""
    return SectionSpec(
        chart=gamma.chart,
        fields=(torsion_field(gamma), curvature_field(gamma)),
    )


def kirichenko_section_spec(chart: Chart,
                            tensors: tuple[TensorFieldSpec, ...],
                            algebra: LieAlgebra | None = None) -> SectionSpec:
    """A finite collection of tensor fields to be made simultaneously parallel."""
    return SectionSpec(chart=chart, fields=tuple(tensors), algebra=algebra)


def _frame_norm(t: DenseTensor, fr: OrthoFrame) -> float:
    return to_frame(t, fr).norm()


def _max_over_points(values: list[float]) -> float:
    return float(max(values)) if values else 0.0


def check_lh_triple(triple: TripleSpec, gamma: ConnectionCoeffs,
                    a: LocalConnectionForm, points: np.ndarray,
                    tol: float = DEFAULT_TOL, fixture: str = "",
                    ) -> VerificationReport:
    """Locally homogeneous triple criterion: del R, del T, (del x del^A)F,
    (del x del^A)(A - A0) all parallel."""
    points = np.atleast_2d(np.asarray(points, float))
    r_field = curvature_field(gamma)
    t_field = torsion_field(gamma)
    f_field = curvature_form_field(a)
    alpha = form_difference(a, triple.a0)
    dr = covariant_derivative_field(gamma, r_field)
    dt = covariant_derivative_field(gamma, t_field)
    df = assoc_covariant_field(a, gamma, f_field)
    dalpha = assoc_covariant_field(a, gamma, alpha)
    names = ("nabla_R", "nabla_T", "nabla_F", "nabla_alpha")
    fields = (dr, dt, df, dalpha)
    vals: dict[str, list[float]] = {n: [] for n in names}
    for x in points:
        fr = ortho_frame(triple.g, x)
        for name, fld in zip(names, fields):
            vals[name].append(_frame_norm(fld.at(x), fr))
    residuals = {n: _max_over_points(v) for n, v in vals.items()}
    tolerances = {n: tol for n in names}
    passed = all(residuals[n] < tolerances[n] for n in names)
    return VerificationReport(
        scenario="check-lh-triple",
        fixture=fixture,
        points=points,
        residuals=residuals,
        tolerances=tolerances,
        passed=passed,
    )


def check_ls_triple(triple: TripleSpec, points: np.ndarray,
                    tol: float = DEFAULT_TOL, fixture: str = "",
                    ) -> VerificationReport:
    """Locally symmetric triple criterion with the Levi-Civita connection."""
    points = np.atleast_2d(np.asarray(points, float))
    gamma = levi_civita(triple.g)
    dr = covariant_derivative_field(gamma, curvature_field(gamma))
    df = assoc_covariant_field(triple.a0, gamma, curvature_form_field(triple.a0))
    names = ("nabla_Rg", "nabla_F0")
    vals: dict[str, list[float]] = {n: [] for n in names}
    for x in points:
        fr = ortho_frame(triple.g, x)
        vals["nabla_Rg"].append(_frame_norm(dr.at(x), fr))
        vals["nabla_F0"].append(_frame_norm(df.at(x), fr))
    residuals = {n: _max_over_points(v) for n, v in vals.items()}
    tolerances = {n: tol for n in names}
    passed = all(residuals[n] < tolerances[n] for n in names)
    return VerificationReport(
        scenario="check-ls-triple",
        fixture=fixture,
        points=points,
        residuals=residuals,
        tolerances=tolerances,
        passed=passed,
    )


def equivalence_check_c_c0(gamma: ConnectionCoeffs, g: MetricField,
                           points: np.ndarray, tol: float = DEFAULT_TOL,
                           fixture: str = "") -> VerificationReport:
    """Two equivalent condition systems for a metric connection C vs C0.

    System one: del R^g = 0 and del (C - C0) = 0.  System two: del R^C = 0 and
    del T^C = 0.  Both use del = C; the report asserts their agreement."""
    points = np.atleast_2d(np.asarray(points, float))
    gamma0 = levi_civita(g)
    g_field = TensorFieldSpec(
        chart=g.chart,
        markers=(DOWN, DOWN),
        evaluator=lambda x: DenseTensor((DOWN, DOWN), g.at(x)),
        partial_evaluator=(
            None
            if g.partial_evaluator is None
            else lambda x, mu: DenseTensor((DOWN, DOWN), g.partial_at(x, mu))
        ),
    )
    dg_field = covariant_derivative_field(gamma, g_field)
    s_field = TensorFieldSpec(
        chart=g.chart,
        markers=(UP, DOWN, DOWN),
        evaluator=lambda x: DenseTensor((UP, DOWN, DOWN), gamma.at(x) - gamma0.at(x)),
    )
    dr_g = covariant_derivative_field(gamma, curvature_field(gamma0))
    ds = covariant_derivative_field(gamma, s_field)
    dr = covariant_derivative_field(gamma, curvature_field(gamma))
    dt = covariant_derivative_field(gamma, torsion_field(gamma))
    names = ("nabla_Rg", "nabla_S", "nabla_R", "nabla_T")
    fields = (dr_g, ds, dr, dt)
    vals: dict[str, list[float]] = {n: [] for n in names}
    for x in points:
        fr = ortho_frame(g, x)
        if _frame_norm(dg_field.at(x), fr) > 1e-7:
            raise NotMetric("connection is not metric-compatible at a sample point")
        for name, fld in zip(names, fields):
            vals[name].append(_frame_norm(fld.at(x), fr))
    residuals = {n: _max_over_points(v) for n, v in vals.items()}
    tolerances = {n: tol for n in names}
    system_one = residuals["nabla_Rg"] < tol and residuals["nabla_S"] < tol
    system_two = residuals["nabla_R"] < tol and residuals["nabla_T"] < tol
    agree = system_one == system_two
    flags = ["systems-agree" if agree else "systems-disagree"]
    flags.append("system-one-holds" if system_one else "system-one-fails")
    flags.append("system-two-holds" if system_two else "system-two-fails")
    return VerificationReport(
        scenario="equivalence-check",
        fixture=fixture,
        points=points,
        residuals=residuals,
        tolerances=tolerances,
        passed=agree,
        flags=tuple(flags),
    )
