"""Check registry and the end-to-end verification run."""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass

import numpy as np

from . import __version__, flows, kernels, pipeline as pl
from . import kernelcalc as kc
from . import localmodel as lm
from .exterior import KForm, VectorField, contract, coord, standard_symplectic, wedge
from .report import CheckRecord, VerificationReport


class BuildError(RuntimeError):
    pass


@dataclass(frozen=True)
class Check:
    id: str
    anchor: str
    fn: object
    needs: tuple = ()


REGISTRY: dict[str, Check] = {}
BUILDERS = {}


def check(check_id, anchor, needs=()):
    def deco(fn):
        REGISTRY[check_id] = Check(check_id, anchor, fn, tuple(needs))
        return fn
    return deco


def builder(name):
    def deco(fn):
        BUILDERS[name] = fn
        return fn
    return deco


class Context:
    def __init__(self, cfg):
        self.cfg = cfg
        self.params = cfg.model
        self.built = {}
        self.tables = {}

    def rng(self, key):
        return np.random.default_rng([self.cfg.run.seed, zlib.crc32(key.encode())])

    def need(self, name):
        if name not in self.built:
            try:
                self.built[name] = BUILDERS[name](self)
            except Exception as exc:  # recorded as the skip cause of dependent checks
                self.built[name] = exc
        val = self.built[name]
        if isinstance(val, Exception):
            raise BuildError(f"{name}: {type(val).__name__}: {val}")
        return val


def _result(status, margin=None, witness=None, **detail):
    return {"status": status, "margin": None if margin is None else float(margin), "witness": witness,
            "detail": detail}


def _verdict(ok):
    return "pass" if ok else "fail"


def _cols(P):
    return [P[:, k] for k in range(P.shape[1])]


# ------------------------------------------------------------------ builders


def example_form(params):
    """2 dx1∧dy1 + 3 dx2∧dy2 + x1/10 dx1∧dx2 on the product chart."""
    d = params.q + 2 * params.n
    x, y = (lambda i: pl.x_index(params, i)), (lambda i: pl.y_index(params, i))
    coeffs = {(x(0), y(0)): 2.0, (x(1), y(1)): 3.0, (x(0), x(1)): coord(x(0)) * 0.1}
    for i in range(2, params.n):
        coeffs[(x(i), y(i))] = 1.0
    return KForm(d, 2, coeffs)


@builder("normalization")
def _build_normalization(ctx):
    return pl.normalize_form(example_form(ctx.params), ctx.params, seed=ctx.cfg.run.seed)


@builder("forms")
def _build_forms(ctx):
    r = ctx.cfg.run
    return pl.build_two_forms(ctx.params, order=r.gamma_order, beta_mode=r.beta_mode, gamma_exact=r.gamma_exact)


@builder("forms_literal")
def _build_forms_literal(ctx):
    r = ctx.cfg.run
    other = "beta_alpha" if r.gamma_order == "alpha_beta" else "alpha_beta"
    return pl.build_two_forms(ctx.params, order=other, beta_mode=r.beta_mode, gamma_exact=r.gamma_exact)


# ------------------------------------------------------------------ exterior


@check("exterior.liouville", "Y = ½Σ(x∂x + y∂y) is Liouville: d(i_Y ω) = ω for every sign pattern")
def _liouville(ctx):
    worst, wit = 0.0, None
    for n in (2, 3):
        rng = ctx.rng(f"liouville{n}")
        P = rng.uniform(-1.0, 1.0, size=(ctx.cfg.grids.liouville_points, 2 * n))
        Y = VectorField([coord(k) * 0.5 for k in range(2 * n)])
        for mask in range(2**n):
            signs = [(-1) ** ((mask >> i) & 1) for i in range(n)]
            om = standard_symplectic(n, signs=signs)
            err = np.abs(contract(Y, om).d().matrix(_cols(P)) - om.matrix(_cols(P))).max()
            if err > worst or wit is None:
                worst, wit = float(err), {"n": n, "signs": signs}
    return _result(_verdict(worst <= 1e-12), worst, wit)


@check("exterior.identities", "d∘d = 0, graded commutativity, (Σdx∧dy)^2 = 2 vol")
def _identities(ctx):
    rng = ctx.rng("identities")
    P = rng.uniform(-1.0, 1.0, size=(100, 4))
    f = coord(0) * coord(0) * coord(3)
    dd = KForm.scalar(4, f).d().d()
    e1 = max((float(np.max(np.abs(np.asarray(c(_cols(P)))))) for c in dd.coeffs.values()), default=0.0)
    om = standard_symplectic(2)
    vol = wedge(om, om)
    e2 = abs(float(vol.coeffs[(0, 1, 2, 3)](_cols(P[:1]))) - 2.0) if (0, 1, 2, 3) in vol.coeffs else 1.0
    a = KForm(4, 1, {(0,): coord(1), (2,): coord(3) * 2.0})
    aa = wedge(a, a)
    e3 = 0.0 if not aa.coeffs else max(float(np.max(np.abs(c(_cols(P))))) for c in aa.coeffs.values())
    worst = max(e1, e2, e3)
    return _result(_verdict(worst <= 1e-12), worst, None, d_squared=e1, volume=e2, odd_square=e3)


# ------------------------------------------------------------------ normalization


def _product_ball(rng, params, npts, r_z, r_x, r_min=0.0):
    q, n2 = params.q, 2 * params.n

    def ball(dim, rad):
        v = rng.normal(size=(npts, dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * (rad * rng.uniform(r_min / rad if rad else 0.0, 1.0, npts) ** (1.0 / dim))[:, None]

    return np.concatenate([ball(q, r_z), ball(n2, r_x)], axis=1)


@check("normalize.eps_box", "on the ε-box ω_1 = 0 ⊕ Σ±dx_i∧dy_i exactly", needs=("normalization",))
def _norm_eps(ctx):
    p = ctx.params
    N = ctx.need("normalization")
    P = _product_ball(ctx.rng("eps_box"), p, ctx.cfg.grids.normalize_points, p.eps, p.eps)
    P[0] = 0.0
    d = p.q + 2 * p.n
    target = standard_symplectic(p.n, offset=p.q, dim=d, signs=N.signs).matrix(_cols(P))
    got = N.omega1.matrix(_cols(P))
    diff = np.abs(got - target)
    k = int(np.argmax(diff.reshape(len(P), -1).max(axis=1)))
    exact = bool(np.array_equal(got, target))
    return _result(_verdict(exact), float(diff.max()), None if exact else P[k].tolist(), signs=list(N.signs))


@check("normalize.outside", "outside the ε_1-box ω_1 = ω_0 exactly", needs=("normalization",))
def _norm_out(ctx):
    p = ctx.params
    N = ctx.need("normalization")
    rng = ctx.rng("outside")
    n = ctx.cfg.grids.normalize_points
    half = n // 2
    A = _product_ball(rng, p, half, 1.0, 1.0, r_min=0.0)
    A[:, : p.q] = _product_ball(rng, p, half, 1.0, 1.0, r_min=p.eps1 * 1.0001)[:, : p.q]
    B = _product_ball(rng, p, n - half, 1.0, 1.0)
    B[:, p.q:] = _product_ball(rng, p, n - half, 1.0, 1.0, r_min=p.eps1 * 1.0001)[:, p.q:]
    P = np.concatenate([A, B])
    got, want = N.omega1.matrix(_cols(P)), N.omega0.matrix(_cols(P))
    exact = bool(np.array_equal(got, want))
    diff = np.abs(got - want)
    k = int(np.argmax(diff.reshape(len(P), -1).max(axis=1)))
    return _result(_verdict(exact), float(diff.max()), None if exact else P[k].tolist())


@check("normalize.homotopy", "(ω_t)^n stays positive on the leaves along the homotopy", needs=("normalization",))
def _norm_homotopy(ctx):
    p = ctx.params
    N = ctx.need("normalization")
    g = ctx.cfg.grids
    P = _product_ball(ctx.rng("homotopy"), p, g.homotopy_points, 0.999, 0.999)
    P[0] = 0.0
    worst, wit, per_t = math.inf, None, []
    for t in np.linspace(0.0, 1.0, g.homotopy_samples):
        pf = N.orientation * pl.leaf_pfaffian_f0(N.homotopy(float(t)), p, _cols(P))
        k = int(np.argmin(pf))
        per_t.append(float(pf[k]))
        if pf[k] < worst:
            worst, wit = float(pf[k]), {"t": float(t), "point": P[k].tolist()}
    return _result(_verdict(worst > 0.0), worst, wit if worst <= 0 else None, min_per_sample=per_t)


# ------------------------------------------------------------------ plateau exactness


def _model_points(ctx, key, npts, **kw):
    return pl.model_points(ctx.params, ctx.rng(key), npts, **kw)


@check("build.plateau_dalpha", "where psi = 0 the form ω''_1 equals dα exactly", needs=("forms",))
def _plateau(ctx):
    p = ctx.params
    F = ctx.need("forms")
    P = _model_points(ctx, "plateau", ctx.cfg.grids.membership_points, r_lo=p.delta_bar)
    psi = np.asarray(lm.psi_on_model(p, "rho")(_cols(P)), dtype=float) * np.ones(len(P))
    P = P[psi == 0.0]
    got, want = F.omega1pp.matrix(_cols(P)), F.d_alpha.matrix(_cols(P))
    exact = bool(np.array_equal(got, want))
    return _result(_verdict(exact), float(np.abs(got - want).max()), None, points=int(len(P)))


@check("build.gamma_outside", "for |z| >= delta_bar the form γ equals ω''_1 exactly", needs=("forms",))
def _gamma_outside(ctx):
    p = ctx.params
    F = ctx.need("forms")
    P = _model_points(ctx, "gamma_outside", ctx.cfg.grids.membership_points, r_lo=p.delta_bar)
    # include points on the support boundary itself
    P[:50, p.z_index] = flows_unit(ctx.rng("bd"), 50, 2 * p.n) * p.delta_bar
    got, want = F.gamma.matrix(_cols(P)), F.omega1pp_tilde.matrix(_cols(P))
    exact = bool(np.array_equal(got, want))
    # away from the repair shell the rho- and rho_tilde-built forms agree as well
    far = np.linalg.norm(P[:, p.z_index], axis=1) >= p.delta
    Pf = P[far]
    same = bool(np.array_equal(F.omega1pp.matrix(_cols(Pf)), F.omega1pp_tilde.matrix(_cols(Pf))))
    diff = float(np.abs(got - want).max())
    return _result(_verdict(exact and same), diff, None, rho_regime_identical=same, points=int(len(P)))


def flows_unit(rng, npts, dim):
    v = rng.normal(size=(npts, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@check("build.gamma_minus_dalpha_rank", "γ - dα is decomposable (rank <= 2)", needs=("forms",))
def _rank(ctx):
    p = ctx.params
    F = ctx.need("forms")
    P = _model_points(ctx, "rank", 500, include_origin=True)
    M = F.gamma.matrix(_cols(P)) - F.d_alpha.matrix(_cols(P))
    sv = np.linalg.svd(M, compute_uv=False)
    third = float(np.max(sv[:, 2] / np.maximum(sv[:, 0], 1e-300)))
    return _result(_verdict(third <= 1e-12), third, None)


# ------------------------------------------------------------------ membership


def _ray_points(ctx, key, r_lo, r_hi):
    """Model-chart rays in the fiber with random base points; shape (R, S, N)."""
    p, g = ctx.params, ctx.cfg.grids
    rng = ctx.rng(key)
    base = pl.model_points(p, rng, g.rays)
    u = flows_unit(rng, g.rays, 2 * p.n)
    r = np.linspace(r_lo, r_hi, g.ray_samples)
    R = np.repeat(base[:, None, :], g.ray_samples, axis=1)
    R[:, :, p.z_index[0]:] = u[:, None, :] * r[None, :, None]
    return R


def _sweep(fn, P, rays):
    """Min |fn| over points and rays, bisecting sign changes along the rays."""
    vals = fn(P)
    R, S, N = rays.shape
    rv = fn(rays.reshape(-1, N)).reshape(R, S)
    zmag, zpts = pl.bisect_sign_changes(fn, rays, rv)
    allv = np.concatenate([vals, rv.ravel()])
    allp = np.concatenate([P, rays.reshape(-1, N)])
    k = int(np.argmin(np.abs(allv)))
    margin, wit = float(abs(allv[k])), allp[k].tolist()
    if zmag.size and zmag.min() < margin:
        j = int(np.argmin(zmag))
        margin, wit = float(zmag[j]), zpts[j].tolist()
    both = bool((allv > 0).any() and (allv < 0).any())
    return margin, wit, both, int(zmag.size), float(np.mean(allv > 0))


@check("membership.f0", "(F_0, 0 ⊕ Σdx_i∧dy_i) lies in Δ_q")
def _mem_f0(ctx):
    p = ctx.params
    pair = pl.pair_f0(p)
    P = _product_ball(ctx.rng("f0"), p, ctx.cfg.grids.membership_points, 0.999, 0.999)
    r = pl.membership_delta_q(pair, P)
    return _result(_verdict(abs(r.margin - 1.0) <= 1e-12), r.margin, None)


def _membership(ctx, pair, P, rays, tol):
    fn = lambda X: pl.leaf_pfaffians(pair, X)  # noqa: E731
    margin, wit, both, nzero, frac = _sweep(fn, P, rays)
    ok = margin > tol and not both
    return margin, wit, ok, {"sign_changes": nzero, "fraction_positive": frac, "both_signs": both}


@check("membership.f1pp", "(F''_1, ω''_1) lies in Δ_q away from z = 0", needs=("forms",))
def _mem_f1pp(ctx):
    p = ctx.params
    F = ctx.need("forms")
    P = _model_points(ctx, "f1pp", ctx.cfg.grids.membership_points, r_lo=p.delta_bar)
    rays = _ray_points(ctx, "f1pp_rays", p.delta_bar, 0.999)
    margin, wit, ok, det = _membership(ctx, pl.pair_f1pp(p, F), P, rays, ctx.cfg.run.margin_tol)
    return _result(_verdict(ok), margin, None if ok else wit, **det)


@check("membership.gamma", "(G, γ) lies in Δ_q on the whole model chart, z = 0 included", needs=("forms",))
def _mem_gamma(ctx):
    p = ctx.params
    F = ctx.need("forms")
    tol = ctx.cfg.run.margin_tol
    P = _model_points(ctx, "gamma", ctx.cfg.grids.membership_points, include_origin=True)
    rays = _ray_points(ctx, "gamma_rays", 0.0, 2.0 * p.delta)
    margin, wit, ok, det = _membership(ctx, pl.pair_gamma(p, F), P, rays, tol)
    origin = kc.nondegeneracy_near_origin(p, np.zeros((1, 2 * p.n)), tol=tol) if p.n == 2 else None
    if origin is not None:
        det["origin_margin"] = origin.margin
        if origin.margin < margin:
            margin, wit = origin.margin, [0.0] * p.dim
        ok = ok and origin.passed
    if not ok and wit is not None:
        det["witness_radius"] = float(np.linalg.norm(np.asarray(wit)[p.z_index]))
    return _result(_verdict(ok), margin, None if ok else wit, **det)


@check("membership.gamma_inner", "(G, γ) on the delta/2-ball where rho_tilde = rho_bar", needs=("forms",))
def _mem_gamma_inner(ctx):
    p = ctx.params
    F = ctx.need("forms")
    P = _model_points(ctx, "gamma_inner", ctx.cfg.grids.membership_points, r_hi=p.delta / 2.0,
                      include_origin=True)
    rays = _ray_points(ctx, "gamma_inner_rays", 0.0, p.delta / 2.0)
    margin, wit, ok, det = _membership(ctx, pl.pair_gamma(p, F), P, rays, ctx.cfg.run.margin_tol)
    return _result(_verdict(ok), margin, None if ok else wit, **det)


@check("membership.gamma_literal_order", "sensitivity: the other wedge order β∧α̃ / α̃∧β",
       needs=("forms_literal",))
def _mem_literal(ctx):
    p = ctx.params
    F = ctx.need("forms_literal")
    P = _model_points(ctx, "literal", ctx.cfg.grids.membership_points, r_lo=p.delta_bar)
    rays = _ray_points(ctx, "literal_rays", p.delta_bar, 0.999)
    margin, wit, ok, det = _membership(ctx, pl.pair_f1pp(p, F), P, rays, ctx.cfg.run.margin_tol)
    return _result("informational", margin, wit, order=F.order, nondegenerate=ok, **det)


# ------------------------------------------------------------------ kernel calculation


def _random_instances(rng, n, min_D=0.1):
    z = rng.uniform(-1, 1, (n, 4))
    zb = rng.uniform(-1, 1, (n, 4))
    K = rng.uniform(0.0, 5.0, n)
    R = rng.uniform(-1, 1, n)
    h = kc.HyperplaneData(z, zb, K, R)
    keep = np.abs(h.D) > min_D
    return kc.HyperplaneData(z[keep], zb[keep], K[keep], R[keep])


def _instances(ctx, key, n):
    rng = ctx.rng(key)
    parts, have = [], 0
    while have < n:
        h = _random_instances(rng, n)
        parts.append(h)
        have += len(h.R)
    cat = lambda a: np.concatenate(a)[:n]  # noqa: E731
    return kc.HyperplaneData(cat([h.z for h in parts]), cat([h.zbar for h in parts]),
                             cat([h.K for h in parts]), cat([h.R for h in parts])), rng


@check("kernel.closed_form", "closed forms for a_2, b_2 on H_1 ∩ Ker α agree with a linear solve")
def _closed_form(ctx):
    h, rng = _instances(ctx, "closed", ctx.cfg.grids.kernel_instances)
    a1, b1 = rng.normal(size=(2, len(h.R)))
    s = kc.solve_closed_form(h, a1, b1)
    na, nb = kc.solve_numeric(h, a1, b1)
    rel = np.maximum(np.abs(s.a2 - na) / np.maximum(np.abs(na), 1e-300),
                     np.abs(s.b2 - nb) / np.maximum(np.abs(nb), 1e-300))
    rel = np.where((np.abs(na) < 1e-300) & (np.abs(nb) < 1e-300), 0.0, rel)
    res = float(max(np.abs(s.residual_h1).max(), np.abs(s.residual_ker).max()))
    k = int(np.argmax(rel))
    ok = rel[k] <= 1e-9 and res <= 1e-10
    return _result(_verdict(ok), float(rel[k]), None if ok else h.z[k].tolist(), max_residual=res,
                   instances=int(len(h.R)))


@check("kernel.pairing_display", "displayed formula for a_2 b_2' - a_2' b_2 vs recomputation")
def _pairing_display(ctx):
    h, rng = _instances(ctx, "display", ctx.cfg.grids.kernel_instances)
    u = tuple(rng.normal(size=(2, len(h.R))))
    v = tuple(rng.normal(size=(2, len(h.R))))
    c = kc.check_pairing_display(h, u, v)
    # with zbar = z only
    hz = kc.HyperplaneData(h.z, h.z, h.K, h.R)
    keep = np.abs(hz.D) > 0.1
    hz = kc.HyperplaneData(h.z[keep], h.z[keep], h.K[keep], h.R[keep])
    cz = kc.check_pairing_display(hz, tuple(x[keep] for x in u), tuple(x[keep] for x in v))
    return _result("informational", c.max_rel_discrepancy, c.witness, discrepant=c.discrepant,
                   discrepant_unbarred=cz.discrepant, max_rel_unbarred=cz.max_rel_discrepancy)


def _locus_points(rng, n, zero):
    z = rng.uniform(-1, 1, (n, 4))
    z[:, [0, 1, zero]] = 0.0
    other = 3 if zero == 2 else 2
    small = np.abs(z[:, other]) < 0.05
    z[small, other] = np.copysign(0.05, z[small, other] + 1e-300) + z[small, other]
    return z


def _well_posed(z, K, R, n):
    """First n instances with frozen coefficients equal to z and |D| > 0.1."""
    keep = np.flatnonzero(np.abs(kc.HyperplaneData(z, z, K, R).D) > 0.1)[:n]
    if len(keep) < n:
        raise ValueError(f"only {len(keep)} well-posed instances out of {len(z)}")
    return kc.HyperplaneData(z[keep], z[keep], K[keep], R[keep])


@check("kernel.loci", "the pairing vanishes on {x1 = y1 = x2 = 0} and {x1 = y1 = y2 = 0}")
def _loci(ctx):
    rng = ctx.rng("loci")
    n = ctx.cfg.grids.loci_points
    worst, wit = 0.0, None
    for zero in (2, 3):
        h = _well_posed(_locus_points(rng, 4 * n, zero), rng.uniform(0.0, 5.0, 4 * n), rng.uniform(-1, 1, 4 * n), n)
        u = tuple(rng.normal(size=(2, n)))
        v = tuple(rng.normal(size=(2, n)))
        val = np.abs(kc.pairing_recomputed(h, u, v))
        k = int(np.argmax(val))
        if val[k] >= worst:
            worst, wit = float(val[k]), h.z[k].tolist()
    hg, rg = _instances(ctx, "generic", 4 * n)
    hg = _well_posed(hg.z, hg.K, hg.R, n)
    u = tuple(rg.normal(size=(2, n)))
    v = tuple(rg.normal(size=(2, n)))
    gen = np.abs(kc.pairing_recomputed(hg, u, v))
    gmin = float(gen.min())
    ok = worst <= 1e-12 and gmin >= 1e-6
    return _result(_verdict(ok), worst, None if ok else wit, generic_min=gmin, generic_points=int(len(gen)))


@check("kernel.antisymmetry", "dα on solved kernel vectors is antisymmetric")
def _antisym(ctx):
    h, rng = _instances(ctx, "antisym", 1000)
    u = tuple(rng.normal(size=(2, len(h.R))))
    v = tuple(rng.normal(size=(2, len(h.R))))
    e = np.abs(kc.full_pairing(h, u, v) + kc.full_pairing(h, v, u)).max()
    same = np.abs(kc.full_pairing(h, u, u)).max()
    worst = float(max(e, same))
    return _result(_verdict(worst <= 1e-12), worst, None)


@check("kernel.origin", "dα is nondegenerate on H_1 ∩ Ker α_tilde over the delta-ball")
def _origin(ctx):
    p = ctx.params
    if p.n != 2:
        return _result("skipped", None, None, cause="implemented for n = 2")
    Z = kc._ball(ctx.rng("origin"), ctx.cfg.grids.transversality_points, p.delta)
    Z[0] = 0.0
    r = kc.nondegeneracy_near_origin(p, Z, tol=ctx.cfg.run.margin_tol)
    return _result(_verdict(r.passed), r.margin, None if r.passed else r.witness,
                   origin_margin=float(r.margins[0]), particular_residual=r.particular_residual)


@check("kernel.origin_control", "without the perturbation H_1 ∩ Ker α degenerates at z = 0")
def _origin_control(ctx):
    p = ctx.params
    if p.n != 2:
        return _result("skipped", None, None, cause="implemented for n = 2")
    r = kc.nondegeneracy_near_origin(p, np.zeros((1, 4)), perturbed=False)
    ok = r.margin <= ctx.cfg.run.control_tol
    return _result(_verdict(ok), r.margin, None if ok else r.witness, null_dim=int(r.null_dims[0]))


@check("kernel.perturbation", "Y_tilde stays transverse to H_1 where the perturbation is supported")
def _perturbation(ctx):
    p = ctx.params
    if p.n != 2:
        return _result("skipped", None, None, cause="implemented for n = 2")
    try:
        gap = kc.check_perturbation(p, ctx.cfg.grids.transversality_points, seed=ctx.cfg.run.seed)
    except kc.PerturbationError as exc:
        return _result("fail", 0.0, str(exc))
    return _result("pass", gap, None)


# ------------------------------------------------------------------ flows


@check("flows.exit_event", "constant field ∂_s from s = 0 leaves the unit plug at time 1")
def _exit(ctx):
    tr = flows.integrate(flows.constant_field([0.0, 0.0, 0.0, 1.0]), np.zeros(4), 5.0,
                         exit=flows.ExitEvent(3, -1.0, 1.0))
    err = abs(tr.exit_time - 1.0)
    return _result(_verdict(err <= 1e-8), err, None)


@check("flows.core_invariants", "on the core set psi = 1 the X_1 flow keeps t and s fixed")
def _core(ctx):
    p = ctx.params
    y0 = np.zeros(p.m + 3)
    y0[-1] = 0.5
    tr = flows.integrate(flows.plug_field(p), y0, 100.0, tol=ctx.cfg.flows.tol)
    drift = float(np.abs(tr.points[:, 2:] - y0[2:]).max())
    return _result(_verdict(drift <= 1e-8), drift, None)


@check("flows.rotation", "the torus flow has rotation number c")
def _rotation(ctx):
    f = ctx.cfg.flows
    c = ctx.params.c
    tr = flows.integrate(flows.torus_field(c, f.reparam_amp), np.zeros(2), f.horizon, tol=f.tol, h_max=f.h_max)
    est = flows.rotation_number(tr)
    err = abs(est.value - c)
    ctx.tables["trajectory"] = (["t", "a", "b"],
                                [(float(t), float(a), float(b)) for t, (a, b) in
                                 zip(tr.times[::50], tr.points[::50])])
    return _result(_verdict(err <= 1e-3), err, None, estimate=est.value, error_bound=est.error_bound,
                   windings=est.windings, steps=tr.n_steps)


def _scan(ctx, c, key):
    f = ctx.cfg.flows
    seeds = flows.torus_seeds(f.seeds, seed=zlib.crc32(key.encode()) + ctx.cfg.run.seed)
    return flows.closed_orbit_scan(flows.torus_field(c), seeds, f.horizon, f.closure_tol, tol=f.tol, h_max=f.h_max)


@check("flows.closed_orbits", "no closed orbit of the irrational torus flow")
def _closed(ctx):
    s = _scan(ctx, ctx.params.c, "irr")
    n = s.count("suspected-closed")
    ctx.tables["orbit_scan"] = (["seed", "min_return", "classification"],
                                [(i, float(v.min_return), v.classification) for i, v in enumerate(s.verdicts)])
    k = int(np.argmin(s.min_return))
    return _result(_verdict(n == 0), s.closest, None if n == 0 else {"seed": k}, suspected_closed=n)


@check("flows.rational_control", "control: a rational slope gives closed orbits")
def _rational(ctx):
    s = _scan(ctx, ctx.cfg.flows.rational_c, "rat")
    n = s.count("suspected-closed")
    periods = [v.return_time for v in s.verdicts if v.classification == "suspected-closed"][:5]
    return _result(_verdict(n > 0), s.closest, None if n > 0 else "no closed orbit found",
                   suspected_closed=n, periods=periods)


@check("flows.leaf_curve", "lifted X_1 curves project onto X_1 curves through rho_tilde")
def _leaf_curve(ctx):
    p = ctx.params
    f = ctx.cfg.flows
    rng = ctx.rng("leaf")
    worst, wit, monotone = 0.0, None, True
    starts = [flows.core_fiber_point(p)]
    for _ in range(3):
        q = pl.model_points(p, rng, 1, r_lo=0.3, r_hi=0.95)[0]
        starts.append(q)
    for q in starts:
        lc = flows.trace_leaf_curve(p, q, f.leaf_horizon, checkpoints=100)
        if lc.consistency > worst:
            worst, wit = lc.consistency, q.tolist()
        if np.all(lc.lift[:, p.z_index] == lc.lift[0, p.z_index]):
            continue
        monotone &= bool(np.all(np.diff(lc.s_along) >= 0.0))
    ok = worst <= 1e-6 and monotone
    return _result(_verdict(ok), worst, None if ok else wit, s_monotone=monotone)


@check("flows.leaf_closure", "the leaf curve over the core set never closes up")
def _leaf_closure(ctx):
    p = ctx.params
    f = ctx.cfg.flows
    lift = flows.leaf_lift_field(p)
    q = flows.core_fiber_point(p)
    s = flows.closed_orbit_scan(lift, q[None], f.horizon, f.closure_tol, tol=f.tol, h_max=f.h_max)
    ok = s.count("suspected-closed") == 0
    return _result(_verdict(ok), s.closest, None if ok else q.tolist())


@check("flows.integrator_order", "Dormand-Prince local order: halving the step shrinks the error >= 16x")
def _order(ctx):
    f = ctx.cfg.flows
    fld = flows.torus_field(ctx.params.c, f.reparam_amp)

    def end(h):
        tr = flows.integrate(fld, np.zeros(2), f.order_horizon, h0=h, h_max=h, fixed=True,
                             max_steps=int(f.order_horizon / h) + 10)
        return tr.end

    ref = end(f.order_h / 64)
    e1 = float(np.abs(end(f.order_h) - ref).max())
    e2 = float(np.abs(end(f.order_h / 2) - ref).max())
    factor = e1 / e2 if e2 > 0 else math.inf
    return _result(_verdict(factor >= 16.0), factor, None, err_h=e1, err_half=e2)


# ------------------------------------------------------------------ transversality


@check("transversality.rho_identity", "dρ(Y) = -1/(2|z|) away from z = 0")
def _rho_identity(ctx):
    p = ctx.params
    Z = kc._ball(ctx.rng("rhoY"), ctx.cfg.grids.transversality_points, 1.0, dim=2 * p.n)
    Z = Z[np.linalg.norm(Z, axis=1) > 1e-3]
    r = np.linalg.norm(Z, axis=1)
    err = np.abs(flows.d_rho_of_Y(Z) + 0.5 / r) * r   # relative to the size of the value
    k = int(np.argmax(err))
    return _result(_verdict(err[k] <= 1e-12), float(err[k]), None if err[k] <= 1e-12 else Z[k].tolist())


def _functional_rays(ctx, key, r_hi):
    p, g = ctx.params, ctx.cfg.grids
    rng = ctx.rng(key)
    u = flows_unit(rng, g.rays, 2 * p.n)
    r = np.linspace(0.0, r_hi, g.ray_samples)[1:]
    return u[:, None, :] * r[None, :, None]


def _ytilde_sweep(ctx, key, r_hi):
    p = ctx.params
    Z = kc._ball(ctx.rng(key), ctx.cfg.grids.transversality_points, r_hi)
    Z = Z[np.linalg.norm(Z, axis=1) > 0]
    fn = lambda X: kc.transversality_functional(p, X)  # noqa: E731
    return _sweep(fn, Z, _functional_rays(ctx, key + "_rays", r_hi))


@check("transversality.y_tilde", "Y_tilde ∉ H_1 on the whole delta-ball")
def _ytilde(ctx):
    if ctx.params.n != 2:
        return _result("skipped", None, None, cause="implemented for n = 2")
    margin, wit, both, nz, frac = _ytilde_sweep(ctx, "ytilde", ctx.params.delta)
    ok = margin > ctx.cfg.run.margin_tol and not both
    det = {"sign_changes": nz, "fraction_positive": frac}
    if not ok:
        det["witness_radius"] = float(np.linalg.norm(wit))
    return _result(_verdict(ok), margin, None if ok else wit, **det)


@check("transversality.y_tilde_inner", "Y_tilde ∉ H_1 on the delta/2-ball")
def _ytilde_inner(ctx):
    if ctx.params.n != 2:
        return _result("skipped", None, None, cause="implemented for n = 2")
    margin, wit, both, nz, frac = _ytilde_sweep(ctx, "ytilde_inner", ctx.params.delta / 2.0)
    ok = margin > ctx.cfg.run.margin_tol and not both
    return _result(_verdict(ok), margin, None if ok else wit, sign_changes=nz)


@check("transversality.sign_region", "claim under test: dρ_tilde(Y) < 0 off z = 0")
def _sign_region(ctx):
    p = ctx.params
    rng = ctx.rng("signmap")
    n = ctx.cfg.grids.sign_map_points
    Z = kc._ball(rng, n // 2, p.delta, dim=2 * p.n)
    Z = np.concatenate([Z, kc._ball(rng, n - n // 2, 1.0, dim=2 * p.n)])
    diag = np.linspace(0.0, p.delta, 41)[1:, None] * np.ones((1, 2 * p.n)) / math.sqrt(2 * p.n)
    Z = np.concatenate([diag, Z[np.linalg.norm(Z, axis=1) > 0]])
    m = flows.sign_region_map(p, Z)
    ctx.tables["sign_region"] = (
        [f"z{i + 1}" for i in range(2 * p.n)] + ["d_rho_tilde_Y", "sign"],
        [tuple(float(v) for v in z) + (float(val), int(np.sign(val))) for z, val in zip(m.points, m.values)])
    pos = m.points[m.positive]
    r_pos = np.linalg.norm(pos, axis=1) if len(pos) else np.zeros(0)
    note = ("claim fails on this region as computed" if m.diagonal_positive or len(pos)
            else "no positive region found")
    return _result("informational", m.fraction_positive, pos[0].tolist() if len(pos) else None,
                   note=note, diagonal_ray_positive=m.diagonal_positive,
                   predicted_diagonal_radius=m.diagonal_prediction,
                   max_positive_radius=float(r_pos.max()) if r_pos.size else 0.0)


# ------------------------------------------------------------------ run


def check_ids():
    return list(REGISTRY)


def run_verify(cfg, progress=None):
    kernels.set_threads(cfg.run.threads or kernels.default_threads())
    ctx = Context(cfg)
    records = []
    build_failed = False
    for cid in cfg.selected(REGISTRY):
        chk = REGISTRY[cid]
        t0 = time.perf_counter()
        try:
            out = chk.fn(ctx)
        except BuildError as exc:
            build_failed = True
            out = _result("skipped", None, str(exc), cause=str(exc))
        rec = CheckRecord(cid, chk.anchor, out["status"], out["margin"], out["witness"], out["detail"],
                          time.perf_counter() - t0)
        if rec.status in ("fail", "skipped") and rec.witness is None:
            rec.witness = rec.detail.get("cause", "see detail")
        records.append(rec)
        if progress:
            progress(rec)
    rep = VerificationReport(__version__, kernels.backend(), cfg.as_dict(), records, ctx.tables)
    rep.build_failed = build_failed
    return rep
