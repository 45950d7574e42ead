"""Boundary-only training: loss assembly, Adam, and the fit loop.

One epoch rebuilds the tape from scratch: parameters are registered as
leaves, every potential is evaluated on the full training batch (plus the
quadrature-scaled points for Helmholtz), residuals are assembled per
boundary-condition group, and the mean of the weighted squared residuals
is backpropagated. Optionally the schedule switches once to a
residual-adapted batch drawn from a fine boundary pool.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import cdiff as cd
from . import geometry as geo
from . import representations as rep
from .errors import ContractViolationError, DivergedEvaluationError, DivergenceError
from .laurent import LaurentPotential
from .nets import norm_stats_of

_SCALAR_KINDS = ("laplace", "biharmonic", "helmholtz")


# ---------------------------------------------------------------------------
# Configuration and records
# ---------------------------------------------------------------------------


@dataclass
class RadConfig:
    switch_epoch: int
    pool_size: int = 10_000
    k: float = 1.0
    c: float = 1.0
    # resumption policy: restarting the moments plus a short step-size ramp
    # keeps the monomial cascade from overflowing at aggressive step sizes
    reset_optimizer: bool = True
    warmup_epochs: int = 50

    def __post_init__(self):
        if self.switch_epoch < 1 or self.pool_size < 1:
            raise ValueError("invalid adaptive-resampling schedule")
        if self.warmup_epochs < 1:
            raise ValueError("warmup must last at least one epoch")


@dataclass
class TrainConfig:
    epochs: int
    lr: float
    n_boundary: int
    seed: int = 0
    test_fraction: float = 0.2
    lr_decay: float = 1.0
    lr_decay_start: int = 0  # first epoch after which the decay factor applies
    rad: Optional[RadConfig] = None
    threads: int = 1
    test_every: int = 10
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("need at least one epoch")
        if not (self.lr > 0):
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.test_fraction <= 0.5):
            raise ValueError("test fraction must lie in [0, 0.5]")
        if self.n_boundary < 1:
            raise ValueError("need at least one boundary point")
        if self.threads < 1:
            raise ValueError("thread count must be at least 1")


@dataclass
class LossRecord:
    epoch: int
    train_loss: float
    test_loss: Optional[float]
    seconds: float


# ---------------------------------------------------------------------------
# Adam over the real view of complex parameters
# ---------------------------------------------------------------------------


class AdamState:
    """First/second moments per real coordinate (Re, Im interleaved)."""

    def __init__(self, arrays, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(2 * a.size) for a in arrays]
        self.v = [np.zeros(2 * a.size) for a in arrays]


def adam_step(state, arrays, grads, lr):
    """Bias-corrected update in place; g = dL/dx + i dL/dy per parameter."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        gv = np.ascontiguousarray(g).view(np.float64).ravel()
        m *= b1
        m += (1.0 - b1) * gv
        v *= b2
        v += (1.0 - b2) * gv * gv
        av = a.view(np.float64).reshape(-1)
        av -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------------------
# Batch context: sorted samples, BC groups, Helmholtz quadrature data
# ---------------------------------------------------------------------------


class BatchContext:
    def __init__(self, prob, batch, bcs):
        order = np.argsort(batch.curve_id, kind="stable")
        batch = batch.take(order)
        self.batch = batch
        self.groups = []
        ids = batch.curve_id
        starts = np.flatnonzero(np.concatenate([[True], ids[1:] != ids[:-1]]))
        ends = np.concatenate([starts[1:], [len(ids)]])
        for lo, hi in zip(starts, ends):
            cid = int(ids[lo])
            if cid not in bcs:
                raise ContractViolationError(f"no boundary condition for curve {cid}")
            bc = bcs[cid]
            _check_bc_kind(prob, bc)
            gv = np.asarray(bc.g(batch.z[lo:hi]))
            self.groups.append((bc, int(lo), int(hi), gv))
        self.order = _jet_order(prob, bcs)
        self.helm = None
        if prob.kind == "helmholtz":
            pts, coeffs, dz_rows = rep.vekua_points(
                batch.z, prob.beta, prob.quad, prob.center
            )
            grad_coeffs = None
            if self.order == 2:
                grad_coeffs = rep.vekua_grad_coeffs(
                    batch.z, prob.beta, prob.quad, prob.center
                )
            self.helm = (pts, coeffs, dz_rows, grad_coeffs)

    def __len__(self):
        return len(self.batch)

    @property
    def n_residual_dims(self):
        return max(bc.dim for bc, *_ in self.groups)


def _check_bc_kind(prob, bc):
    scalar = prob.kind in _SCALAR_KINDS
    if scalar and bc.dim != 1:
        raise ContractViolationError(
            f"{bc.kind} data is 2-dimensional but {prob.kind} is scalar"
        )
    if not scalar and bc.dim != 2:
        raise ContractViolationError(
            f"{bc.kind} data is scalar but {prob.kind} needs 2 components"
        )


def _jet_order(prob, bcs):
    if prob.kind == "elasticity":
        return 2
    if any(bc.kind == "neumann" for bc in bcs.values()):
        return 2
    return 0


# ---------------------------------------------------------------------------
# Field evaluation and residual assembly on the tape
# ---------------------------------------------------------------------------


def evaluate_fields(tape, prob, bounds, ctx):
    """Fields of the represented solution on the context batch."""
    z = ctx.batch.z
    order = ctx.order
    part = prob.particular
    if prob.kind == "laplace":
        phi = bounds[0].at(z, order)
        u = rep.laplace_field(phi)
        fields = {"u": u}
        if order == 2:
            fields["gradx"] = cd.re(phi.d1)
            fields["grady"] = -1.0 * cd.im(phi.d1)
    elif prob.kind == "biharmonic":
        p1 = bounds[0].at(z, order)
        p2 = bounds[1].at(z, order)
        fields = {"u": rep.biharmonic_field(p1, p2, z)}
        if order == 2:
            zbar = np.conj(z)
            c = p1.d1 * zbar + p2.d1
            fields["gradx"] = cd.re(c) + cd.re(p1.v)
            fields["grady"] = -1.0 * cd.im(c) + cd.im(p1.v)
    elif prob.kind == "elasticity":
        p1 = bounds[0].at(z, 2)
        p2 = bounds[1].at(z, 2)
        fields = rep.elasticity_fields(p1, p2, z, prob)
    elif prob.kind == "helmholtz":
        pts, coeffs, dz_rows, grad_coeffs = ctx.helm
        nrows, n = pts.shape
        phi = bounds[0].at(pts.ravel(), order, dz=dz_rows.ravel())
        if order == 0:
            mat = cd.reshape(cd.re(phi), (nrows, n))
            u = cd.reshape(cd.sum_along(mat * coeffs, axis=0), (n,))
            fields = {"u": u}
        else:
            vmat = cd.reshape(cd.re(phi.v), (nrows, n))
            dmat = cd.reshape(phi.d1, (nrows, n))
            u = cd.reshape(cd.sum_along(vmat * coeffs, axis=0), (n,))
            dxc, dyc = grad_coeffs
            gx = cd.sum_along(cd.re(dmat) * coeffs + vmat * dxc, axis=0)
            gy = cd.sum_along(-1.0 * cd.im(dmat) * coeffs + vmat * dyc, axis=0)
            fields = {
                "u": u,
                "gradx": cd.reshape(gx, (n,)),
                "grady": cd.reshape(gy, (n,)),
            }
    else:
        raise ContractViolationError(f"unknown problem kind {prob.kind!r}")

    if part is not None:
        if prob.kind == "elasticity":
            raise ContractViolationError(
                "particular solutions are supported for scalar problems only"
            )
        fields["u"] = fields["u"] + np.asarray(part.u(z), dtype=complex)
        if order == 2:
            if part.grad is None:
                raise ContractViolationError(
                    "Neumann data needs the particular solution's gradient"
                )
            gp = np.asarray(part.grad(z), dtype=complex)
            fields["gradx"] = fields["gradx"] + gp.real.astype(complex)
            fields["grady"] = fields["grady"] + gp.imag.astype(complex)
    return fields


def boundary_residual(prob, fields, bc, lo, hi, gv, normal):
    """Residual components of one BC group as tape variables."""
    ns = normal[lo:hi]
    if bc.kind == "dirichlet":
        r = cd.slice_last(fields["u"], lo, hi) - gv.real
        return [r]
    if bc.kind == "neumann":
        gx = cd.slice_last(fields["gradx"], lo, hi)
        gy = cd.slice_last(fields["grady"], lo, hi)
        return [gx * ns.real + gy * ns.imag - gv.real]
    if bc.kind == "displacement":
        rx = cd.slice_last(fields["ux"], lo, hi) - gv.real
        ry = cd.slice_last(fields["uy"], lo, hi) - gv.imag
        return [rx, ry]
    if bc.kind == "traction":
        sxx = cd.slice_last(fields["sxx"], lo, hi)
        syy = cd.slice_last(fields["syy"], lo, hi)
        sxy = cd.slice_last(fields["sxy"], lo, hi)
        rx = sxx * ns.real + sxy * ns.imag - gv.real
        ry = sxy * ns.real + syy * ns.imag - gv.imag
        return [rx, ry]
    raise ContractViolationError(f"unknown boundary condition {bc.kind!r}")


def _loss_sum(tape, prob, bounds, ctx):
    fields = evaluate_fields(tape, prob, bounds, ctx)
    total = None
    for bc, lo, hi, gv in ctx.groups:
        rs = boundary_residual(prob, fields, bc, lo, hi, gv, ctx.batch.normal)
        for lam, r in zip(bc.weights, rs):
            term = cd.sum_along(cd.abs2(r)) * float(lam)
            total = term if total is None else total + term
    return cd.reshape(total, ())


def _displacement_compatibility(prob, bounds):
    """Single-valuedness of elastic displacements around each hole.

    Circling hole s multiplies the displacement by the increment
    2*pi*i*(kappa*c1_s + c2_s)/(2 mu); with free real log coefficients the
    two potentials otherwise admit dislocation modes that are traction-free
    on every boundary yet stress the interior, so this combination is
    driven to zero as a hard quadratic constraint.
    """
    if prob.kind != "elasticity" or len(bounds) != 2:
        return None
    b1, b2 = bounds
    if not (hasattr(b1, "c_leaf") and hasattr(b2, "c_leaf")):
        return None
    if b1.c_leaf.value.size == 0:
        return None
    mism = b1.c_leaf * prob.kappa + b2.c_leaf
    return cd.reshape(cd.sum_along(cd.abs2(mism)), ())


def loss(tape, prob, potentials_or_bounds, ctx):
    """Mean over the batch of the weighted squared residuals (a tape Var)."""
    bounds = [
        p if hasattr(p, "leaves") else p.bind(tape) for p in potentials_or_bounds
    ]
    lv = _loss_sum(tape, prob, bounds, ctx) * (1.0 / len(ctx))
    pen = _displacement_compatibility(prob, bounds)
    return lv if pen is None else lv + pen


def loss_and_grad(prob, potentials, ctx):
    tape = cd.Tape()
    bounds = [p.bind(tape) for p in potentials]
    lv = _loss_sum(tape, prob, bounds, ctx) * (1.0 / len(ctx))
    pen = _displacement_compatibility(prob, bounds)
    if pen is not None:
        lv = lv + pen
    grads_by_idx = tape.backward(lv)
    grads = [
        grads_by_idx[leaf.idx] for b in bounds for leaf in b.leaves
    ]
    return float(lv.value.real), grads


def loss_value(prob, potentials, ctx):
    tape = cd.Tape()
    bounds = [p.bind(tape) for p in potentials]
    lv = _loss_sum(tape, prob, bounds, ctx) * (1.0 / len(ctx))
    pen = _displacement_compatibility(prob, bounds)
    if pen is not None:
        lv = lv + pen
    return float(lv.value.real)


def residual_values(prob, potentials, ctx):
    """|residual| per BC dimension on the context batch, shape (D, n)."""
    tape = cd.Tape()
    bounds = [p.bind(tape) for p in potentials]
    fields = evaluate_fields(tape, prob, bounds, ctx)
    D = ctx.n_residual_dims
    eps = np.zeros((D, len(ctx)))
    for bc, lo, hi, gv in ctx.groups:
        rs = boundary_residual(prob, fields, bc, lo, hi, gv, ctx.batch.normal)
        for d, r in enumerate(rs):
            eps[d, lo:hi] = np.abs(r.value)
    return eps


# ---------------------------------------------------------------------------
# Parameter flattening (shared by Adam bookkeeping and gradient checks)
# ---------------------------------------------------------------------------


def all_param_arrays(potentials):
    return [a for p in potentials for a in p.param_arrays()]


def all_real_only_flags(potentials):
    flags = []
    for p in potentials:
        if isinstance(p, LaurentPotential):
            flags += p.real_only_flags()
        else:
            flags += [False] * len(p.param_arrays())
    return flags


def param_vector(potentials):
    return np.concatenate(
        [a.view(np.float64).reshape(-1).copy() for a in all_param_arrays(potentials)]
    )


def set_param_vector(potentials, vec):
    pos = 0
    for a in all_param_arrays(potentials):
        k = 2 * a.size
        a.view(np.float64).reshape(-1)[:] = vec[pos : pos + k]
        pos += k
    if pos != len(vec):
        raise ValueError("parameter vector length mismatch")


def free_coordinate_mask(potentials):
    """1 for trainable real coordinates, 0 for frozen (imag of real-only)."""
    parts = []
    for a, ro in zip(all_param_arrays(potentials), all_real_only_flags(potentials)):
        m = np.ones(2 * a.size)
        if ro:
            m[1::2] = 0.0
        parts.append(m)
    return np.concatenate(parts)


def grad_vector(grads):
    return np.concatenate(
        [np.ascontiguousarray(g).view(np.float64).reshape(-1) for g in grads]
    )


# ---------------------------------------------------------------------------
# Setup shared by fit and the gradient check
# ---------------------------------------------------------------------------


def assign_norm_stats(potentials, domain, n_train, rng):
    """Estimate and freeze normalization stats for potentials lacking them."""
    zs = None
    for p in potentials:
        if isinstance(p, LaurentPotential):
            if p.base.stats is None or any(h.stats is None for h in p.holes):
                if zs is None:
                    zs = geo.sample_uniform(domain, 10 * n_train, rng).z
                if p.base.stats is None:
                    p.base.stats = norm_stats_of(zs)
                for s, h in enumerate(p.holes):
                    if h.stats is None:
                        h.stats = norm_stats_of(1.0 / (zs - p.centers[s]))
        elif p.stats is None:
            if zs is None:
                zs = geo.sample_uniform(domain, 10 * n_train, rng).z
            p.stats = norm_stats_of(zs)


def sample_train_test(domain, config, rng):
    n = config.n_boundary
    tf = config.test_fraction
    n_test = int(round(n * tf / (1.0 - tf))) if tf > 0 else 0
    big = geo.sample_uniform(domain, n + n_test, rng)
    train = big.take(np.arange(0, n))
    test = big.take(np.arange(n, n + n_test)) if n_test else None
    return train, test


def _prepare(prob, potentials, domain, bcs, config):
    rng_sample = np.random.default_rng([config.seed, 0])
    rng_norm = np.random.default_rng([config.seed, 1])
    train, test = sample_train_test(domain, config, rng_sample)
    assign_norm_stats(potentials, domain, config.n_boundary, rng_norm)
    if prob.kind == "helmholtz":
        stats = potentials[0].stats
        prob.center = stats.mu
        rep.check_star_shaped(domain, prob.center)
    n_need = rep.n_potentials(prob.kind)
    if len(potentials) != n_need:
        raise ContractViolationError(
            f"{prob.kind} needs {n_need} potential(s), got {len(potentials)}"
        )
    ctx = BatchContext(prob, train, bcs)
    tctx = BatchContext(prob, test, bcs) if test is not None else None
    return ctx, tctx


def _split_context(prob, ctx, bcs, k):
    """Contiguous shards of a context for fixed-order threaded reduction."""
    n = len(ctx)
    k = max(1, min(k, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    parts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            parts.append(BatchContext(prob, ctx.batch.take(np.arange(lo, hi)), bcs))
    return parts


# ---------------------------------------------------------------------------
# Fit
# ---------------------------------------------------------------------------


def fit(prob, potentials, domain, bcs, config, on_checkpoint=None):
    """Full-batch Adam over the boundary loss; returns the loss history."""
    ctx, tctx = _prepare(prob, potentials, domain, bcs, config)
    rng_rad = np.random.default_rng([config.seed, 2])
    arrays = all_param_arrays(potentials)
    adam = AdamState(arrays)
    history = []
    shards = None
    if config.threads > 1:
        shards = _split_context(prob, ctx, bcs, config.threads)
    t0 = time.perf_counter()
    lr = config.lr
    warmup_from = None
    for epoch in range(1, config.epochs + 1):
        try:
            if shards is None:
                train_loss, grads = loss_and_grad(prob, potentials, ctx)
            else:
                train_loss, grads = _loss_and_grad_sharded(
                    prob, potentials, shards, config.threads, len(ctx)
                )
            test_loss = None
            if tctx is not None and (
                epoch % config.test_every == 0 or epoch == config.epochs
            ):
                test_loss = loss_value(prob, potentials, tctx)
        except DivergedEvaluationError as e:
            raise DivergenceError(
                f"training diverged at epoch {epoch}: {e}", epoch=epoch
            ) from e
        if not np.isfinite(train_loss) or train_loss > 1e12:
            raise DivergenceError(
                f"training diverged at epoch {epoch}: loss = {train_loss:.3e}",
                epoch=epoch,
            )
        lr_eff = lr
        if warmup_from is not None:
            lr_eff = lr * min(
                1.0, (epoch - warmup_from) / config.rad.warmup_epochs
            )
        adam_step(adam, arrays, grads, lr_eff)
        if epoch >= config.lr_decay_start:
            lr *= config.lr_decay
        history.append(
            LossRecord(epoch, train_loss, test_loss, time.perf_counter() - t0)
        )
        if config.rad is not None and epoch == config.rad.switch_epoch:
            pool = geo.build_pool(domain, config.rad.pool_size)
            pool_ctx = BatchContext(prob, pool, bcs)
            eps = residual_values(prob, potentials, pool_ctx)
            # dimension rows follow the pool context's own point order
            newb = geo.rad_resample(
                pool_ctx.batch, eps, config.n_boundary,
                k=config.rad.k, c=config.rad.c, rng=rng_rad,
            )
            ctx = BatchContext(prob, newb, bcs)
            if shards is not None:
                shards = _split_context(prob, ctx, bcs, config.threads)
            if config.rad.reset_optimizer:
                adam = AdamState(arrays)
                warmup_from = epoch
        if on_checkpoint is not None and config.checkpoint_every > 0:
            if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
                on_checkpoint(epoch, potentials, history)
    if on_checkpoint is not None and config.checkpoint_every == 0:
        on_checkpoint(config.epochs, potentials, history)
    return history


def _loss_and_grad_sharded(prob, potentials, shards, threads, n_total):
    def one(arg):
        i, ctx = arg
        tape = cd.Tape()
        bounds = [p.bind(tape) for p in potentials]
        lv = _loss_sum(tape, prob, bounds, ctx) * (1.0 / n_total)
        if i == 0:
            pen = _displacement_compatibility(prob, bounds)
            if pen is not None:
                lv = lv + pen
        g = tape.backward(lv)
        return (
            float(lv.value.real),
            [g[leaf.idx] for b in bounds for leaf in b.leaves],
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(one, enumerate(shards)))
    total = 0.0
    grads = None
    for s, gs in results:  # fixed shard order
        total += s
        if grads is None:
            grads = [g.copy() for g in gs]
        else:
            for acc, g in zip(grads, gs):
                acc += g
    return total, grads


# ---------------------------------------------------------------------------
# Field prediction at arbitrary points (reporting / oracles)
# ---------------------------------------------------------------------------


class EvalContext:
    """Context carrying only what evaluate_fields needs for plain points."""

    class _Batch:
        def __init__(self, z):
            self.z = z
            self.normal = None

    def __init__(self, prob, z, order=0):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        self.batch = EvalContext._Batch(z)
        self.order = order
        self.groups = []
        self.helm = None
        if prob.kind == "helmholtz":
            pts, coeffs, dz_rows = rep.vekua_points(
                z, prob.beta, prob.quad, prob.center
            )
            grad_coeffs = None
            if order == 2:
                grad_coeffs = rep.vekua_grad_coeffs(z, prob.beta, prob.quad, prob.center)
            self.helm = (pts, coeffs, dz_rows, grad_coeffs)

    def __len__(self):
        return len(self.batch.z)


def predict_fields(prob, potentials, z, order=None):
    """Evaluate the represented solution at points z; plain numpy output."""
    if order is None:
        order = 2 if prob.kind == "elasticity" else 0
    ctx = EvalContext(prob, z, order)
    tape = cd.Tape()
    bounds = [p.bind(tape) for p in potentials]
    fields = evaluate_fields(tape, prob, bounds, ctx)
    return {k: np.asarray(v.value.real, dtype=float) for k, v in fields.items()}


# ---------------------------------------------------------------------------
# End-to-end gradient check
# ---------------------------------------------------------------------------


def gradcheck(prob, potentials, domain, bcs, config, n_directions=20, rng=None,
              fd_step=1e-5):
    """AD directional derivatives vs central differences of the whole loss.

    Returns (worst relative error, list of per-direction records).
    """
    ctx, _ = _prepare(prob, potentials, domain, bcs, config)
    if rng is None:
        rng = np.random.default_rng([config.seed, 3])
    theta0 = param_vector(potentials)
    mask = free_coordinate_mask(potentials)
    _, grads = loss_and_grad(prob, potentials, ctx)
    g = grad_vector(grads)
    worst = 0.0
    records = []
    h = fd_step * (1.0 + float(np.max(np.abs(theta0))))
    for _ in range(n_directions):
        d = rng.normal(size=len(theta0)) * mask
        d /= np.linalg.norm(d)
        ad = float(g @ d)
        set_param_vector(potentials, theta0 + h * d)
        lp = loss_value(prob, potentials, ctx)
        set_param_vector(potentials, theta0 - h * d)
        lm = loss_value(prob, potentials, ctx)
        set_param_vector(potentials, theta0)
        fd = (lp - lm) / (2.0 * h)
        rel = abs(ad - fd) / max(abs(ad), abs(fd), 1e-300)
        records.append({"ad": ad, "fd": fd, "rel": rel})
        worst = max(worst, rel)
    return worst, records
