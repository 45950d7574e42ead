"""Reverse-mode complex autodiff on a flat tape, with Wirtinger semantics.

Every tape value is a complex128 ndarray (a batch of points, a weight
matrix, ...). Primitives are either holomorphic (add, mul, div, exp, log,
powi, matmul, ...) or explicitly anti-holomorphic (conj, re, im, abs2).
The backward pass propagates the pair (dL/dw, dL/dw̄) so that real-valued
intermediates such as abs2 outputs are handled exactly; for a parameter
leaf the returned gradient is

    g = dL/dx + i dL/dy = 2 dL/dz̄,

which makes a step of gradient descent on g identical to real descent on
the (Re, Im) coordinates.

Order-2 forward jets (value, first, second input-derivative) ride on top
of the tape: each jet slot is itself a tape variable, so jets remain
differentiable with respect to parameters. Jets only admit holomorphic
primitives; conj/re/im/abs2 must be applied to the jet slots afterwards.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ContractViolationError,
    DivergedEvaluationError,
    UnsupportedOperationError,
)

_COMPLEX = np.complex128

HOLOMORPHIC_PRIMITIVES = frozenset(
    {"add", "sub", "mul", "div", "neg", "exp", "log", "powi", "cadd", "cmul",
     "matmul", "kanmat", "kanlayer", "sum", "reshape", "slice", "stack"}
)
NONHOLOMORPHIC_PRIMITIVES = frozenset({"conj", "re", "im", "abs2"})


def _as_value(x):
    return np.asarray(x, dtype=_COMPLEX)


class Var:
    """Handle to one tape node."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape, idx):
        self.tape = tape
        self.idx = idx

    @property
    def value(self):
        return self.tape.vals[self.idx]

    @property
    def shape(self):
        return self.tape.vals[self.idx].shape

    def __repr__(self):
        return f"Var(idx={self.idx}, shape={self.shape})"

    # arithmetic; constants fold into cadd/cmul nodes instead of leaves,
    # Jet2 operands (the Var then acts as a z-independent factor) delegate
    def __add__(self, other):
        if isinstance(other, Jet2):
            return other + self
        if isinstance(other, Var):
            return self.tape.record("add", self, other)
        return self.tape.record("cadd", self, aux=_as_value(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return (-other) + self
        if isinstance(other, Var):
            return self.tape.record("sub", self, other)
        return self.tape.record("cadd", self, aux=_as_value(-np.asarray(other)))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self.tape.record("neg", self)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return other * self
        if isinstance(other, Var):
            return self.tape.record("mul", self, other)
        return self.tape.record("cmul", self, aux=_as_value(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            return powi(other, -1) * self
        if isinstance(other, Var):
            return self.tape.record("div", self, other)
        return self.tape.record("cmul", self, aux=_as_value(1.0 / np.asarray(other)))

    def __rtruediv__(self, other):
        return self.tape.record("powi", self, aux=-1) * other

    def __pow__(self, n):
        return powi(self, n)

    def __matmul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self @ other.v, self @ other.d1, self @ other.d2)
        return self.tape.record("matmul", self, other)


class Tape:
    """Append-only record of one computation; rebuilt every training step."""

    def __init__(self):
        self.ops = []
        self.vals = []
        self.parents = []
        self.aux = []
        self.param_idx = []
        self.real_only = set()

    def __len__(self):
        return len(self.ops)

    def _push(self, op, value, parents, aux=None):
        value = _as_value(value)
        if not np.isfinite(value).all():
            raise DivergedEvaluationError(
                f"non-finite result in primitive '{op}'"
            )
        self.ops.append(op)
        self.vals.append(value)
        self.parents.append(parents)
        self.aux.append(aux)
        return Var(self, len(self.ops) - 1)

    def leaf(self, value, param=False, real_only=False):
        v = self._push("leaf", value, ())
        if param:
            self.param_idx.append(v.idx)
            if real_only:
                self.real_only.add(v.idx)
        return v

    def const(self, value):
        return self.leaf(value, param=False)

    def record(self, op, *operands, aux=None):
        """Append one primitive applied to existing tape variables."""
        for o in operands:
            if not isinstance(o, Var) or o.tape is not self:
                raise ContractViolationError(
                    f"operand of '{op}' does not belong to the active tape"
                )
        pv = [o.value for o in operands]
        pi = tuple(o.idx for o in operands)
        if op == "add":
            val = pv[0] + pv[1]
        elif op == "sub":
            val = pv[0] - pv[1]
        elif op == "mul":
            val = pv[0] * pv[1]
        elif op == "div":
            with np.errstate(divide="ignore", invalid="ignore"):
                val = pv[0] / pv[1]
        elif op == "neg":
            val = -pv[0]
        elif op == "cadd":
            val = pv[0] + aux
        elif op == "cmul":
            val = pv[0] * aux
        elif op == "exp":
            with np.errstate(over="ignore"):
                val = np.exp(pv[0])
        elif op == "log":
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.log(pv[0])
        elif op == "powi":
            if not isinstance(aux, int):
                raise ContractViolationError("powi exponent must be an int")
            with np.errstate(divide="ignore", invalid="ignore"):
                val = pv[0] ** aux
        elif op == "conj":
            val = np.conj(pv[0])
        elif op == "re":
            val = pv[0].real.astype(_COMPLEX)
        elif op == "im":
            val = pv[0].imag.astype(_COMPLEX)
        elif op == "abs2":
            val = (pv[0].real ** 2 + pv[0].imag ** 2).astype(_COMPLEX)
        elif op == "matmul":
            val = pv[0] @ pv[1]
        elif op == "kanmat":
            # contraction W[j,k,p] X[p,k,n] -> y[j,n], routed through BLAS
            W, X = pv
            j, k, p = W.shape
            val = W.transpose(0, 2, 1).reshape(j, p * k) @ X.reshape(p * k, -1)
        elif op == "kanlayer":
            # fused monomial layer: y = sum_p W[:,:,p-1] x^p + rowsum(b);
            # the power stack is kept for the backward pass
            W, B, x = pv
            j, k, p = W.shape
            n = x.shape[-1]
            XP = np.empty((p, k, n), dtype=_COMPLEX)
            XP[0] = x
            for q in range(1, p):
                np.multiply(XP[q - 1], x, out=XP[q])
            val = W.transpose(0, 2, 1).reshape(j, p * k) @ XP.reshape(p * k, n)
            val += B.sum(axis=1, keepdims=True)
            aux = XP
        elif op == "sum":
            val = np.sum(pv[0], axis=aux, keepdims=True)
        elif op == "reshape":
            val = pv[0].reshape(aux)
        elif op == "slice":
            lo, hi = aux
            val = pv[0][..., lo:hi]
        elif op == "stack":
            val = np.stack(pv, axis=0)
        else:
            raise UnsupportedOperationError(f"unknown primitive '{op}'")
        return self._push(op, val, pi, aux)

    def backward(self, loss):
        """Gradients g = dL/dx + i dL/dy for every parameter leaf.

        Returns a dict {leaf index: ndarray}. The loss must be a size-1,
        real-valued tape variable.
        """
        lv = loss.value
        if lv.size != 1:
            raise ContractViolationError("loss must be a scalar tape variable")
        lc = complex(lv.reshape(()))
        if abs(lc.imag) > 1e-12 * (1.0 + abs(lc.real)):
            raise ContractViolationError(
                f"loss is not real within tolerance (Im = {lc.imag:.3e})"
            )
        n = len(self.ops)
        adj_a = [None] * n  # dL/dw
        adj_b = [None] * n  # dL/dw̄
        adj_a[loss.idx] = np.ones_like(lv)

        def acc(store, j, contrib):
            if contrib is None:
                return
            contrib = _unbroadcast(contrib, self.vals[j].shape)
            if store[j] is None:
                store[j] = contrib
            else:
                store[j] = store[j] + contrib

        for i in range(loss.idx, -1, -1):
            a, b = adj_a[i], adj_b[i]
            if a is None and b is None:
                continue
            op = self.ops[i]
            if op == "leaf":
                continue
            par = self.parents[i]
            aux = self.aux[i]
            pv = [self.vals[j] for j in par]

            if op in ("conj", "re", "im", "abs2"):
                if op == "conj":
                    dz, dzb = 0.0, 1.0
                elif op == "re":
                    dz, dzb = 0.5, 0.5
                elif op == "im":
                    dz, dzb = -0.5j, 0.5j
                else:  # abs2
                    dz, dzb = np.conj(pv[0]), pv[0]
                ca = _mix(a, dz, b, np.conj(dzb))
                cb = _mix(a, dzb, b, np.conj(dz))
                acc(adj_a, par[0], ca)
                acc(adj_b, par[0], cb)
                continue

            if op == "matmul":
                U, V = pv
                if a is not None:
                    acc(adj_a, par[0], a @ V.T)
                    acc(adj_a, par[1], U.T @ a)
                if b is not None:
                    acc(adj_b, par[0], b @ np.conj(V.T))
                    acc(adj_b, par[1], np.conj(U.T) @ b)
                continue
            if op == "kanmat":
                W, X = pv
                j, k, p = W.shape
                n = X.shape[-1]
                Wf = W.transpose(0, 2, 1).reshape(j, p * k)
                Xf = X.reshape(p * k, n)
                if a is not None:
                    gw = (a @ Xf.T).reshape(j, p, k).transpose(0, 2, 1)
                    acc(adj_a, par[0], gw)
                    acc(adj_a, par[1], (Wf.T @ a).reshape(p, k, n))
                if b is not None:
                    gwb = (b @ np.conj(Xf.T)).reshape(j, p, k).transpose(0, 2, 1)
                    acc(adj_b, par[0], gwb)
                    acc(adj_b, par[1], (np.conj(Wf.T) @ b).reshape(p, k, n))
                continue
            if op == "kanlayer":
                W = pv[0]
                XP = aux
                j, k, p = W.shape
                n = XP.shape[-1]
                Wf = W.transpose(0, 2, 1).reshape(j, p * k)
                XPf = XP.reshape(p * k, n)
                for store, adj, cj in ((adj_a, a, False), (adj_b, b, True)):
                    if adj is None:
                        continue
                    Xs = np.conj(XPf) if cj else XPf
                    Ws = np.conj(Wf) if cj else Wf
                    gw = (adj @ Xs.T).reshape(j, p, k).transpose(0, 2, 1)
                    acc(store, par[0], gw)
                    gb = np.broadcast_to(adj.sum(axis=1, keepdims=True), (j, k))
                    acc(store, par[1], gb)
                    G = (Ws.T @ adj).reshape(p, k, n)
                    gx = G[0].copy()
                    for q in range(2, p + 1):
                        base = XP[q - 2]
                        gx += q * (np.conj(base) if cj else base) * G[q - 1]
                    acc(store, par[2], gx)
                continue
            if op == "sum":
                sh = pv[0].shape
                if a is not None:
                    acc(adj_a, par[0], np.broadcast_to(a, sh))
                if b is not None:
                    acc(adj_b, par[0], np.broadcast_to(b, sh))
                continue
            if op == "reshape":
                sh = pv[0].shape
                if a is not None:
                    acc(adj_a, par[0], a.reshape(sh))
                if b is not None:
                    acc(adj_b, par[0], b.reshape(sh))
                continue
            if op == "slice":
                lo, hi = aux
                for store, adj in ((adj_a, a), (adj_b, b)):
                    if adj is None:
                        continue
                    g = np.zeros_like(pv[0])
                    g[..., lo:hi] = adj
                    acc(store, par[0], g)
                continue
            if op == "stack":
                for j, pj in enumerate(par):
                    if a is not None:
                        acc(adj_a, pj, a[j])
                    if b is not None:
                        acc(adj_b, pj, b[j])
                continue

            # remaining: elementwise holomorphic with per-parent derivative d
            if op in ("add", "cadd"):
                ds = (1.0,) if op == "cadd" else (1.0, 1.0)
            elif op == "sub":
                ds = (1.0, -1.0)
            elif op == "neg":
                ds = (-1.0,)
            elif op == "mul":
                ds = (pv[1], pv[0])
            elif op == "cmul":
                ds = (aux,)
            elif op == "div":
                ds = (1.0 / pv[1], -self.vals[i] / pv[1])
            elif op == "exp":
                ds = (self.vals[i],)
            elif op == "log":
                ds = (1.0 / pv[0],)
            elif op == "powi":
                ds = (aux * pv[0] ** (aux - 1),)
            else:
                raise UnsupportedOperationError(f"no backward rule for '{op}'")
            for j, d in zip(par, ds):
                if a is not None:
                    acc(adj_a, j, a * d)
                if b is not None:
                    acc(adj_b, j, b * np.conj(d))

        grads = {}
        for idx in self.param_idx:
            bb = adj_b[idx]
            if bb is None:
                g = np.zeros_like(self.vals[idx])
            else:
                g = 2.0 * bb
            if idx in self.real_only:
                g = g.real.astype(_COMPLEX)
            grads[idx] = g
        return grads


def _mix(a, da, b, db):
    """a*da + b*db with None-as-zero adjoints."""
    if a is None and b is None:
        return None
    if a is None:
        return b * db
    if b is None:
        return a * da
    return a * da + b * db


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the parent's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1
    )
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# functional wrappers -------------------------------------------------------

def exp(x):
    if isinstance(x, Jet2):
        e = exp(x.v)
        return Jet2(e, e * x.d1, e * (x.d2 + x.d1 * x.d1))
    return x.tape.record("exp", x)


def log(x):
    if isinstance(x, Jet2):
        w = log(x.v)
        t = x.d1 / x.v
        return Jet2(w, t, x.d2 / x.v - t * t)
    return x.tape.record("log", x)


def powi(x, n):
    if isinstance(x, Jet2):
        n = int(n)
        if n == 0:
            raise UnsupportedOperationError("powi(0) inside a jet is a constant")
        if n == 1:
            return Jet2(x.v, x.d1, x.d2)
        if n == 2:
            return Jet2(
                x.v * x.v,
                2.0 * x.v * x.d1,
                2.0 * x.v * x.d2 + 2.0 * x.d1 * x.d1,
            )
        vp = powi(x.v, n - 1)
        d1 = float(n) * vp * x.d1
        d2 = float(n) * vp * x.d2 + float(n * (n - 1)) * powi(x.v, n - 2) * (
            x.d1 * x.d1
        )
        return Jet2(vp * x.v, d1, d2)
    return x.tape.record("powi", x, aux=int(n))


def conj(x):
    _reject_jet(x, "conj")
    return x.tape.record("conj", x)


def re(x):
    _reject_jet(x, "re")
    return x.tape.record("re", x)


def im(x):
    _reject_jet(x, "im")
    return x.tape.record("im", x)


def abs2(x):
    _reject_jet(x, "abs2")
    return x.tape.record("abs2", x)


def sum_along(x, axis=None):
    return x.tape.record("sum", x, aux=axis)


def reshape(x, shape):
    if isinstance(x, Jet2):
        return Jet2(reshape(x.v, shape), reshape(x.d1, shape), reshape(x.d2, shape))
    return x.tape.record("reshape", x, aux=tuple(shape))


def slice_last(x, lo, hi):
    if isinstance(x, Jet2):
        return Jet2(
            slice_last(x.v, lo, hi), slice_last(x.d1, lo, hi), slice_last(x.d2, lo, hi)
        )
    return x.tape.record("slice", x, aux=(int(lo), int(hi)))


def stack0(xs):
    return xs[0].tape.record("stack", *xs)


def _reject_jet(x, name):
    if isinstance(x, Jet2):
        raise UnsupportedOperationError(
            f"non-holomorphic primitive '{name}' is not allowed inside a jet"
        )


# order-2 forward jets -------------------------------------------------------

class Jet2:
    """Truncated Taylor triple (value, d/dz, d²/dz²), each a tape variable."""

    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1, d2):
        self.v = v
        self.d1 = d1
        self.d2 = d2

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2)
        return Jet2(self.v + other, self.d1, self.d2)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.v - other.v, self.d1 - other.d1, self.d2 - other.d2)
        return Jet2(self.v - other, self.d1, self.d2)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Jet2(-self.v, -self.d1, -self.d2)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(
                self.v * other.v,
                self.v * other.d1 + self.d1 * other.v,
                self.v * other.d2 + 2.0 * self.d1 * other.d1 + self.d2 * other.v,
            )
        return Jet2(self.v * other, self.d1 * other, self.d2 * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / np.asarray(other))
        q = self.v / other.v
        d1 = (self.d1 - q * other.d1) / other.v
        d2 = (self.d2 - 2.0 * d1 * other.d1 - q * other.d2) / other.v
        return Jet2(q, d1, d2)

    def __pow__(self, n):
        return powi(self, n)


def seed_jet(tape, z, dz=1.0):
    """Jet of the input variable itself: value z, slope dz, curvature 0."""
    z = _as_value(z)
    return Jet2(
        tape.const(z),
        tape.const(np.broadcast_to(_as_value(dz), z.shape).copy()),
        tape.const(np.zeros_like(z)),
    )


def jet_forward(primitive, *jets):
    """Apply a named holomorphic primitive to Jet2 operands."""
    if primitive in NONHOLOMORPHIC_PRIMITIVES:
        raise UnsupportedOperationError(
            f"non-holomorphic primitive '{primitive}' is not allowed inside a jet"
        )
    if primitive == "add":
        return jets[0] + jets[1]
    if primitive == "sub":
        return jets[0] - jets[1]
    if primitive == "mul":
        return jets[0] * jets[1]
    if primitive == "div":
        return jets[0] / jets[1]
    if primitive == "neg":
        return -jets[0]
    if primitive == "exp":
        return exp(jets[0])
    if primitive == "log":
        return log(jets[0])
    raise UnsupportedOperationError(f"unknown jet primitive '{primitive}'")


def jet_powi(jet, n):
    return powi(jet, n)
