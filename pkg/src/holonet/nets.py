"""Holomorphic network architectures and their initialization.

Two families share one calling convention:

* exp-MLP: complex affine layers with elementwise exp activation on all
  but the final layer;
* monomial KAN: every edge carries a trainable complex polynomial
  sum_p W_p z^p + b, so each layer is a polynomial map.

Both produce holomorphic maps by construction. Forward passes accept a
tape variable of shape (1, n) or an order-2 jet of such variables, so the
same code path yields values and z-derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import cdiff as cd
from .errors import DivergedEvaluationError, GeometryError

_EXP_RE_LIMIT = 700.0  # exp overflow threshold in double precision


# ---------------------------------------------------------------------------
# Input normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormStats:
    """Frozen affine normalization z -> (z - mu) / sigma.

    sigma is the std of the complex samples, sqrt(E|z - mu|^2); a single
    real scale keeps the map holomorphic.
    """

    mu: complex
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise GeometryError("normalization scale must be positive")


def norm_stats_of(z):
    z = np.asarray(z, dtype=complex)
    mu = complex(z.mean())
    sigma = float(np.sqrt(np.mean(np.abs(z - mu) ** 2)))
    if sigma < 1e-12:
        raise GeometryError("degenerate boundary: normalization scale ~ 0")
    return NormStats(mu, sigma)


def estimate_norm_stats(sampler, n_train, rng):
    """Stats from 10x the training-set cardinality of fresh boundary samples."""
    return norm_stats_of(sampler(10 * n_train, rng))


def normalize_input(z, stats):
    return (np.asarray(z, dtype=complex) - stats.mu) / stats.sigma


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass
class MLPParams:
    weights: list  # W_l of shape (M_l, M_{l-1})
    biases: list   # b_l of shape (M_l, 1)

    @property
    def widths(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def real_param_count(self):
        return 2 * sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class KANParams:
    weights: list  # W_l of shape (M_l, M_{l-1}, P)
    biases: list   # b_l of shape (M_l, M_{l-1}), one bias per edge
    degree: int

    @property
    def widths(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def real_param_count(self):
        # (P + 1) complex coefficients per edge
        return 2 * sum(
            w.shape[0] * w.shape[1] * (self.degree + 1) for w in self.weights
        )


def _check_widths(widths):
    if len(widths) < 2 or any(int(m) < 1 for m in widths):
        raise ValueError(f"invalid layer widths {widths!r}")
    return [int(m) for m in widths]


def init_mlp(widths, rng):
    """Zero biases; Re/Im of W ~ N(0, 1/(2 (M_in + M_out))).

    Keeps pre-activation component variance at or below 1/4 for unit-scale
    inputs, which holds exp in its quasi-linear regime.
    """
    widths = _check_widths(widths)
    ws, bs = [], []
    for m_in, m_out in zip(widths[:-1], widths[1:]):
        std = math.sqrt(1.0 / (2.0 * (m_in + m_out)))
        w = rng.normal(0.0, std, (m_out, m_in)) + 1j * rng.normal(
            0.0, std, (m_out, m_in)
        )
        ws.append(w.astype(complex))
        bs.append(np.zeros((m_out, 1), dtype=complex))
    return MLPParams(ws, bs)


def init_kan(widths, degree, rng):
    """Zero biases; Re/Im of W_p ~ N(0, 2 / ((M_in + p M_out) p! P)).

    Balances forward and backward variance of the monomial layer for
    standardized inputs (see the V[z^p] = p! moment identity).
    """
    widths = _check_widths(widths)
    if degree < 1:
        raise ValueError("polynomial degree must be at least 1")
    ws, bs = [], []
    for m_in, m_out in zip(widths[:-1], widths[1:]):
        w = np.empty((m_out, m_in, degree), dtype=complex)
        for p in range(1, degree + 1):
            var = 2.0 / ((m_in + p * m_out) * math.factorial(p) * degree)
            std = math.sqrt(var)
            w[:, :, p - 1] = rng.normal(0.0, std, (m_out, m_in)) + 1j * rng.normal(
                0.0, std, (m_out, m_in)
            )
        ws.append(w)
        bs.append(np.zeros((m_out, m_in), dtype=complex))
    return KANParams(ws, bs, int(degree))


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------


def _wrap_input(tape, x):
    """Accept an (n,) ndarray, a Var, or a Jet2; return a (1, n) quantity."""
    if isinstance(x, (cd.Var, cd.Jet2)):
        return x
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    return tape.const(x.reshape(1, -1))


def _guard_exp(pre, layer):
    v = pre.v.value if isinstance(pre, cd.Jet2) else pre.value
    worst = float(np.max(np.abs(v.real))) if v.size else 0.0
    if worst > _EXP_RE_LIMIT:
        raise DivergedEvaluationError(
            f"exp overflow in layer {layer} (|Re| = {worst:.1f} > {_EXP_RE_LIMIT:g}); "
            "try a smaller learning rate"
        )


def mlp_layers(leaves, x):
    """Forward through bound MLP leaves [W1, b1, W2, b2, ...]."""
    n_layers = len(leaves) // 2
    for l in range(n_layers):
        W, b = leaves[2 * l], leaves[2 * l + 1]
        x = (W @ x) + b
        if l < n_layers - 1:
            _guard_exp(x, l + 1)
            x = cd.exp(x)
    return x


def kan_layers(leaves, x, degree):
    """Forward through bound KAN leaves [W1, b1, ...]; monomial activations."""
    n_layers = len(leaves) // 2
    for l in range(n_layers):
        W, b = leaves[2 * l], leaves[2 * l + 1]
        if isinstance(x, cd.Jet2):
            brow = cd.sum_along(b, axis=1)  # (M_out, 1): biases absorb over edges
            powers = [x]
            for _ in range(degree - 1):
                powers.append(powers[-1] * x)
            Xv = cd.stack0([p.v for p in powers])
            Xd1 = cd.stack0([p.d1 for p in powers])
            Xd2 = cd.stack0([p.d2 for p in powers])
            t = W.tape
            x = cd.Jet2(
                t.record("kanmat", W, Xv) + brow,
                t.record("kanmat", W, Xd1),
                t.record("kanmat", W, Xd2),
            )
        else:
            x = W.tape.record("kanlayer", W, b, x)
    return x


def bind_params(tape, params):
    """Register parameter arrays as tape leaves in flat layer-major order."""
    return [tape.leaf(a, param=True) for a in params.arrays()]


def mlp_forward(tape, params, x):
    """Spec-level forward: x is the already-normalized input."""
    return mlp_layers(bind_params(tape, params), _wrap_input(tape, x))


def kan_forward(tape, params, x):
    return kan_layers(bind_params(tape, params), _wrap_input(tape, x), params.degree)


# ---------------------------------------------------------------------------
# A potential = one network + its frozen normalization
# ---------------------------------------------------------------------------


class PlainPotential:
    """Simply-connected holomorphic potential: net applied to (z - mu)/sigma."""

    def __init__(self, params, stats: Optional[NormStats] = None):
        widths = params.widths
        if widths[0] != 1 or widths[-1] != 1:
            raise ValueError("potential networks map scalar to scalar")
        self.params = params
        self.stats = stats

    def real_param_count(self):
        return self.params.real_param_count()

    def param_arrays(self):
        return self.params.arrays()

    def bind(self, tape):
        return BoundPlain(self, tape)


class BoundPlain:
    def __init__(self, potential, tape):
        self.potential = potential
        self.tape = tape
        self.leaves = bind_params(tape, potential.params)

    def _net(self, x):
        p = self.potential.params
        if isinstance(p, KANParams):
            return kan_layers(self.leaves, x, p.degree)
        return mlp_layers(self.leaves, x)

    def at(self, z, order=0, dz=1.0, dz2=0.0):
        """Evaluate at physical points z; order=2 returns a Jet2 carrying
        derivatives with respect to an outer variable t, where (dz, dz2)
        are dz/dt and d2z/dt2 of the input map (both default to z = t)."""
        stats = self.potential.stats
        if stats is None:
            raise ValueError("potential has no normalization stats yet")
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        zt = ((z - stats.mu) / stats.sigma).reshape(1, -1)
        n = zt.shape[1]
        if order == 0:
            out = self._net(self.tape.const(zt))
            return cd.reshape(out, (n,))
        d1 = np.broadcast_to(np.asarray(dz, dtype=complex) / stats.sigma, (1, n))
        d2 = np.broadcast_to(np.asarray(dz2, dtype=complex) / stats.sigma, (1, n))
        jet = cd.Jet2(
            self.tape.const(zt),
            self.tape.const(d1.copy()),
            self.tape.const(d2.copy()),
        )
        out = self._net(jet)
        return cd.reshape(out, (n,))
