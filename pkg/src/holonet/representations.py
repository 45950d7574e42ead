"""Maps from holomorphic potentials to PDE solution fields.

Covers the four supported problems (Laplace, biharmonic, plane linear
elasticity, Helmholtz), the Bessel/Gauss-Legendre numerics that the
Helmholtz integral operator needs, and superposition of particular
solutions for non-homogeneous right-hand sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import cdiff as cd
from .errors import ContractViolationError, GeometryError

# ---------------------------------------------------------------------------
# Bessel functions of the first kind (ascending series + Hankel asymptotics)
# ---------------------------------------------------------------------------

_SERIES_CUTOFF = 12.0
_X_MAX = 100.0


def bessel_j(n, x):
    """J_n(x) for integer n >= 0 and 0 <= x <= 100, |error| <= 1e-10.

    Ascending series below x=12; Hankel asymptotic expansion beyond, where
    the series would lose accuracy to cancellation. Orders above 2 are only
    supported in the series range.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"unsupported Bessel order {n!r}")
    n = int(n)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > _X_MAX):
        raise ValueError(f"Bessel argument out of supported range [0, {_X_MAX}]")
    if n > 2 and np.any(x_arr > _SERIES_CUTOFF):
        raise ValueError(f"Bessel order {n} unsupported for x > {_SERIES_CUTOFF}")
    out = np.empty_like(x_arr, dtype=float)
    small = x_arr <= _SERIES_CUTOFF
    if small.any():
        out[small] = _bessel_series(n, x_arr[small])
    if (~small).any():
        out[~small] = _bessel_hankel(n, x_arr[~small])
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def _bessel_series(n, x):
    q = 0.25 * x * x
    term = (0.5 * x) ** n / math.factorial(n)
    acc = term.copy()
    for m in range(1, 60):
        term = term * (-q) / (m * (m + n))
        acc += term
        if np.all(np.abs(term) < 1e-18 * (1.0 + np.abs(acc))):
            break
    return acc


def _bessel_hankel(n, x):
    mu = 4.0 * n * n
    inv8x = 1.0 / (8.0 * x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 30):
        term = term * (mu - (2 * k - 1) ** 2) / k * inv8x
        if np.all(np.abs(term) < 1e-18):
            break
        phase = k % 4
        if phase == 1:
            q += term
        elif phase == 2:
            p -= term
        elif phase == 3:
            q -= term
        else:
            p += term
    chi = x - (0.5 * n + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


# ---------------------------------------------------------------------------
# Gauss-Legendre quadrature on [0, 1]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray   # in (0, 1), strictly increasing
    weights: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.nodes) > 0):
            raise ContractViolationError("quadrature nodes must be increasing")
        if abs(self.weights.sum() - 1.0) > 1e-14:
            raise ContractViolationError("quadrature weights must sum to 1")

    @property
    def count(self):
        return len(self.nodes)


def gauss_legendre(n):
    """n-point Gauss-Legendre rule mapped from [-1, 1] to [0, 1]."""
    if n < 1:
        raise ValueError("need at least one quadrature node")
    if n == 1:
        return QuadratureRule(np.array([0.5]), np.array([1.0]))
    # Newton iteration on P_n from Chebyshev-like initial guesses
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    nodes01 = (x[order] + 1.0) / 2.0
    w01 = w[order] / 2.0
    w01 = w01 / w01.sum()  # remove last-ulp drift so the invariant holds exactly
    return QuadratureRule(nodes01, w01)


# ---------------------------------------------------------------------------
# Problem description
# ---------------------------------------------------------------------------


@dataclass
class Particular:
    """Particular solution of the non-homogeneous problem: u and its gradient."""

    u: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None  # gx + i gy


@dataclass
class Problem:
    kind: str  # laplace | biharmonic | elasticity | helmholtz
    mu: float = 0.0
    lam_eff: float = 0.0
    kappa: float = 0.0
    regime: str = ""
    beta: float = 0.0
    quad: Optional[QuadratureRule] = None
    center: complex = 0.0 + 0.0j  # Vekua expansion center (= normalization mean)
    particular: Optional[Particular] = None


def laplace(particular=None):
    return Problem(kind="laplace", particular=particular)


def biharmonic(particular=None):
    return Problem(kind="biharmonic", particular=particular)


def elasticity(mu, lam, regime="plane-stress"):
    if mu <= 0:
        raise ValueError("shear modulus must be positive")
    if regime == "plane-strain":
        lam_eff = lam
    elif regime == "plane-stress":
        lam_eff = 2.0 * lam * mu / (lam + 2.0 * mu)
    else:
        raise ValueError(f"unknown elasticity regime {regime!r}")
    kappa = (lam_eff + 3.0 * mu) / (lam_eff + mu)
    return Problem(kind="elasticity", mu=mu, lam_eff=lam_eff, kappa=kappa,
                   regime=regime)


def helmholtz(beta, n_quad=20):
    if beta <= 0:
        raise ValueError("wave number must be positive")
    return Problem(kind="helmholtz", beta=beta, quad=gauss_legendre(n_quad))


def n_potentials(kind):
    """Number of independent holomorphic potentials the problem needs."""
    k = kind.kind if isinstance(kind, Problem) else kind
    table = {"laplace": 1, "biharmonic": 2, "elasticity": 2, "helmholtz": 1}
    if k not in table:
        raise ValueError(f"unknown problem kind {k!r}")
    return table[k]


# ---------------------------------------------------------------------------
# Field maps (tape level); potentials arrive as Var or Jet2 of shape (n,)
# ---------------------------------------------------------------------------


def _val(phi):
    return phi.v if isinstance(phi, cd.Jet2) else phi


def laplace_field(phi):
    return cd.re(_val(phi))


def biharmonic_field(phi1, phi2, z):
    zbar = np.conj(np.asarray(z, dtype=complex))
    return cd.re(_val(phi1) * zbar + _val(phi2))


def elasticity_fields(phi1, phi2, z, prob):
    """Displacements and stresses from two potentials given as order-2 jets."""
    if not isinstance(phi1, cd.Jet2) or not isinstance(phi2, cd.Jet2):
        raise ContractViolationError("elasticity fields need order-2 jets")
    z = np.asarray(z, dtype=complex)
    zbar = np.conj(z)
    disp = (prob.kappa * phi1.v - cd.conj(phi1.d1) * z - cd.conj(phi2.v)) * (
        1.0 / (2.0 * prob.mu)
    )
    bterm = phi1.d2 * zbar + phi2.d1
    two_d1 = 2.0 * phi1.d1
    return {
        "ux": cd.re(disp),
        "uy": cd.im(disp),
        "sxx": cd.re(two_d1 - bterm),
        "syy": cd.re(two_d1 + bterm),
        "sxy": cd.im(bterm),
    }


# ---------------------------------------------------------------------------
# Vekua operator for the Helmholtz equation
# ---------------------------------------------------------------------------


def vekua_points(z, beta, quad, center=0.0):
    """Evaluation points and kernel data for the Helmholtz integral operator.

    Returns (pts, coeffs, dz_rows): pts has shape (n_q + 1, n) where row 0 is
    z itself and row q is the point scaled toward the expansion center;
    coeffs combines rows so that u = sum_q coeffs[q] * Re(phi(pts[q]));
    dz_rows holds d(pts)/dz for jet seeding.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s = quad.nodes[:, None]
    w = quad.weights[:, None]
    rel = z[None, :] - center
    r = np.abs(rel)
    pts = np.concatenate([z[None, :], center + rel * (1.0 - s * s)], axis=0)
    kern = -w * beta * r * bessel_j(1, beta * r * s)
    coeffs = np.concatenate([np.ones((1, len(z))), kern], axis=0)
    dz_rows = np.concatenate(
        [np.ones((1, len(z))), np.broadcast_to(1.0 - s * s, kern.shape)], axis=0
    )
    return pts, coeffs, dz_rows


def vekua_grad_coeffs(z, beta, quad, center=0.0):
    """d(coeffs)/dx and d(coeffs)/dy of the kernel rows from vekua_points."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s = quad.nodes[:, None]
    w = quad.weights[:, None]
    rel = z[None, :] - center
    r = np.abs(rel)
    j0 = bessel_j(0, beta * r * s)
    common = -w * beta * beta * s * j0
    zero = np.zeros((1, len(z)))
    dx = np.concatenate([zero, common * rel.real], axis=0)
    dy = np.concatenate([zero, common * rel.imag], axis=0)
    return dx, dy


def vekua_apply(phi, z, beta, quad, center=0.0, domain=None):
    """Numeric Helmholtz solution u = V_beta[Re phi] at points z.

    `phi` maps complex points to complex values (plain numpy). If `domain`
    is given, every scaled evaluation point must lie inside it; a failure
    means the domain is not star-shaped about the expansion center.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    pts, coeffs, _ = vekua_points(z, beta, quad, center)
    if domain is not None:
        inner = pts[1:, :].ravel()
        if not np.all(domain.contains(inner)):
            raise GeometryError(
                "Vekua segment leaves the domain; star-shapedness about "
                "the expansion center is violated"
            )
    vals = np.asarray(phi(pts.ravel()), dtype=complex).reshape(pts.shape)
    u = np.sum(coeffs * vals.real, axis=0)
    return u if u.size > 1 else float(u[0])


def check_star_shaped(domain, center, n_probe=256, n_along=16):
    """Sampled validation that segments from `center` to the boundary stay inside."""
    from . import geometry  # local import to avoid a cycle

    batch = geometry.build_pool(domain, n_probe)
    t = (np.arange(1, n_along + 1) / (n_along + 1.0))[:, None]
    pts = center + t * (batch.z[None, :] - center)
    if not np.all(domain.contains(pts.ravel())):
        raise GeometryError(
            "domain is not star-shaped about the Vekua center "
            f"{center:.6g}; Helmholtz representation is invalid here"
        )


# ---------------------------------------------------------------------------
# Particular-solution superposition
# ---------------------------------------------------------------------------


def superpose_particular(fields, prob, z):
    """Add the particular solution's contribution to evaluated fields."""
    part = prob.particular
    if part is None:
        return fields
    z = np.asarray(z, dtype=complex)
    out = dict(fields)
    if "u" in out:
        out["u"] = out["u"] + np.asarray(part.u(z), dtype=complex)
    if "gradx" in out or "grady" in out:
        if part.grad is None:
            raise ContractViolationError(
                "Neumann data needs the particular solution's gradient"
            )
        g = np.asarray(part.grad(z), dtype=complex)
        if "gradx" in out:
            out["gradx"] = out["gradx"] + g.real
        if "grady" in out:
            out["grady"] = out["grady"] + g.imag
    return out
