"""Composite potentials for multiply-connected domains.

On a domain with S holes a potential is

    phi(z) = phi_0(z) + sum_s phi_s(1/(z - z_s)) + sum_s c_s log(z - z_s),

with phi_0 and the phi_s ordinary holomorphic networks, z_s a declared
interior point of hole s, and c_s real trainable scalars. The reciprocal
substitution supplies the negative Laurent powers; Re(c log(z - z_s)) =
c log|z - z_s| is single-valued, and all z-derivatives of the log term are
single-valued too, so losses built from Re(phi) or from stress fields never
see the branch cut of the principal log.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import cdiff as cd
from .errors import PointInsideHoleError
from .nets import NormStats, PlainPotential

GUARD_FACTOR = 0.5  # reject closer than this fraction of the hole clearance


class LaurentPotential:
    """Base network plus per-hole reciprocal networks and log coefficients."""

    def __init__(self, base_params, hole_params, centers, guards,
                 base_stats: Optional[NormStats] = None,
                 hole_stats: Optional[list] = None,
                 log_coeffs=None):
        self.base = PlainPotential(base_params, base_stats)
        hole_stats = hole_stats if hole_stats is not None else [None] * len(hole_params)
        self.holes = [PlainPotential(p, s) for p, s in zip(hole_params, hole_stats)]
        self.centers = [complex(c) for c in centers]
        self.guards = [float(g) for g in guards]
        if not (len(self.holes) == len(self.centers) == len(self.guards)):
            raise ValueError("hole networks, centers, and guards must align")
        if log_coeffs is None:
            log_coeffs = np.zeros(len(self.holes))
        self.log_coeffs = np.asarray(log_coeffs, dtype=complex).reshape(-1).copy()
        if self.log_coeffs.shape != (len(self.holes),):
            raise ValueError("need one log coefficient per hole")
        if np.any(self.log_coeffs.imag != 0):
            raise ValueError("log coefficients are real-valued")

    @property
    def n_holes(self):
        return len(self.holes)

    @property
    def stats(self):
        return self.base.stats

    def param_arrays(self):
        """Flat view: base weights, hole-net weights by s, then log coeffs."""
        out = list(self.base.param_arrays())
        for h in self.holes:
            out += h.param_arrays()
        out.append(self.log_coeffs)
        return out

    def real_only_flags(self):
        flags = [False] * (len(self.base.param_arrays()))
        for h in self.holes:
            flags += [False] * len(h.param_arrays())
        flags.append(True)
        return flags

    def real_param_count(self):
        n = self.base.real_param_count() + sum(
            h.real_param_count() for h in self.holes
        )
        return n + self.n_holes  # one real scalar per hole

    def bind(self, tape):
        return BoundLaurent(self, tape)


class BoundLaurent:
    def __init__(self, potential, tape):
        self.potential = potential
        self.tape = tape
        self.base = potential.base.bind(tape)
        self.hole_nets = [h.bind(tape) for h in potential.holes]
        self.c_leaf = tape.leaf(potential.log_coeffs, param=True, real_only=True)
        self.leaves = (
            list(self.base.leaves)
            + [v for b in self.hole_nets for v in b.leaves]
            + [self.c_leaf]
        )

    def at(self, z, order=0, dz=1.0):
        pot = self.potential
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        for s, (zs, guard) in enumerate(zip(pot.centers, pot.guards)):
            dist = np.abs(z - zs)
            if np.any(dist < guard):
                worst = float(dist.min())
                raise PointInsideHoleError(
                    f"evaluation point at distance {worst:.3g} from hole-{s} "
                    f"center (guard radius {guard:.3g})"
                )
        dz = np.broadcast_to(np.asarray(dz, dtype=complex), z.shape)
        out = self.base.at(z, order, dz)
        for s, bnd in enumerate(self.hole_nets):
            zs = pot.centers[s]
            w = 1.0 / (z - zs)
            if order == 0:
                out = out + bnd.at(w, 0)
            else:
                dw = -w * w * dz
                dw2 = 2.0 * w**3 * dz * dz
                out = out + bnd.at(w, 2, dz=dw, dz2=dw2)
        # trainable log terms; principal branch
        for s in range(pot.n_holes):
            zs = pot.centers[s]
            cs = cd.reshape(cd.slice_last(self.c_leaf, s, s + 1), (1,))
            logv = cs * np.log(z - zs)
            if order == 0:
                out = out + logv
            else:
                d1 = cs * (dz / (z - zs))
                d2 = cs * (-(dz * dz) / (z - zs) ** 2)
                out = out + cd.Jet2(logv, d1, d2)
        return out
