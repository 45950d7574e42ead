"""Checkpoint serialization, version tag "holonet-ckpt-1".

JSON with widths, polynomial degree, and interleaved (re, im) coefficient
lists in layer-major, power-minor order; Laurent composites extend the
format with one section per subnet plus the log-coefficient array.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .laurent import LaurentPotential
from .nets import KANParams, MLPParams, NormStats, PlainPotential

VERSION = "holonet-ckpt-1"


def _encode_array(a):
    flat = np.ascontiguousarray(a).reshape(-1)
    out = np.empty(2 * flat.size)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tolist()


def _decode_array(vals, shape):
    vals = np.asarray(vals, dtype=float)
    return (vals[0::2] + 1j * vals[1::2]).reshape(shape)


def _subnet_dict(potential):
    p = potential.params
    d = {"widths": p.widths}
    if isinstance(p, KANParams):
        d["family"] = "kan"
        d["degree"] = p.degree
    else:
        d["family"] = "mlp"
    d["layers"] = [
        {"w": _encode_array(w), "b": _encode_array(b)}
        for w, b in zip(p.weights, p.biases)
    ]
    if potential.stats is not None:
        d["norm"] = {
            "mu": [potential.stats.mu.real, potential.stats.mu.imag],
            "sigma": potential.stats.sigma,
        }
    return d


def _subnet_from_dict(d):
    widths = [int(m) for m in d["widths"]]
    layers = d["layers"]
    ws, bs = [], []
    for i, layer in enumerate(layers):
        m_in, m_out = widths[i], widths[i + 1]
        if d["family"] == "kan":
            P = int(d["degree"])
            ws.append(_decode_array(layer["w"], (m_out, m_in, P)))
            bs.append(_decode_array(layer["b"], (m_out, m_in)))
        else:
            ws.append(_decode_array(layer["w"], (m_out, m_in)))
            bs.append(_decode_array(layer["b"], (m_out, 1)))
    params = (
        KANParams(ws, bs, int(d["degree"]))
        if d["family"] == "kan"
        else MLPParams(ws, bs)
    )
    stats = None
    if "norm" in d:
        stats = NormStats(
            complex(d["norm"]["mu"][0], d["norm"]["mu"][1]), d["norm"]["sigma"]
        )
    return PlainPotential(params, stats)


def potential_to_dict(potential):
    if isinstance(potential, LaurentPotential):
        return {
            "version": VERSION,
            "family": "laurent",
            "centers": [[c.real, c.imag] for c in potential.centers],
            "guards": list(potential.guards),
            "log_coeffs": potential.log_coeffs.real.tolist(),
            "base": _subnet_dict(potential.base),
            "holes": [_subnet_dict(h) for h in potential.holes],
        }
    d = _subnet_dict(potential)
    d["version"] = VERSION
    return d


def potential_from_dict(d):
    if d.get("version") != VERSION:
        raise ConfigError(f"unsupported checkpoint version {d.get('version')!r}")
    if d.get("family") == "laurent":
        base = _subnet_from_dict(d["base"])
        holes = [_subnet_from_dict(h) for h in d["holes"]]
        pot = LaurentPotential(
            base.params,
            [h.params for h in holes],
            [complex(c[0], c[1]) for c in d["centers"]],
            d["guards"],
            base_stats=base.stats,
            hole_stats=[h.stats for h in holes],
            log_coeffs=d["log_coeffs"],
        )
        return pot
    return _subnet_from_dict(d)


def save_checkpoint(path, potentials):
    """Write one or a list of potentials to a JSON checkpoint."""
    if not isinstance(potentials, (list, tuple)):
        potentials = [potentials]
    doc = {
        "version": VERSION,
        "potentials": [potential_to_dict(p) for p in potentials],
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read checkpoint {path}: {e}") from e
    if doc.get("version") != VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')!r}")
    if "potentials" not in doc:
        raise ConfigError("checkpoint has no potentials section")
    return [potential_from_dict(d) for d in doc["potentials"]]
