"""Command-line entry point: run configs, benchmarks, gradient checks,
and checkpoint inspection.

Exit codes: 0 success, 2 validation problem, 3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import bench, checkpoint, geometry as geo, nets, representations as rep, train
from .errors import ConfigError, DivergenceError, HolonetError
from .laurent import GUARD_FACTOR, LaurentPotential

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


# ---------------------------------------------------------------------------
# Named boundary-data and particular-solution registries
# ---------------------------------------------------------------------------


def _g_zero(params):
    return lambda z: np.zeros(np.shape(z))


def _g_const(params):
    v = complex(params.get("value", 1.0))
    if v.imag == 0:
        v = v.real
    return lambda z: np.full(np.shape(z), v)


def _g_re_zn(params):
    n = int(params.get("n", 1))
    return lambda z: (z**n).real


def _g_j0_beta_r(params):
    beta = float(params["beta"])
    cx, cy = params.get("center", (0.0, 0.0))
    c = complex(cx, cy)
    return lambda z: np.asarray(rep.bessel_j(0, beta * np.abs(z - c)))


def _g_radial(params):
    p = float(params.get("p", 1.0))
    cx, cy = params.get("center", (0.0, 0.0))
    c = complex(cx, cy)
    return lambda z: p * (z - c) / np.abs(z - c)


def _g_edge_tension(params):
    half = float(params["half_side"])
    t = float(params.get("tension", 1.0))
    return bench.plate_hole_traction(half, t)


G_REGISTRY = {
    "zero": _g_zero,
    "one": lambda params: _g_const({"value": 1.0}),
    "const": _g_const,
    "re_zn": _g_re_zn,
    "j0_beta_r": _g_j0_beta_r,
    "radial_pressure": _g_radial,
    "edge_tension_x": _g_edge_tension,
}


def _particular_quadratic(params):
    c = float(params.get("coeff", -0.25))
    return rep.Particular(
        u=lambda z: c * (z.real**2 + z.imag**2),
        grad=lambda z: 2.0 * c * (z.real + 1j * z.imag),
    )


PARTICULAR_REGISTRY = {"quadratic_bowl": _particular_quadratic}


def _resolve_g(spec):
    if spec is None:
        raise ConfigError("boundary condition needs a g entry")
    if isinstance(spec, (int, float)):
        return _g_const({"value": spec})
    name = spec.get("name")
    if name not in G_REGISTRY:
        raise ConfigError(
            f"unknown boundary function {name!r}; known: {sorted(G_REGISTRY)}"
        )
    return G_REGISTRY[name](spec)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_TRAIN_DEFAULTS = {
    "epochs": 1000,
    "lr": 1e-2,
    "n_boundary": 200,
    "seed": 0,
    "test_fraction": 0.2,
    "lr_decay": 1.0,
    "lr_decay_start": 0,
    "threads": 1,
    "checkpoint_every": 0,
    "rad": None,
}


def _parse_curve(c, hole=False):
    if "segment" in c:
        (x1, y1), (x2, y2) = c["segment"]
        return geo.Segment(complex(x1, y1), complex(x2, y2), normal_left=hole)
    if "arc" in c:
        a = c["arc"]
        cx, cy = a["center"]
        return geo.Arc(
            complex(cx, cy), float(a["radius"]),
            float(a.get("theta0", 0.0)), float(a.get("theta1", 2 * np.pi)),
            normal_left=hole,
        )
    raise ConfigError(f"curve must be a segment or an arc, got {sorted(c)}")


def _parse_domain(d):
    outer = [_parse_curve(c) for c in d["outer"]]
    holes = []
    for h in d.get("holes", []):
        if "center" not in h:
            raise ConfigError("domain.holes[].center is required")
        cx, cy = h["center"]
        holes.append(
            geo.Hole([_parse_curve(c, hole=True) for c in h["curves"]],
                     complex(cx, cy))
        )
    return geo.Domain(outer, holes)


def _parse_problem(p):
    kind = p.get("kind")
    part = None
    if p.get("particular"):
        spec = p["particular"]
        name = spec.get("name")
        if name not in PARTICULAR_REGISTRY:
            raise ConfigError(f"unknown particular solution {name!r}")
        part = PARTICULAR_REGISTRY[name](spec)
    if kind == "laplace":
        return rep.laplace(particular=part)
    if kind == "biharmonic":
        return rep.biharmonic(particular=part)
    if kind == "elasticity":
        prob = rep.elasticity(
            mu=float(p.get("mu", 1.0)),
            lam=float(p.get("lambda", 1.0)),
            regime=p.get("regime", "plane-stress"),
        )
        if part is not None:
            raise ConfigError("particular solutions are scalar-problem only")
        return prob
    if kind == "helmholtz":
        return rep.helmholtz(float(p["beta"]), n_quad=int(p.get("n_quad", 20)))
    raise ConfigError(f"unknown problem kind {kind!r}")


def _parse_bcs(b, n_curves):
    out = {}
    for key, spec in b.items():
        cid = int(key)
        if not (0 <= cid < n_curves):
            raise ConfigError(f"bcs[{key}]: no such curve (have {n_curves})")
        kind = spec.get("type")
        g = _resolve_g(spec.get("g"))
        w = spec.get("weight", 1.0)
        if kind == "dirichlet":
            out[cid] = geo.dirichlet(g, weight=float(w))
        elif kind == "neumann":
            out[cid] = geo.neumann(g, weight=float(w))
        elif kind == "displacement":
            wx, wy = (w, w) if np.isscalar(w) else w
            out[cid] = geo.displacement(g, weight_x=float(wx), weight_y=float(wy))
        elif kind == "traction":
            wx, wy = (w, w) if np.isscalar(w) else w
            out[cid] = geo.traction(g, weight_x=float(wx), weight_y=float(wy))
        else:
            raise ConfigError(f"bcs[{key}]: unknown type {kind!r}")
    return out


def _build_potentials(net_cfg, prob, domain, seed):
    family = net_cfg.get("family", "kan")
    widths = [int(m) for m in net_cfg.get("widths", [1, 10, 10, 1])]
    degree = int(net_cfg.get("degree", 4))
    rng = np.random.default_rng([seed, 3])
    n_pot = rep.n_potentials(prob.kind)

    def make_params(ws):
        if family == "kan":
            return nets.init_kan(ws, degree, rng)
        if family == "mlp":
            return nets.init_mlp(ws, rng)
        raise ConfigError(f"unknown network family {family!r}")

    if domain.n_holes == 0:
        return [nets.PlainPotential(make_params(widths)) for _ in range(n_pot)]
    # multiply connected: Laurent composite; hole nets default to half width
    hw = net_cfg.get("hole_widths")
    if hw is None:
        hw = [widths[0]] + [max(1, m // 2) for m in widths[1:-1]] + [widths[-1]]
    hw = [int(m) for m in hw]
    centers = [h.center for h in domain.holes]
    guards = [GUARD_FACTOR * domain.hole_clearance(s) for s in range(domain.n_holes)]
    pots = []
    for _ in range(n_pot):
        base = make_params(widths)
        holes = [make_params(hw) for _ in centers]
        pots.append(LaurentPotential(base, holes, centers, guards))
    return pots


def load_run_config(path, seed_override=None, threads_override=None):
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    for section in ("problem", "domain", "bcs", "network", "train"):
        if section not in raw:
            raise ConfigError(f"config is missing the {section!r} section")
    tr_raw = dict(_TRAIN_DEFAULTS)
    tr_raw.update(raw["train"])
    if seed_override is not None:
        tr_raw["seed"] = seed_override
    elif "seed" not in raw["train"] and os.environ.get("HOLONET_SEED"):
        tr_raw["seed"] = int(os.environ["HOLONET_SEED"])
    if threads_override is not None:
        tr_raw["threads"] = threads_override
    rad = None
    if tr_raw.get("rad"):
        rr = tr_raw["rad"]
        rad = train.RadConfig(
            switch_epoch=int(rr["switch_epoch"]),
            pool_size=int(rr.get("pool_size", 10_000)),
            k=float(rr.get("k", 1.0)),
            c=float(rr.get("c", 1.0)),
            reset_optimizer=bool(rr.get("reset_optimizer", True)),
            warmup_epochs=int(rr.get("warmup_epochs", 50)),
        )
    try:
        cfg = train.TrainConfig(
            epochs=int(tr_raw["epochs"]),
            lr=float(tr_raw["lr"]),
            n_boundary=int(tr_raw["n_boundary"]),
            seed=int(tr_raw["seed"]),
            test_fraction=float(tr_raw["test_fraction"]),
            lr_decay=float(tr_raw["lr_decay"]),
            lr_decay_start=int(tr_raw["lr_decay_start"]),
            threads=int(tr_raw["threads"]),
            checkpoint_every=int(tr_raw["checkpoint_every"]),
            rad=rad,
        )
    except ValueError as e:
        raise ConfigError(f"train section: {e}") from e
    domain = _parse_domain(raw["domain"])
    prob = _parse_problem(raw["problem"])
    bcs = _parse_bcs(raw["bcs"], len(domain.curves))
    if not bcs or len(bcs) != len(domain.curves):
        raise ConfigError(
            f"bcs must cover every curve: {len(bcs)} given, "
            f"{len(domain.curves)} curves"
        )
    pots = _build_potentials(raw["network"], prob, domain, cfg.seed)
    resolved = {
        "problem": raw["problem"],
        "domain": raw["domain"],
        "bcs": raw["bcs"],
        "network": raw["network"],
        "train": {k: v for k, v in tr_raw.items() if k != "rad"},
        "outputs": raw.get("outputs", {"grid": 64}),
    }
    resolved["train"]["rad"] = None if rad is None else {
        "switch_epoch": rad.switch_epoch, "pool_size": rad.pool_size,
        "k": rad.k, "c": rad.c, "reset_optimizer": rad.reset_optimizer,
        "warmup_epochs": rad.warmup_epochs,
    }
    return prob, pots, domain, bcs, cfg, resolved


# ---------------------------------------------------------------------------
# Artifact writers
# ---------------------------------------------------------------------------


def write_loss_csv(path, history):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "train_loss", "test_loss", "seconds"])
        for h in history:
            w.writerow([
                h.epoch, repr(h.train_loss),
                "" if h.test_loss is None else repr(h.test_loss),
                f"{h.seconds:.3f}",
            ])


def write_fields_csv(path, prob, pots, domain, grid_n):
    x0, y0, x1, y1 = domain.bbox()
    xs = np.linspace(x0, x1, grid_n)
    ys = np.linspace(y0, y1, grid_n)
    Z = (xs[None, :] + 1j * ys[:, None]).ravel()
    inside = domain.contains(Z)
    pts = Z[inside]
    fields = train.predict_fields(prob, pots, pts)
    names = sorted(fields)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y"] + names)
        for i, z in enumerate(pts):
            w.writerow([repr(z.real), repr(z.imag)] + [repr(float(fields[k][i]))
                                                       for k in names])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args):
    prob, pots, domain, bcs, cfg, resolved = load_run_config(
        args.config, args.seed, args.threads
    )
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "checkpoint.json")

    def save(epoch, potentials, hist):
        checkpoint.save_checkpoint(ckpt_path, potentials)

    history = train.fit(prob, pots, domain, bcs, cfg, on_checkpoint=save)
    with open(os.path.join(out_dir, "config-resolved.json"), "w") as f:
        json.dump(resolved, f, indent=2)
    checkpoint.save_checkpoint(ckpt_path, pots)
    write_loss_csv(os.path.join(out_dir, "loss.csv"), history)
    grid_n = args.grid or int(resolved["outputs"].get("grid", 64))
    write_fields_csv(os.path.join(out_dir, "fields.csv"), prob, pots, domain, grid_n)
    print(
        f"trained {cfg.epochs} epochs; final train loss "
        f"{history[-1].train_loss:.6e}; artifacts in {out_dir}"
    )
    return EXIT_OK


def cmd_bench(args):
    if args.name not in bench.benchmark_names():
        print(
            f"unknown benchmark {args.name!r}; registered: "
            + ", ".join(bench.benchmark_names()),
            file=sys.stderr,
        )
        return EXIT_CONFIG
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    report, pots, prob, domain = bench.run_benchmark(args.name, **overrides)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        checkpoint.save_checkpoint(
            os.path.join(args.out_dir, "checkpoint.json"), pots
        )
        write_loss_csv(os.path.join(args.out_dir, "loss.csv"), report.history)
        write_fields_csv(
            os.path.join(args.out_dir, "fields.csv"), prob, pots, domain,
            args.grid or 64,
        )
        with open(os.path.join(args.out_dir, "report.json"), "w") as f:
            json.dump(report.to_json_dict(), f, indent=2)
    print(json.dumps(report.to_json_dict(), indent=2))
    return EXIT_OK


def cmd_gradcheck(args):
    prob, pots, domain, bcs, cfg, _ = load_run_config(args.config, args.seed,
                                                      args.threads)
    worst, records = train.gradcheck(prob, pots, domain, bcs, cfg)
    bad = max(records, key=lambda r: r["rel"])
    print(
        f"checked {len(records)} directions: worst rel error {worst:.3e} "
        f"(ad={bad['ad']:.6e}, fd={bad['fd']:.6e})"
    )
    return EXIT_OK if worst <= 1e-5 else EXIT_CONFIG


def cmd_inspect(args):
    pots = checkpoint.load_checkpoint(args.checkpoint)
    for i, p in enumerate(pots):
        if isinstance(p, LaurentPotential):
            print(
                f"potential {i}: laurent, {p.n_holes} hole(s), "
                f"log coeffs {p.log_coeffs.real.tolist()}, "
                f"{p.real_param_count()} real parameters"
            )
            subs = [("base", p.base)] + [(f"hole {s}", h) for s, h in
                                         enumerate(p.holes)]
        else:
            subs = [(f"potential {i}", p)]
        for label, q in subs:
            fam = "kan" if isinstance(q.params, nets.KANParams) else "mlp"
            deg = getattr(q.params, "degree", None)
            line = f"  {label}: {fam} widths {q.params.widths}"
            if deg is not None:
                line += f" degree {deg}"
            if q.stats is not None:
                line += f" norm(mu={q.stats.mu:.6g}, sigma={q.stats.sigma:.6g})"
            print(line)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="holonet",
        description="Boundary-trained holomorphic networks for 2D elliptic "
                    "problems",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the run seed (HOLONET_SEED is the "
                             "fallback when neither flag nor config set one)")
    common.add_argument("--out-dir", default=None)
    common.add_argument("--grid", type=int, default=None,
                        help="field CSV resolution")
    common.add_argument("--threads", type=int, default=None,
                        help="shard residual evaluation across K threads "
                             "(K>1 voids bit-reproducibility)")

    p_run = sub.add_parser("run", parents=[common], help="train from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(fn=cmd_run)

    p_bench = sub.add_parser("bench", parents=[common], help="run a named benchmark")
    p_bench.add_argument("name")
    p_bench.set_defaults(fn=cmd_bench)

    p_grad = sub.add_parser("gradcheck", parents=[common],
                            help="autodiff vs finite-difference check")
    p_grad.add_argument("--config", required=True)
    p_grad.set_defaults(fn=cmd_gradcheck)

    p_ins = sub.add_parser("inspect", help="summarize a checkpoint")
    p_ins.add_argument("checkpoint")
    p_ins.set_defaults(fn=cmd_inspect)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, HolonetError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
