"""Command line entry point: ``bilipext <command> ...``."""
import argparse
import json
import sys

import numpy as np

from . import schema
from .errors import BilipError
from .geom import SeparatedNet, poisson_disk_net
from .lattice import PointMap, extend_to_lattice, round_net_to_lattice
from .maps import map_from_dict
from .render import RenderSpec, render_grid
from .routing import LatticePerm, build_upsilon, route_grid, tile_decompose
from .slab_threading import LayeredPointMap, SlabSystem, glue_slabs, thread
from .verify import audit


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _box(values, what):
    if len(values) % 2:
        raise BilipError(f"{what} needs an even number of coordinates (lo..., hi...)")
    k = len(values) // 2
    return np.array(values[:k]), np.array(values[k:])


def _emit(args, kind, data):
    text = schema.dumps(kind, data)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_gen_net(args):
    window = _box(args.window, "--window")
    if len(window[0]) != args.dim:
        raise BilipError("--window does not match --dim")
    net = poisson_disk_net(args.dim, args.sep, window, seed=args.seed)
    _emit(args, "separated-net", net.to_dict())


def cmd_round_net(args):
    net = SeparatedNet.from_dict(schema.read(args.net, "separated-net"))
    Phi, images, cert = round_net_to_lattice(net)
    if args.images:
        schema.write(args.images, "point-map", images.to_dict())
    if args.cert:
        schema.write(args.cert, "swap-family", cert.swap_family.to_dict())
    _emit(args, "map", Phi.to_dict())


def cmd_extend_lattice(args):
    f = PointMap.from_dict(schema.read(args.input, "point-map"))
    window = _box(args.window, "--window")
    ext = extend_to_lattice(f, args.lam, window)
    _emit(args, "point-map", ext.to_dict())


def _shifted(perm):
    pts = np.array(sorted(perm.support))
    lo = pts.min(axis=0)
    shape = tuple(int(v) for v in pts.max(axis=0) - lo + 1)
    shift = lambda x: tuple(int(a - b) for a, b in zip(x, lo))
    return {shift(a): shift(b) for a, b in perm.moved.items()}, shape, lo


def cmd_route_perm(args):
    perm = LatticePerm.from_dict(schema.read(args.perm, "lattice-perm"))
    if perm.is_identity():
        _emit(args, "routing-schedule", {"rounds": []})
        return
    moved, shape, lo = _shifted(perm)
    sched = route_grid(moved, shape)
    back = lambda x: [int(a + b) for a, b in zip(x, lo)]
    _emit(args, "routing-schedule", {"rounds": [[[back(a), back(b)] for a, b in rnd] for rnd in sched.rounds]})


def cmd_decompose_perm(args):
    perm = LatticePerm.from_dict(schema.read(args.perm, "lattice-perm"))
    _emit(args, "tile-decomposition", tile_decompose(perm, args.T).to_dict())


def cmd_build_upsilon(args):
    perm = LatticePerm.from_dict(schema.read(args.perm, "lattice-perm"))
    _emit(args, "map", build_upsilon(perm, perm.scale_N, args.T, args.m).to_dict())


def cmd_thread(args):
    data = LayeredPointMap.from_dict(schema.read(args.input, "layered-point-map"))
    _emit(args, "map", thread(data).to_dict())


def cmd_glue_slabs(args):
    system = SlabSystem.from_dict(schema.read(args.system, "slab-system"))
    _emit(args, "map", glue_slabs(system).to_dict())


def cmd_verify(args):
    m = map_from_dict(schema.read(args.map, "map"))
    region = _box(args.region, "--region")
    src = img = None
    if args.designated:
        pm = PointMap.from_dict(schema.read(args.designated, "point-map"))
        src, img = pm.sources, pm.images
    rep = audit(m, region, n_pairs=args.pairs, seed=args.seed, sources=src, images=img, map_id=args.map)
    _emit(args, "audit-report", rep.to_dict())
    return 0 if rep.passed else 1


def cmd_render(args):
    m = map_from_dict(schema.read(args.map, "map"))
    spec = RenderSpec(args.pitch, tuple(args.viewport), width=args.width)
    designated = None
    if args.designated:
        pm = PointMap.from_dict(schema.read(args.designated, "point-map"))
        designated = (pm.sources, pm.images)
    svg = render_grid(m, spec, designated)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(svg)
    else:
        sys.stdout.write(svg)


def build_parser():
    p = argparse.ArgumentParser(prog="bilipext", description="Bilipschitz extension constructions.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = add("gen-net", cmd_gen_net, "generate a separated net")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--sep", type=float, required=True)
    sp.add_argument("--window", type=_floats, required=True, help="lo...,hi...")

    sp = add("round-net", cmd_round_net, "round a net into the integer lattice")
    sp.add_argument("--net", "--in", dest="net", required=True)
    sp.add_argument("--images", help="also write the net-to-lattice point map here")
    sp.add_argument("--cert", help="also write the rounding swap family here")

    sp = add("extend-lattice", cmd_extend_lattice, "extend a lattice point map to a window")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--lam", "--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--window", type=_floats, required=True)

    sp = add("route-perm", cmd_route_perm, "route a grid permutation")
    sp.add_argument("--perm", required=True)

    sp = add("decompose-perm", cmd_decompose_perm, "split a permutation into tile-local pieces")
    sp.add_argument("--perm", required=True)
    sp.add_argument("--T", type=int, required=True)

    sp = add("build-upsilon", cmd_build_upsilon, "realise a lattice permutation inside a slab")
    sp.add_argument("--perm", required=True)
    sp.add_argument("--T", type=int, required=True)
    sp.add_argument("--m", type=float, default=0.0)

    sp = add("thread", cmd_thread, "extend layered data through a slab")
    sp.add_argument("--in", dest="input", required=True)

    sp = add("glue-slabs", cmd_glue_slabs, "thread and glue a system of slabs")
    sp.add_argument("--system", required=True)

    sp = add("verify", cmd_verify, "audit a map")
    sp.add_argument("--map", required=True)
    sp.add_argument("--region", type=_floats, required=True, help="lo...,hi...")
    sp.add_argument("--pairs", type=int, default=10_000)
    sp.add_argument("--designated", help="point map whose pairs the map must interpolate")

    sp = add("render", cmd_render, "draw a planar map as SVG")
    sp.add_argument("--map", required=True)
    sp.add_argument("--pitch", type=float, default=0.25)
    sp.add_argument("--viewport", type=_floats, default=[-2.0, -1.0, 2.0, 3.0])
    sp.add_argument("--width", type=int, default=800)
    sp.add_argument("--designated")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.fn(args)
    except BilipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
