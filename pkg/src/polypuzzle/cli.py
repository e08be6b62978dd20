"""Command line front end.

Four modes: ``yoccoz`` (quadratic pipeline with verdict JSON), ``bh``
(higher-degree grid puzzle with component report), ``render`` (escape-time
raster with puzzle overlays, written as binary PGM), and ``tableau`` (ASCII
and JSON tableaux).  Exit codes: 0 verdict produced, 2 hypothesis gate
failed, 1 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import pickle
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import tableau as tb
from .bhpuzzle import (
    BHConfig,
    bernoulli_coding,
    bh_build,
    bh_tableau,
    classify_components,
    polylike_extract,
)
from .dyncore import PolynomialMap, trace_ray
from .errors import ContainmentFails, CriticalInPiece, OrbitHitsAlpha, PolyPuzzleError
from .lcert import analyze_quadratic
from .puzzle import build_tower

SCHEMA_VERSION = "1"


def parse_complex(text: str) -> complex:
    """Parse 'a+bi' / 'a-bi' / 'a' / 'bi' with optional exponents."""
    s = text.strip().replace(" ", "")
    if s.endswith("j"):
        s = s[:-1] + "i"
    if not s.endswith("i"):
        return complex(float(s), 0.0)
    body = s[:-1]
    m = re.match(r"^([+-]?[0-9.]+(?:[eE][+-]?[0-9]+)?)?([+-][0-9.]*(?:[eE][+-]?[0-9]+)?)$",
                 body)
    if m and m.group(1) is not None:
        re_part = float(m.group(1))
        im_text = m.group(2)
        if im_text in ("+", "-"):
            im_text += "1"
        return complex(re_part, float(im_text))
    if body in ("", "+", "-"):
        body += "1"
    return complex(0.0, float(body))


def parse_poly(text: str) -> PolynomialMap:
    """Comma-separated coefficients, constant term first."""
    coeffs = [parse_complex(part) for part in text.split(",")]
    return PolynomialMap(tuple(coeffs))


def parse_depths(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.split(",")]


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def write_json(data: dict, path: str | None):
    text = json.dumps(data, indent=2, default=_json_default, allow_nan=False)
    if path:
        Path(path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _cached_trace(pmap: PolynomialMap, angle: Fraction, g_stop: float):
    cache_dir = os.environ.get("PUZZLE_CACHE_DIR")
    if not cache_dir:
        return trace_ray(pmap, angle, g_stop=g_stop)
    key = hashlib.sha1(repr((pmap.coefficients, angle, g_stop)).encode()).hexdigest()
    path = Path(cache_dir) / f"ray-{key}.pkl"
    if path.exists():
        with open(path, "rb") as fh:
            return pickle.load(fh)
    ray = trace_ray(pmap, angle, g_stop=g_stop)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        pickle.dump(ray, fh)
    return ray


# ---------------------------------------------------------------------------
# yoccoz mode
# ---------------------------------------------------------------------------


def cmd_yoccoz(args) -> int:
    c = parse_complex(args.c)
    try:
        res = analyze_quadratic(
            c, depth_budget=args.depth, threshold=args.threshold,
            shrink_depth=args.shrink_depth)
    except PolyPuzzleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = {"schema": f"yoccoz-report/v{SCHEMA_VERSION}"}
    report.update(res.to_json())
    write_json(report, args.out)
    if res.verdict.kind == "hypothesis_failed":
        print(f"hypothesis gate failed: {res.verdict.reason}", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# bh mode
# ---------------------------------------------------------------------------


def cmd_bh(args) -> int:
    pmap = parse_poly(args.poly)
    cfg = BHConfig(base_cells=args.grid,
                   designated_bounded=(parse_complex(args.bounded)
                                       if args.bounded else None))
    try:
        puzzle = bh_build(pmap, cfg, max_depth=args.depth)
    except PolyPuzzleError as exc:
        print(f"hypothesis gate failed: {exc}", file=sys.stderr)
        return 2
    report = {
        "schema": f"bh-report/v{SCHEMA_VERSION}",
        "puzzle": puzzle.to_json(),
        "notes": puzzle.notes,
    }
    try:
        if puzzle.bounded_critical is not None:
            tab = bh_tableau(puzzle, puzzle.bounded_critical,
                             width=max(8, args.width))
            report["critical_tableau"] = tab.to_json()
            rep = classify_components(puzzle, tab)
            report["components"] = rep.to_json()
            if rep.period is not None:
                try:
                    pl = polylike_extract(puzzle, tab, rep.period)
                    report["polynomial_like"] = pl.to_json()
                except ContainmentFails as exc:
                    report["polynomial_like"] = {"error": str(exc)}
        else:
            rep = classify_components(puzzle)
            report["components"] = rep.to_json()
            coding = bernoulli_coding(puzzle)
            report["coding"] = coding.to_json()
    except (PolyPuzzleError, CriticalInPiece) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_json(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# render mode
# ---------------------------------------------------------------------------


def write_pgm(path: str, img: np.ndarray):
    """Binary PGM (P5), the bit-exact raster contract."""
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.astype(np.uint8).tobytes())


def maybe_write_png(path: str, img: np.ndarray) -> bool:
    try:
        from PIL import Image
    except ImportError:
        return False
    Image.fromarray(img.astype(np.uint8), mode="L").save(path)
    return True


def escape_raster(pmap: PolynomialMap, *, size: int, center: complex,
                  span: float, max_iter: int = 96) -> np.ndarray:
    xs = np.linspace(center.real - span / 2, center.real + span / 2, size)
    ys = np.linspace(center.imag + span / 2, center.imag - span / 2, size)
    Z = xs[None, :] + 1j * ys[:, None]
    z = Z.copy()
    counts = np.full(Z.shape, max_iter, dtype=float)
    alive = np.ones(Z.shape, dtype=bool)
    radius = pmap.escape_radius()
    for n in range(max_iter):
        z[alive] = pmap(z[alive])
        esc = alive & (np.abs(z) > radius)
        counts[esc] = n
        alive &= ~esc
    img = (255.0 * counts / max_iter).clip(0, 255)
    img[~alive & (counts == 0)] = 0
    return img.astype(np.uint8)


def overlay_pieces(img: np.ndarray, tower, depths: list[int], *,
                   center: complex, span: float):
    size = img.shape[0]
    for d in depths:
        if d > tower.max_depth:
            continue
        for piece in tower.pieces(d):
            b = piece.boundary
            xs = ((b.real - (center.real - span / 2)) / span * (size - 1)).round()
            ys = (((center.imag + span / 2) - b.imag) / span * (size - 1)).round()
            ok = (xs >= 0) & (xs < size) & (ys >= 0) & (ys < size)
            img[ys[ok].astype(int), xs[ok].astype(int)] = 255


def cmd_render(args) -> int:
    if args.poly:
        pmap = parse_poly(args.poly)
    else:
        pmap = PolynomialMap.quadratic(parse_complex(args.c))
    depths = parse_depths(args.depths) if args.depths else []
    size = args.grid
    beta_guess = pmap.escape_radius()
    span = args.span if args.span else 2.2 * beta_guess / 2
    center = 0j
    img = escape_raster(pmap, size=size, center=center, span=span)
    rays_csv = []
    if depths and pmap.is_quadratic and pmap.coefficients[1] == 0:
        try:
            tower = build_tower(pmap, max(depths))
            overlay_pieces(img, tower, depths, center=center, span=span)
            if args.csv:
                for t in tower.alpha_angles:
                    ray = _cached_trace(pmap, t, 2.0**-40)
                    for z, g in zip(ray.points, ray.potentials):
                        rays_csv.append(f"{t},{z.real!r},{z.imag!r},{g!r}")
        except PolyPuzzleError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    out = args.out or "render"
    write_pgm(out + ".pgm", img)
    wrote_png = maybe_write_png(out + ".png", img) if args.png else False
    if args.csv:
        Path(out + ".rays.csv").write_text(
            "angle,re,im,G\n" + "\n".join(rays_csv) + "\n")
    areas = {}
    if depths and pmap.is_quadratic and pmap.coefficients[1] == 0:
        for d in depths:
            if d <= tower.max_depth:
                pieces = tower.pieces(d)
                biggest = max(pieces, key=lambda p: p.area())
                areas[str(d)] = {
                    "pieces": len(pieces),
                    "max_area_label": biggest.label,
                    "max_area_is_critical": biggest.index == tower.critical_indices[d],
                }
    if args.json_out:
        write_json({"schema": f"render-report/v{SCHEMA_VERSION}",
                    "pgm": out + ".pgm", "png": wrote_png, "size": size,
                    "span": span, "areas_by_depth": areas}, args.json_out)
    return 0


# ---------------------------------------------------------------------------
# tableau mode
# ---------------------------------------------------------------------------


def cmd_tableau(args) -> int:
    if args.fibonacci:
        t = tb.fibonacci_tableau(args.depth, args.width)
    else:
        pmap = PolynomialMap.quadratic(parse_complex(args.c))
        z0 = parse_complex(args.z) if args.z else 0.0
        try:
            tower = build_tower(pmap, 1)
            t = tb.tableau_from_orbit(tower, z0, args.width, args.depth)
        except OrbitHitsAlpha as exc:
            print(f"orbit hits alpha at column {exc.column}", file=sys.stderr)
            return 1
        except PolyPuzzleError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        if t.alpha_hit is not None:
            print(f"note: orbit hits alpha; tableau truncated at column "
                  f"{t.alpha_hit[0]}", file=sys.stderr)
    print(t.render())
    if args.json_path:
        data = {"schema": f"tableau/v{SCHEMA_VERSION}"}
        data.update(t.to_json())
        write_json(data, args.json_path)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polypuzzle",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="mode", required=True)

    y = sub.add_parser("yoccoz", help="quadratic puzzle pipeline")
    y.add_argument("--c", required=True, help="parameter of z^2+c, e.g. -1.75 or 0+1i")
    y.add_argument("--depth", type=int, default=24, help="depth budget")
    y.add_argument("--threshold", type=float, default=2.0,
                   help="partial-sum threshold for the divergence certificate")
    y.add_argument("--shrink-depth", type=int, default=8)
    y.add_argument("--out", help="write the JSON report here")
    y.set_defaults(func=cmd_yoccoz)

    b = sub.add_parser("bh", help="grid puzzle for degree >= 3")
    b.add_argument("--poly", required=True,
                   help="coefficients a0,a1,...,ad (constant first)")
    b.add_argument("--depth", type=int, default=5)
    b.add_argument("--width", type=int, default=8)
    b.add_argument("--grid", type=int, default=420, help="base grid cells")
    b.add_argument("--bounded", help="designate the bounded critical point")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bh)

    r = sub.add_parser("render", help="escape-time raster with puzzle overlay")
    r.add_argument("--c", help="quadratic parameter")
    r.add_argument("--poly", help="general coefficients")
    r.add_argument("--depths", help="overlay depths, e.g. 0,1 or 0..5")
    r.add_argument("--grid", type=int, default=512, help="image size in pixels")
    r.add_argument("--span", type=float, help="width of the view window")
    r.add_argument("--out", help="output path prefix")
    r.add_argument("--png", action="store_true", help="also write PNG if available")
    r.add_argument("--csv", action="store_true", help="export ray polylines as CSV")
    r.add_argument("--json", dest="json_out", help="write a JSON summary")
    r.set_defaults(func=cmd_render)

    t = sub.add_parser("tableau", help="print a tableau")
    t.add_argument("--c", help="quadratic parameter")
    t.add_argument("--z", help="orbit start (default: the critical point)")
    t.add_argument("--depth", type=int, default=10)
    t.add_argument("--width", type=int, default=16)
    t.add_argument("--fibonacci", action="store_true",
                   help="print the generated Fibonacci tableau instead")
    t.add_argument("--json", dest="json_path", help="write the tableau as JSON")
    t.set_defaults(func=cmd_tableau)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.mode == "tableau" and not args.fibonacci and not args.c:
        print("tableau mode needs --c or --fibonacci", file=sys.stderr)
        return 2
    if args.mode == "render" and not (args.c or args.poly):
        print("render mode needs --c or --poly", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except PolyPuzzleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
