"""Command-line front end.

    hele-shaw run --config exp.json          weak or classical experiment
    hele-shaw verify all                     acceptance table
    hele-shaw schwarz --curve c.json         Schwarz data as JSON
    hele-shaw quadcheck --polymap 1,0.3      quadrature identity residual
    hele-shaw momentflow --curve c.json --field cos:1 --K 8
    hele-shaw regmax --eps 0.1               gluing construction checks

Outputs go to --out, else $OUTPUT_DIR, else the config's "output" entry.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acceptance import SUITES, run_suite
from .cauchy import schwarz_construct
from .core import DensityField, MarkerCurve, circle, ellipse
from .fronttrack import run_classical
from .moments import MomentSeries, richardson_drift
from .momentflow import NormalField, moment_derivative
from .obstacle import weak_flow
from .potentials import glue_potential
from .quadrature import QuadratureData, polynomial_map_curve, quad_check


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    solver: str = "weak"
    domain: dict = field(default_factory=lambda: {"type": "empty"})
    markers: int = 256
    rho: str = "const:1"
    kappa: str = "const:1"
    h: float = 1 / 128
    box: list | None = None
    times: list | None = None
    tmax: float = 0.5
    frames: int = 5
    T: float = 0.3
    dt: float = 1e-3
    omega: float | None = None
    tol: float = 1e-10
    rk2: bool = False
    allow_backward: bool = False
    output: str = "output"
    seed: int = 0
    grid_csv: bool = False

    @classmethod
    def from_dict(cls, obj: dict, base: Path | None = None) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        for k in obj:
            if k not in known:
                raise ConfigError(k, "unknown field")
        cfg = cls(**obj)
        cfg.validate(base)
        return cfg

    def validate(self, base: Path | None = None) -> None:
        if self.solver not in ("weak", "classical"):
            raise ConfigError("solver", "must be 'weak' or 'classical'")
        for name in ("rho", "kappa"):
            try:
                DensityField.parse(getattr(self, name))
            except ValueError as exc:
                raise ConfigError(name, str(exc)) from None
        if not (isinstance(self.markers, int) and 16 <= self.markers <= 4096):
            raise ConfigError("markers", "must be an integer in [16, 4096]")
        if not (isinstance(self.h, (int, float)) and 0 < self.h <= 0.25):
            raise ConfigError("h", "must lie in (0, 0.25]")
        if self.box is not None:
            if not (isinstance(self.box, list) and len(self.box) == 4):
                raise ConfigError("box", "must be [xmin, ymin, xmax, ymax]")
            x0, y0, x1, y1 = self.box
            if not (x0 < 0 < x1 and y0 < 0 < y1):
                raise ConfigError("box", "must contain the origin strictly inside")
        if self.times is not None:
            t = self.times
            if not (isinstance(t, list) and t and all(isinstance(v, (int, float)) and v >= 0 for v in t)
                    and all(b > a for a, b in zip(t, t[1:]))):
                raise ConfigError("times", "must be a non-empty increasing list of non-negative numbers")
        if not (isinstance(self.frames, int) and self.frames >= 1):
            raise ConfigError("frames", "must be a positive integer")
        if not self.tmax > 0:
            raise ConfigError("tmax", "must be positive")
        if not self.dt > 0:
            raise ConfigError("dt", "must be positive")
        if self.T < 0 and not self.allow_backward:
            raise ConfigError("T", "negative T needs allow_backward")
        if self.omega is not None and not 0 < self.omega < 2:
            raise ConfigError("omega", "must lie in (0, 2)")
        if not self.tol > 0:
            raise ConfigError("tol", "must be positive")
        self.initial_curve(base)

    def initial_curve(self, base: Path | None = None) -> MarkerCurve | None:
        d = self.domain
        if not isinstance(d, dict) or "type" not in d:
            raise ConfigError("domain", "must be an object with a 'type'")
        kind = d["type"]
        n = self.markers
        try:
            if kind == "empty":
                if self.solver == "classical":
                    raise ConfigError("domain", "the classical solver needs a nonempty initial domain")
                return None
            if kind == "disc":
                c = d.get("center", [0.0, 0.0])
                return circle(n, float(d["r"]), complex(c[0], c[1]))
            if kind == "ellipse":
                c = d.get("center", [0.0, 0.0])
                return ellipse(n, float(d["a"]), float(d["b"]), complex(c[0], c[1]))
            if kind == "polymap":
                return polynomial_map_curve(float(d["a"]), float(d["b"]), n)[0]
            if kind == "curve":
                path = Path(d["path"])
                if base is not None and not path.is_absolute():
                    path = base / path
                if not path.exists():
                    raise ConfigError("domain", f"curve file {path} does not exist")
                return MarkerCurve.load(path)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("domain", f"bad {kind} parameters: {exc}") from None
        raise ConfigError("domain", f"unknown domain type {kind!r}")

    def time_grid(self) -> list[float]:
        if self.times is not None:
            return [float(t) for t in self.times]
        return [self.tmax * (i + 1) / self.frames for i in range(self.frames)]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_frame(path: Path, t: float, curve: MarkerCurve | None) -> None:
    obj = {"t": float(t), "markers": [] if curve is None else curve.to_json()["markers"]}
    path.write_text(json.dumps(obj) + "\n")


def write_svg(path: Path, curves: list[MarkerCurve | None], size: int = 480) -> None:
    """Overlay of the boundary frames, early frames light, late frames dark."""
    pts = [c.markers for c in curves if c is not None]
    if not pts:
        path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}"/>\n')
        return
    allz = np.concatenate(pts)
    lo = complex(allz.real.min(), allz.imag.min())
    span = max(allz.real.max() - lo.real, allz.imag.max() - lo.imag) or 1.0
    pad = 0.05 * span
    scale = size / (span + 2 * pad)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    k = len(pts)
    for i, z in enumerate(pts):
        x = (z.real - lo.real + pad) * scale
        y = size - (z.imag - lo.imag + pad) * scale
        shade = int(200 - 180 * (i / max(k - 1, 1)))
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        lines.append(f'<polygon points="{coords}" fill="none" '
                     f'stroke="rgb({shade},{shade},255)" stroke-width="1"/>')
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")


def _drift_report(series: MomentSeries) -> dict:
    if len(series.times) < 2:
        return {"drift": []}
    d = richardson_drift(series)
    return {"drift": [float(v) for v in d]}


def run_experiment(cfg: ExperimentConfig, out: Path, base: Path | None = None) -> dict:
    np.random.seed(cfg.seed)
    omega0 = cfg.initial_curve(base)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    if cfg.solver == "weak":
        rho = DensityField.parse(cfg.rho)
        box = None if cfg.box is None else (complex(cfg.box[0], cfg.box[1]), complex(cfg.box[2], cfg.box[3]))
        fl = weak_flow(omega0, rho, cfg.time_grid(), cfg.h, box=box, omega=cfg.omega, tol=cfg.tol)
        curves = [ws.boundary for ws in fl.frames]
        for i, (t, c) in enumerate(zip(fl.times, curves)):
            write_frame(frames_dir / f"frame_{i:04d}.json", t, c)
            if cfg.grid_csv:
                fl.frames[i].u.write_csv(frames_dir / f"u_{i:04d}.csv")
        series = fl.moments
        report = _drift_report(series)
        report["iterations"] = [int(ws.iterations) for ws in fl.frames]
    else:
        kappa = DensityField.parse(cfg.kappa)
        kap = kappa.params[0] if kappa.kind == "constant" else kappa
        run = run_classical(omega0, kap, cfg.T, cfg.dt, rk2=cfg.rk2, allow_backward=cfg.allow_backward)
        curves = run.frames
        stride = max(1, (len(curves) - 1) // 50)
        for i in range(0, len(curves), stride):
            write_frame(frames_dir / f"frame_{i:04d}.json", run.times[i], curves[i])
        if (len(curves) - 1) % stride:
            write_frame(frames_dir / f"frame_{len(curves) - 1:04d}.json", run.times[-1], curves[-1])
        series = run.moments
        report = _drift_report(series)
        final = curves[-1].markers
        report["final_mean_radius"] = float(np.abs(final).mean())
        report["max_flux_error"] = float(np.abs(np.asarray(run.flux) - 1).max()) if run.flux else 0.0
        curves = curves[::stride] + ([curves[-1]] if (len(curves) - 1) % stride else [])
    series.write_csv(out / "moments.csv")
    (out / "drift.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_svg(out / "evolution.svg", curves)
    return report


def _output_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if os.environ.get("OUTPUT_DIR"):
        return Path(os.environ["OUTPUT_DIR"])
    return Path(cfg.output if cfg is not None else "output")


_FLAG_FIELDS = ("solver", "h", "tmax", "frames", "omega", "tol", "dt", "T", "markers",
                "kappa", "rho", "seed")


def cmd_run(args) -> int:
    base = None
    obj: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError("config", f"file {path} does not exist")
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        base = path.parent
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            obj[name] = v
    if args.box is not None:
        obj["box"] = [float(v) for v in args.box.split(",")]
    if args.domain is not None:
        obj["domain"] = parse_domain(args.domain)
    if args.allow_backward:
        obj["allow_backward"] = True
    if args.rk2:
        obj["rk2"] = True
    if args.grid_csv:
        obj["grid_csv"] = True
    cfg = ExperimentConfig.from_dict(obj, base)
    out = _output_dir(args, cfg)
    report = run_experiment(cfg, out, base)
    print(json.dumps(report, sort_keys=True))
    return 0


def parse_domain(text: str) -> dict:
    """``empty``, ``disc:r[,cx,cy]``, ``ellipse:a,b``, ``polymap:a,b`` or ``curve:path``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "empty":
            return {"type": "empty"}
        if kind == "curve":
            return {"type": "curve", "path": rest}
        vals = [float(v) for v in rest.split(",")]
        if kind == "disc":
            c = vals[1:3] if len(vals) == 3 else [0.0, 0.0]
            return {"type": "disc", "r": vals[0], "center": c}
        if kind in ("ellipse", "polymap"):
            return {"type": kind, "a": vals[0], "b": vals[1]}
    except (ValueError, IndexError):
        pass
    raise ConfigError("domain", f"cannot parse domain {text!r}")


def cmd_verify(args) -> int:
    checks = run_suite(args.suite)
    for c in checks:
        print(c.line())
    graded = [c for c in checks if not c.info]
    failed = sum(not c.passed for c in graded)
    print(f"{len(graded) - failed}/{len(graded)} checks passed")
    return 0 if failed == 0 else 1


def _load_curve(path: str) -> MarkerCurve:
    p = Path(path)
    if not p.exists():
        raise ConfigError("curve", f"file {p} does not exist")
    return MarkerCurve.load(p)


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_schwarz(args) -> int:
    curve = _load_curve(args.curve)
    rho = DensityField.parse(args.rho)
    if not rho.has_potential:
        raise ConfigError("rho", "Schwarz data need a constant or linear density")
    sd = schwarz_construct(curve, rho.potential_dz)
    _emit(sd.to_json(), args.out)
    return 0


def cmd_quadcheck(args) -> int:
    if args.polymap:
        try:
            a, b = (float(v) for v in args.polymap.split(","))
        except ValueError:
            raise ConfigError("polymap", "expected a,b") from None
        curve, qd = polynomial_map_curve(a, b, args.markers)
    else:
        if not (args.curve and args.data):
            raise ConfigError("curve", "give --polymap or both --curve and --data")
        curve = _load_curve(args.curve)
        p = Path(args.data)
        if not p.exists():
            raise ConfigError("data", f"file {p} does not exist")
        qd = QuadratureData.from_json(json.loads(p.read_text()))
    _emit({"K": args.K, "residual": quad_check(curve, qd, args.K), "data": qd.to_json()}, args.out)
    return 0


def cmd_momentflow(args) -> int:
    curve = _load_curve(args.curve) if args.curve else circle(args.markers)
    rho = DensityField.parse(args.rho)
    try:
        nf = NormalField.parse(curve, args.field)
    except ValueError as exc:
        raise ConfigError("field", str(exc)) from None
    d, d2 = moment_derivative(nf, rho, args.K)
    pair = lambda v: [[float(c.real), float(c.imag)] for c in v]  # noqa: E731
    _emit({"d": pair(d), "d_tail": pair(d2), "max_abs_difference": float(np.abs(d - d2).max())}, args.out)
    return 0


def cmd_regmax(args) -> int:
    c = args.cubic

    def phi(z):
        return np.abs(z) ** 2 + c * np.real(z**3)
    res = glue_potential(phi, args.eps)
    _emit({"params": res.params(), "checks": res.checks}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hele-shaw", description="Planar Hele-Shaw flow lab")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a weak or classical experiment")
    r.add_argument("--config", help="experiment JSON")
    r.add_argument("--out", help="output directory")
    r.add_argument("--solver", choices=["weak", "classical"])
    r.add_argument("--domain", help="empty | disc:r[,cx,cy] | ellipse:a,b | polymap:a,b | curve:path")
    r.add_argument("--h", type=float)
    r.add_argument("--box", help="xmin,ymin,xmax,ymax")
    r.add_argument("--omega", type=float)
    r.add_argument("--tol", type=float)
    r.add_argument("--tmax", type=float)
    r.add_argument("--frames", type=int)
    r.add_argument("--dt", type=float)
    r.add_argument("--T", type=float)
    r.add_argument("--markers", type=int)
    r.add_argument("--kappa")
    r.add_argument("--rho")
    r.add_argument("--seed", type=int)
    r.add_argument("--rk2", action="store_true")
    r.add_argument("--allow-backward", action="store_true")
    r.add_argument("--grid-csv", action="store_true", help="also write u per frame (weak solver)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run acceptance checks")
    v.add_argument("suite", choices=sorted(SUITES))
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("schwarz", help="Schwarz data of a curve")
    s.add_argument("--curve", required=True)
    s.add_argument("--rho", default="const:1")
    s.add_argument("--out")
    s.set_defaults(func=cmd_schwarz)

    q = sub.add_parser("quadcheck", help="quadrature identity residual")
    q.add_argument("--curve")
    q.add_argument("--data", help="quadrature data JSON")
    q.add_argument("--polymap", help="a,b for the map w -> a w + b w^2")
    q.add_argument("--markers", type=int, default=256)
    q.add_argument("--K", type=int, default=6)
    q.add_argument("--out")
    q.set_defaults(func=cmd_quadcheck)

    m = sub.add_parser("momentflow", help="moment derivatives by both routes")
    m.add_argument("--curve")
    m.add_argument("--markers", type=int, default=256)
    m.add_argument("--field", default="const:1")
    m.add_argument("--rho", default="const:1")
    m.add_argument("--K", type=int, default=8)
    m.add_argument("--out")
    m.set_defaults(func=cmd_momentflow)

    g = sub.add_parser("regmax", help="gluing construction and its checks")
    g.add_argument("--eps", type=float, default=0.1)
    g.add_argument("--cubic", type=float, default=0.1, help="c in phi = |z|^2 + c Re(z^3)")
    g.add_argument("--out")
    g.set_defaults(func=cmd_regmax)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
