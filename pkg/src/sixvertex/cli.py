"""Command-line entry point: enumerate, sample, constants, verify."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .core import DomainError, PhaseParams, WeightTriple, classify_phase, delta, params_from_weights, weights_from_params

__all__ = ["RunConfig", "build_parser", "main", "cmd_enumerate", "cmd_sample", "cmd_constants", "cmd_verify"]

MODELS = ("dwbc-exact", "dwbc-mcmc", "stochastic", "mallows", "qshuffle", "gue", "eta")
THEOREM_IDS = ("T2.4", "T2.5", "T2.6", "T2.7", "gaussian", "geom", "mallows", "eta", "corners")

DEFAULTS: dict[str, Any] = {
    "weights": None,
    "phase_params": None,
    "n": 4,
    "k": 2,
    "draws": 10,
    "sweeps": None,
    "burn_in": None,
    "seed": 0,
    "stream": 0,
    "bits": 256,
    "out": None,
    "format": None,
    "xi": None,
    "grid": None,
    "q": None,
    "theta": 1.0,
    "a": None,
    "b": None,
}


@dataclass
class RunConfig:
    """Everything a run depends on; a run is reproducible from this."""

    command: str
    target: str | None = None
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


# ---------------------------------------------------------------------------
# parsing helpers


def _floats(text: str | Sequence) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str | Sequence) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _complexes(text: str | Sequence) -> list[complex | float]:
    vals = text if isinstance(text, (list, tuple)) else str(text).split(",")
    out: list[complex | float] = []
    for v in vals:
        z = complex(str(v).strip().replace(" ", ""))
        out.append(z.real if z.imag == 0 else z)
    return out


def _weights(params: dict) -> WeightTriple:
    if params.get("weights") is not None:
        vals = _floats(params["weights"])
        if len(vals) != 3:
            raise DomainError("--weights needs a,b,c")
        return WeightTriple(*vals)
    if params.get("phase_params") is not None:
        parts = str(params["phase_params"]).split(",") if not isinstance(params["phase_params"], list) else params["phase_params"]
        if len(parts) != 3:
            raise DomainError("--phase-params needs t,gamma,case")
        return weights_from_params(PhaseParams(str(parts[2]).strip(), float(parts[0]), float(parts[1])))
    raise DomainError("give --weights or --phase-params")


def _rng(params: dict):
    from .samplers import RngSeed

    return RngSeed(int(params["seed"]), int(params["stream"])).generator()


def _prec(params: dict):
    from .exactpf import PrecisionCtx

    return PrecisionCtx(mantissa_bits=int(params["bits"]))


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path: str | os.PathLike | None, text: str) -> None:
    """Write to a temporary file next to ``path`` and rename it into place."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _side_path(out: str | None, suffix: str) -> str | None:
    if out is None or out == "-":
        return None
    p = Path(out)
    return str(p.with_name(p.stem + suffix + (p.suffix or ".csv")))


# ---------------------------------------------------------------------------
# commands


def _triangle_text(rows) -> str:
    return "|".join(" ".join(str(v) for v in r) for r in rows)


def cmd_enumerate(params: dict) -> tuple[str, bool]:
    from .exactpf import enumerate_dwbc

    n = int(params["n"])
    w = _weights(params)
    en = enumerate_dwbc(n, w)
    probs = en.probabilities()
    records = []
    for i, (tri, cfg, wt) in enumerate(zip(en.triangles, en.configurations, en.weights)):
        na, nb, nc = cfg.class_counts()
        records.append((i, _triangle_text(tri.rows), na, nb, nc, repr(wt), repr(float(probs[i]))))
    if params["format"] == "json":
        keys = ("config_id", "triangle", "n_a", "n_b", "n_c", "weight", "probability")
        return _json_text({"n": n, "Z": en.Z, "configurations": [dict(zip(keys, r)) for r in records]}), True
    return _csv_text(("config_id", "triangle", "n_a", "n_b", "n_c", "weight", "probability"), records), True


def _triangle_rows(draws) -> list[tuple]:
    out = []
    for d, rows in enumerate(draws):
        for k, r in enumerate(rows, start=1):
            for i, v in enumerate(r, start=1):
                out.append((d, k, i, repr(v)))
    return out


def cmd_sample(model: str, params: dict) -> tuple[str, bool, dict[str, str]]:
    from . import samplers as S

    gen = _rng(params)
    draws = int(params["draws"])
    n = int(params["n"])
    k = int(params["k"])
    extra: dict[str, str] = {}
    header: tuple[str, ...] = ("draw_id", "k", "i", "value")
    if model in ("dwbc-exact", "dwbc-mcmc"):
        w = _weights(params)
        if model == "dwbc-exact":
            cfgs = [S.sample_dwbc_exact(n, w, gen) for _ in range(draws)]
        else:
            burn = int(params["burn_in"] or S.default_burn_in(n))
            sweeps = int(params["sweeps"] or max(10, n))
            ch = S.DwbcChain(n, w, gen)
            ch.run(burn)
            cfgs = []
            for _ in range(draws):
                ch.run(sweeps)
                cfgs.append(ch.state())
        from .core import triangle_from_configuration

        rows = _triangle_rows([triangle_from_configuration(c).rows for c in cfgs])
        dots = [(d, x, y, int(cfg.at(x, y))) for d, cfg in enumerate(cfgs) for x, y in cfg.c_vertices()]
        extra["cvertices"] = _csv_text(("draw_id", "x", "y", "type"), dots)
    elif model == "stochastic":
        from .limits import stochastic_params

        b1, b2 = stochastic_params(*_weights(params).as_tuple())
        rows = _triangle_rows([S.sample_stochastic_6v(k, None, b1, b2, gen) for _ in range(draws)])
    elif model in ("mallows", "qshuffle"):
        q = float(params["q"]) if params.get("q") is not None else _weights(params).b ** 2 / _weights(params).a ** 2
        if model == "mallows":
            perms = [S.sample_mallows_finite(n, q, gen) for _ in range(draws)]
        else:
            perms = [S.sample_qshuffle_prefix(k, q, gen) for _ in range(draws)]
        header = ("draw_id", "position", "value")
        rows = [(d, i, v) for d, p in enumerate(perms) for i, v in enumerate(p, start=1)]
    elif model == "gue":
        rows = _triangle_rows([S.sample_gue_corners(n, gen) for _ in range(draws)])
    elif model == "eta":
        vals = S.sample_eta(float(params["theta"]), gen, draws)
        header = ("draw_id", "value")
        rows = [(d, repr(float(v))) for d, v in enumerate(vals)]
    else:
        raise DomainError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    if params["format"] == "json":
        return _json_text({"model": model, "header": list(header), "rows": [list(r) for r in rows]}), True, extra
    return _csv_text(header, rows), True, extra


def cmd_constants(params: dict) -> tuple[str, bool]:
    from .limits import limit_constants

    w = _weights(params)
    a, b, c = w.as_tuple()
    p = params_from_weights(a, b, c)
    lc = limit_constants(a, b, c)
    report = {
        "schema-version": "1",
        "weights": [a, b, c],
        "delta": delta(a, b, c),
        "phase": classify_phase(a, b, c).value,
        "phase_params": {"t": p.t, "gamma": p.gamma, "scale": p.scale, "c_sign": p.c_sign},
        "limit_constants": asdict(lc),
    }
    return _json_text(report), True


def cmd_verify(theorem: str, params: dict) -> tuple[str, bool]:
    from . import stats as T

    grid = _ints(params["grid"]) if params.get("grid") is not None else None
    prec = _prec(params)
    if theorem in ("T2.4", "T2.5", "T2.6", "T2.7"):
        xi = _complexes(params["xi"]) if params.get("xi") is not None else [0.5]
        rep = T.verify_expansions(theorem, _weights(params).as_tuple(), xi, grid or (8, 16, 32, 64), prec)
    elif theorem == "gaussian":
        rep = T.verify_gaussian_limit(_weights(params).as_tuple(), grid or (8, 16, 32, 48), prec)
    elif theorem == "geom":
        rep = T.verify_geometric_limit(_weights(params).as_tuple(), grid or (8, 16, 32, 48), prec)
    elif theorem == "mallows":
        if params.get("a") is not None and params.get("b") is not None:
            a, b = float(params["a"]), float(params["b"])
        else:
            a, b, _ = _weights(params).as_tuple()
        draws = int(params["draws"]) if params.get("draws_given") else 0
        rep = T.verify_mallows(a, b, int(params["k"]), grid or (8, 32, 128), draws, _rng(params))
    elif theorem == "eta":
        rep = T.verify_eta_limit(float(params["theta"]), grid or (8, 32, 128))
    elif theorem == "corners":
        from .samplers import ChainConfig, default_burn_in

        n = int(params["n"])
        chain = ChainConfig(
            sweeps=int(params["sweeps"] or max(10, n)),
            burn_in=int(params["burn_in"] or default_burn_in(n)),
        )
        draws = int(params["draws"]) if params.get("draws_given") else 200
        rep = T.verify_corners_joint(_weights(params).as_tuple(), int(params["k"]), n, draws, _rng(params), chain)
    else:
        raise DomainError(f"unknown theorem {theorem!r}; choose from {', '.join(THEOREM_IDS)}")
    if params["format"] == "csv":
        keys = sorted({key for row in rep.grid for key in row})
        return _csv_text(keys, [[row.get(key, "") for key in keys] for row in rep.grid]), rep.verdict
    return rep.to_json() + "\n", rep.verdict


# ---------------------------------------------------------------------------
# entry point


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", help="JSON file with the same keys as the flags; flags win")
    g.add_argument("--weights", help="a,b,c")
    g.add_argument("--phase-params", dest="phase_params", help="t,gamma,case")
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--draws", type=int)
    g.add_argument("--sweeps", type=int, help="MCMC sweeps between recorded draws")
    g.add_argument("--burn-in", dest="burn_in", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--stream", type=int)
    g.add_argument("--bits", type=int, help="working precision in bits")
    g.add_argument("--out", help="output path (stdout if omitted)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--xi", help="comma-separated xi values (complex allowed, e.g. 0.3+0.4j)")
    g.add_argument("--grid", help="comma-separated n values")
    g.add_argument("--q", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--a", type=float)
    g.add_argument("--b", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sixvertex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("enumerate", help="all DWBC configurations with weights")
    _common(p)
    p = sub.add_parser("sample", help="draws from one of the samplers")
    p.add_argument("model", choices=MODELS)
    _common(p)
    p = sub.add_parser("constants", help="phase parameters and limit constants")
    _common(p)
    p = sub.add_parser("verify", help="run a verification driver")
    p.add_argument("theorem", choices=THEOREM_IDS)
    _common(p)
    return parser


def resolve_params(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    params = dict(DEFAULTS)
    cfg: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
    given = {k: v for k, v in vars(args).items() if v is not None and k in DEFAULTS}
    params.update({k: v for k, v in cfg.items() if v is not None})
    params.update(given)
    params["draws_given"] = "draws" in cfg or "draws" in given
    return params


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = RunConfig(args.command, getattr(args, "model", None) or getattr(args, "theorem", None), resolve_params(args))
        params = run.params
        extra: dict[str, str] = {}
        if args.command == "enumerate":
            params["format"] = params["format"] or "csv"
            text, ok = cmd_enumerate(params)
        elif args.command == "sample":
            params["format"] = params["format"] or "csv"
            text, ok, extra = cmd_sample(args.model, params)
        elif args.command == "constants":
            params["format"] = "json"
            text, ok = cmd_constants(params)
        else:
            params["format"] = params["format"] or "json"
            text, ok = cmd_verify(args.theorem, params)
    except (DomainError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_atomic(params["out"], text)
    for suffix, body in extra.items():
        side = _side_path(params["out"], "." + suffix)
        if side is not None:
            write_atomic(side, body)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
