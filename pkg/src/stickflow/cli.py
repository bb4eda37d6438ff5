"""``stickflow`` command line: strict JSON configs in, JSON summaries and CSV tables out."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .acceptance import run_all
from .chains import stationary_distribution, validate_generator
from .inhom import InhomSpec, occupation_replicates, reverse_clumps, simulate_inhom
from .mccgem import sample_mccgem
from .moments import joint_moment, marginal_moment, minimal_and_q, moment_table, multi_indices
from .stats import (
    SelfSimSpec,
    clumped_fraction_beta_check,
    estimate,
    gem2_clump_covariance,
    replicate_rng,
    self_similarity_check,
    w_clumped_exchangeability,
)
from .stickcore import DEFAULT_EPS, fractions_from_weights, law_from_dict, sample_stick

log = logging.getLogger("stickflow")

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2
DEFAULT_SEED = 0
SEED_ENV = "STICKFLOW_SEED"

# --------------------------------------------------------------------------
# schemas

_NUMBER = {"type": "number"}
_MATRIX = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _NUMBER}}
_VECTOR = {"type": "array", "minItems": 1, "items": _NUMBER}
_POS_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0}
_EPS = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_LAW = {
    "type": "object", "minProperties": 1, "maxProperties": 1, "additionalProperties": False,
    "properties": {
        "gem": {"type": "number", "exclusiveMinimum": 0},
        "disordered": _VECTOR,
        "two_param": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
        "custom": _VECTOR,
        "constant": {"type": "number", "minimum": 0, "maximum": 1},
    },
}


def _obj(required: list[str], **props) -> dict:
    props.setdefault("seed", _SEED)
    return {"type": "object", "required": required, "properties": props,
            "additionalProperties": False}


SCHEMAS: dict[str, dict] = {
    "sample-gem": _obj(["law"], law=_LAW, eps=_EPS, draws=_POS_INT),
    "sample-mccgem": _obj(["G", "init"], G=_MATRIX, init=_VECTOR, eps=_EPS, draws=_POS_INT),
    "simulate": _obj(["G", "pi", "n"], G=_MATRIX, M=_POS_INT, pi=_VECTOR, n=_POS_INT,
                     replicates=_POS_INT),
    "occupation": _obj(["G", "pi", "n"], G=_MATRIX, M=_POS_INT, pi=_VECTOR, n=_POS_INT,
                       replicates={"type": "integer", "minimum": 2}),
    "moments": _obj(["G", "max_order"], G=_MATRIX, max_order=_POS_INT,
                    min_order={"type": "integer", "minimum": 0}),
    "marginals": _obj(["G", "max_order"], G=_MATRIX, max_order=_POS_INT,
                      states={"type": "array", "items": {"type": "integer", "minimum": 0}}),
    "verify:covariance": _obj([], p_stay={"type": "number", "exclusiveMinimum": 0,
                                          "exclusiveMaximum": 1}, terms=_POS_INT),
    "verify:clumped-beta": _obj([], theta={"type": "number", "exclusiveMinimum": 0}, Q=_MATRIX,
                                y={"type": "integer", "minimum": 0}, replicates=_POS_INT,
                                alpha=_EPS),
    "verify:self-similarity": _obj([], law=_LAW, Q=_MATRIX, start={"type": "integer", "minimum": 0},
                                   replicates={"type": "integer", "minimum": 2}, alpha=_EPS,
                                   eps=_EPS),
    "verify:exchangeability": _obj([], law=_LAW, Q=_MATRIX, start={"type": "integer", "minimum": 0},
                                   replicates={"type": "integer", "minimum": 2}, alpha=_EPS),
    "accept": _obj([]),
}
CHECKS = ("covariance", "clumped-beta", "self-similarity", "exchangeability")
NEEDS_CONFIG = {"sample-gem", "sample-mccgem", "simulate", "occupation", "moments", "marginals"}


class ConfigError(ValueError):
    """Config problem with a machine-readable location."""

    def __init__(self, message: str, **where):
        super().__init__(message)
        self.where = where


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int
    out_dir: Path | None = None
    fmt: str = "json"
    jobs: int = 1
    check: str | None = None
    seed_source: str = "default"
    meta: dict = field(default_factory=dict)

    @property
    def schema_key(self) -> str:
        return f"verify:{self.check}" if self.command == "verify" else self.command

    def config_hash(self) -> str:
        blob = json.dumps({"command": self.schema_key, "params": self.params},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _field_path(err: jsonschema.ValidationError) -> str:
    out = "$"
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def validate_params(schema_key: str, params: dict) -> dict:
    validator = jsonschema.Draft202012Validator(SCHEMAS[schema_key])
    errors = sorted(validator.iter_errors(params), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_field_path(err)}: {err.message}", path=_field_path(err))
    return params


def load_config(path, schema_key: str) -> dict:
    """Read a JSON config and validate it against the strict schema for ``schema_key``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        params = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}",
                          line=exc.lineno, column=exc.colno) from exc
    return validate_params(schema_key, params)


def resolve_seed(cli_seed: int | None, params: dict) -> tuple[int, str]:
    if cli_seed is not None:
        return cli_seed, "flag"
    if "seed" in params:
        return int(params["seed"]), "config"
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env), "env"
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from exc
    log.warning("no seed given; using %d", DEFAULT_SEED)
    return DEFAULT_SEED, "default"


# --------------------------------------------------------------------------
# commands: each returns (summary dict, csv header, csv rows, check passed or None)


def _cmd_sample_gem(cfg: RunConfig):
    p = cfg.params
    law = law_from_dict(p["law"])
    eps = p.get("eps", DEFAULT_EPS)
    draws = []
    rows = []
    for r in range(p.get("draws", 1)):
        stick = sample_stick(law, replicate_rng(cfg.seed, r), eps)
        x = fractions_from_weights(stick).values
        draws.append({"weights": stick.weights.tolist(), "tail_mass": stick.tail_mass})
        rows += [(r, j, w, xj) for j, (w, xj) in enumerate(zip(stick.weights, x))]
    return {"draws": draws}, ["draw", "index", "weight", "fraction"], rows, None


def _cmd_sample_mccgem(cfg: RunConfig):
    p = cfg.params
    g = validate_generator(p["G"])
    draws = []
    rows = []
    for r in range(p.get("draws", 1)):
        s = sample_mccgem(g, p["init"], p.get("eps", DEFAULT_EPS), replicate_rng(cfg.seed, r))
        draws.append({"weights": s.weights.weights.tolist(), "labels": s.labels.tolist(),
                      "tail_mass": s.weights.tail_mass})
        rows += [(r, j, int(lab), w) for j, (lab, w) in enumerate(zip(s.labels, s.weights.weights))]
    return {"draws": draws}, ["draw", "index", "label", "weight"], rows, None


def _inhom_spec(p: dict) -> InhomSpec:
    return InhomSpec(validate_generator(p["G"]), p["pi"], p["n"], M=p.get("M"))


def _cmd_simulate(cfg: RunConfig):
    spec = _inhom_spec(cfg.params)
    runs = []
    rows = []
    for r in range(cfg.params.get("replicates", 1)):
        ex = reverse_clumps(simulate_inhom(spec, [cfg.seed, r]))
        occ = ex.occupation_counts(spec.g.dim) / spec.n
        runs.append({"tau": ex.tau.tolist(), "labels": ex.labels.tolist(),
                     "first_state": ex.first_state, "occupation": occ.tolist()})
        rows += [(r, j, int(lab), int(t), t / spec.n) for j, (t, lab) in enumerate(zip(ex.tau, ex.labels))]
    summary = {"n": spec.n, "M": spec.M, "runs": runs}
    return summary, ["replicate", "clump", "label", "tau", "weight"], rows, None


def _cmd_occupation(cfg: RunConfig):
    spec = _inhom_spec(cfg.params)
    reps = cfg.params.get("replicates", 100)
    occ = occupation_replicates(spec, reps, cfg.seed, cfg.jobs)
    stats = [estimate(occ[:, i]) for i in range(spec.g.dim)]
    summary = {"n": spec.n, "M": spec.M, "replicates": reps,
               "mean": [m for m, _ in stats], "stderr": [s for _, s in stats]}
    try:
        summary["limit_mean"] = stationary_distribution(spec.g).tolist()
    except ValueError:
        pass
    rows = [(cfg.seed, r, i, occ[r, i]) for r in range(reps) for i in range(spec.g.dim)]
    return summary, ["seed", "replicate", "state", "mass"], rows, None


def _cmd_moments(cfg: RunConfig):
    g = validate_generator(cfg.params["G"])
    poly = minimal_and_q(g)
    k = g.dim
    rows = []
    for order in range(cfg.params.get("min_order", 0), cfg.params["max_order"] + 1):
        if order == 0:
            rows.append((*([0] * k), 1.0))
            continue
        table = moment_table(g, order, poly)
        rows += [(*m, table[m]) for m in multi_indices(k, order)]
    summary = {"k": k, "q_coeffs": poly.q_coeffs.tolist(),
               "used_characteristic": poly.used_characteristic,
               "moments": [{"m": list(r[:-1]), "value": r[-1]} for r in rows]}
    return summary, [f"m_{i + 1}" for i in range(k)] + ["value"], rows, None


def _cmd_marginals(cfg: RunConfig):
    g = validate_generator(cfg.params["G"])
    poly = minimal_and_q(g)
    states = cfg.params.get("states", list(range(g.dim)))
    rows = []
    for i in states:
        if i >= g.dim:
            raise ConfigError(f"state {i} out of range for k={g.dim}", path="$.states")
        for n in range(1, cfg.params["max_order"] + 1):
            e = [0] * g.dim
            e[i] = n
            rows.append((i, n, marginal_moment(g, poly, i, n), joint_moment(g, e, poly)))
    summary = {"roots": [[z.real, z.imag] for z in poly.nonzero_roots],
               "marginals": [{"state": r[0], "order": r[1], "value": r[2]} for r in rows]}
    return summary, ["state", "order", "value", "joint_value"], rows, None


def _cmd_verify(cfg: RunConfig):
    p = cfg.params
    if cfg.check == "covariance":
        res = gem2_clump_covariance(p.get("p_stay", 0.5), p.get("terms", 200))
        ok = res.cov < 0 and res.truncation_bound < 1e-12
        if p.get("p_stay", 0.5) == 0.5:
            ok = ok and abs(res.cov - (-0.005391)) <= 1e-4
        report = {"check": "covariance", "params": p, "value": res.cov, "e1": res.e1, "e2": res.e2,
                  "e12": res.e12, "truncation_bound": res.truncation_bound, "pass": ok,
                  "seed": cfg.seed}
        rows = [("e1", res.e1), ("e2", res.e2), ("e12", res.e12), ("cov", res.cov)]
        return report, ["quantity", "value"], rows, ok
    if cfg.check == "clumped-beta":
        rep = clumped_fraction_beta_check(p.get("theta", 2.0), p.get("Q", [[0.5, 0.5], [0.5, 0.5]]),
                                          p.get("y", 0), p.get("replicates", 10_000), cfg.seed,
                                          p.get("alpha", 0.001))
    elif cfg.check == "self-similarity":
        spec = SelfSimSpec(law_from_dict(p.get("law", {"gem": 2.0})),
                           np.asarray(p.get("Q", [[0.5, 0.5], [0.25, 0.75]]), dtype=float),
                           p.get("start", 0), p.get("eps", DEFAULT_EPS), p.get("replicates", 10_000))
        rep = self_similarity_check(spec, cfg.seed, p.get("alpha", 0.01))
    else:
        rep = w_clumped_exchangeability(law_from_dict(p.get("law", {"gem": 2.0})),
                                        p.get("Q", [[0.5, 0.5], [0.25, 0.75]]), p.get("start", 0),
                                        p.get("replicates", 10_000), cfg.seed, p.get("alpha", 0.001))
    report = rep.to_dict()
    rows = [(report["check"], report["statistic"], report["p_value"], report["pass"])]
    return report, ["check", "statistic", "p_value", "pass"], rows, rep.passed


def _cmd_accept(cfg: RunConfig):
    results = run_all(echo=lambda line: print(line, file=sys.stderr))
    ok = all(r.passed for r in results)
    rows = [(r.number, r.name, r.passed, r.seconds) for r in results]
    return ({"criteria": [r.to_dict() for r in results], "pass": ok},
            ["criterion", "name", "pass", "seconds"], rows, ok)


COMMANDS = {
    "sample-gem": _cmd_sample_gem,
    "sample-mccgem": _cmd_sample_mccgem,
    "simulate": _cmd_simulate,
    "occupation": _cmd_occupation,
    "moments": _cmd_moments,
    "marginals": _cmd_marginals,
    "verify": _cmd_verify,
    "accept": _cmd_accept,
}


# --------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _meta_line(meta: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items())


def render_csv(header, rows, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(_meta_line(meta) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def run_command(cfg: RunConfig) -> int:
    """Run one command, write its artifacts and return the exit code."""
    meta = {"version": __version__, "command": cfg.schema_key, "seed": cfg.seed,
            "config_sha256": cfg.config_hash()}
    summary, header, rows, passed = COMMANDS[cfg.command](cfg)
    doc = {"meta": {**meta, "seed_source": cfg.seed_source}, "result": summary}
    text = json.dumps(doc, default=_jsonable, indent=2)
    if cfg.out_dir is None:
        print(text)
        if cfg.fmt in ("csv", "both"):
            sys.stdout.write(render_csv(header, rows, meta))
    else:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        stem = cfg.schema_key.replace(":", "-")
        if cfg.fmt in ("json", "both"):
            (cfg.out_dir / f"{stem}.json").write_text(text + "\n", encoding="utf-8")
        if cfg.fmt in ("csv", "both"):
            (cfg.out_dir / f"{stem}.csv").write_text(render_csv(header, rows, meta), encoding="utf-8",
                                                     newline="")
        print(json.dumps({"meta": meta, "out_dir": str(cfg.out_dir), "pass": passed}))
    if passed is False:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config for the command")
    common.add_argument("--seed", type=int, help=f"base seed (falls back to ${SEED_ENV})")
    common.add_argument("--out", type=Path, help="directory for JSON and CSV artifacts")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for replicate loops")
    common.add_argument("--format", choices=("json", "csv", "both"), default="json", dest="fmt")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stickflow", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "verify":
            sp.add_argument("check", choices=CHECKS)
    return parser


def _error(kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return EXIT_ERROR


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg_key = f"verify:{args.check}" if args.command == "verify" else args.command
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.config is None:
            if args.command in NEEDS_CONFIG:
                raise ConfigError(f"{args.command} needs --config")
            params = {}
        else:
            params = load_config(args.config, cfg_key)
        seed, source = resolve_seed(args.seed, params)
        params = {k: v for k, v in params.items() if k != "seed"}
        cfg = RunConfig(args.command, params, seed, args.out, args.fmt, args.jobs,
                        getattr(args, "check", None), source)
        return run_command(cfg)
    except ConfigError as exc:
        return _error("config", str(exc), **exc.where)
    except OSError as exc:
        return _error("io", str(exc))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        return _error(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
