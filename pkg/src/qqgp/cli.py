"""Command-line front end: ``qqgp {fit,predict,score,bench,design,canon}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
from contextlib import nullcontext

import numpy as np

from . import io as qio
from .core import ModelConfig, NumericalError, QQGPError, ValidationError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _limits(threads):
    """Cap BLAS threads while running with ``threads`` workers."""
    if threads is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=1 if threads > 1 else threads)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _configs_from(obj, level_counts) -> list:
    """Config list from JSON: a list of config dicts, one dict, or ``"default"``."""
    from .bench.experiment import default_methods
    if obj == "default" or (isinstance(obj, dict) and obj.get("grid") == "default"):
        kw = {"restarts": obj["restarts"]} if isinstance(obj, dict) and "restarts" in obj else {}
        return default_methods(level_counts, **kw)
    if isinstance(obj, dict):
        if "configs" in obj:
            obj = obj["configs"]
        else:
            obj = [obj]
    if not isinstance(obj, list) or not obj:
        raise ValidationError("configs JSON must be a non-empty list of model configs")
    return [ModelConfig.from_dict(c) for c in obj]


def cmd_fit(args) -> int:
    from .fit import fit_model
    t0 = time.perf_counter()
    data = qio.read_dataset(args.data, args.descriptor)
    cfg_obj = qio.read_json(args.config)
    config = ModelConfig.from_dict(cfg_obj)
    with _limits(args.threads):
        model = fit_model(data, config, seed=args.seed, n_jobs=args.threads or 1)
    man = qio.make_manifest("fit", args.seed, config.to_dict(),
                            {"data": args.data, "descriptor": args.descriptor,
                             "config": args.config}, time.perf_counter() - t0)
    _emit(args, qio.model_to_json(model, man))
    _say(args, f"fitted {model.method_name}: neg_loglik={model.neg_loglik:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    from .predict import predict
    t0 = time.perf_counter()
    with open(args.model, encoding="utf-8") as fh:
        model = qio.model_from_json(fh.read())
    header, rows, U, V = qio.read_points(args.points)
    mean, sd = predict(model, U, V)
    man = qio.make_manifest("predict", args.seed, None,
                            {"model": args.model, "points": args.points},
                            time.perf_counter() - t0)
    buf = io.StringIO()
    out_rows = [list(r) + [m, s] for r, m, s in zip(rows, mean, sd)]
    qio.write_csv(buf, header + ["mean", "sd"], out_rows, man)
    _emit(args, buf.getvalue())
    return EXIT_OK


SCORE_COLUMNS = ("model_id", "structure", "kernel", "latent_dim", "ordinal", "bic",
                 "loocv_loglik", "loocv_l2", "avg_weight")


def cmd_score(args) -> int:
    from .fit import fit_model
    from .select import Loss, bic_select, loocv_select, score_models
    t0 = time.perf_counter()
    data = qio.read_dataset(args.data, args.descriptor)
    cfg_obj = qio.read_json(args.configs)
    configs = _configs_from(cfg_obj, data.level_counts)
    models = []
    with _limits(args.threads):
        for k, cfg in enumerate(configs):
            models.append(fit_model(data, cfg, seed=args.seed + k, n_jobs=args.threads or 1))
            _say(args, f"[{k + 1}/{len(configs)}] {cfg.method_name}")
    scores = score_models(models)
    rows = []
    ids = []
    for k, (cfg, s) in enumerate(zip(configs, scores)):
        mid = cfg.method_name
        ids.append(mid if [c.method_name for c in configs].count(mid) == 1 else f"{mid}#{k + 1}")
        rows.append([ids[-1], cfg.structure.value, cfg.qual_kernel.value,
                     "-".join(str(l) for l in cfg.latent_dims), int(all(cfg.ordinal_mode)),
                     s.bic, s.loocv_loglik, s.loocv_l2, s.avg_weight])
    picks = {
        "BIC_MSel": bic_select([s.bic for s in scores]),
        "LOOCV_loglik": loocv_select(models, Loss.LOGLIK, [s.loocv_loglik for s in scores]),
        "LOOCV_l2": loocv_select(models, Loss.L2, [s.loocv_l2 for s in scores]),
    }
    for meth in ("BIC_MSel", "BIC_MAvr", "LOOCV_loglik", "LOOCV_l2"):
        if meth == "BIC_MAvr":
            rows.append([meth, "", "", "", "", "", "", "", ""])
        else:
            rows.append([meth, ids[picks[meth]]] + [""] * 7)
    man = qio.make_manifest("score", args.seed, [c.to_dict() for c in configs],
                            {"data": args.data, "descriptor": args.descriptor,
                             "configs": args.configs}, time.perf_counter() - t0)
    buf = io.StringIO()
    qio.write_csv(buf, SCORE_COLUMNS, rows, man)
    _emit(args, buf.getvalue())
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench.experiment import RESULT_COLUMNS, run_experiment
    from .bench.functions import get_spec
    t0 = time.perf_counter()
    spec_obj = qio.read_json(args.spec)
    if not isinstance(spec_obj, dict) or "benchmark" not in spec_obj:
        raise ValidationError("bench spec must be a JSON object with a 'benchmark' key")
    name = spec_obj["benchmark"]
    kw = {k: int(spec_obj[k]) for k in ("q1", "q2") if k in spec_obj}
    if kw and name.lower() != "borehole":
        raise ValidationError("q1/q2 apply to the borehole benchmark only")
    spec = get_spec(name, **kw)
    if "n_train" in spec_obj:
        n_train = int(spec_obj["n_train"])
    elif name.lower() == "borehole" and kw:
        n_train = 5 * spec.level_counts[0] * spec.level_counts[1]
    else:
        raise ValidationError("bench spec needs 'n_train'")
    configs = _configs_from(spec_obj.get("methods", "default"), spec.level_counts)
    with _limits(args.threads):
        rows = run_experiment(
            spec, configs, n_train, int(spec_obj.get("n_test", 2000)),
            int(spec_obj.get("replications", 10)), args.seed,
            restarts=spec_obj.get("restarts"), n_jobs=args.threads or 1,
            progress=None if args.quiet else
            lambda r, m, e: print(f"rep {r} {m} rrmse={e:.4g}", file=sys.stderr))
    man = qio.make_manifest("bench", args.seed, spec_obj, {"spec": args.spec},
                            time.perf_counter() - t0)
    buf = io.StringIO()
    qio.write_csv(buf, RESULT_COLUMNS, rows, man)
    _emit(args, buf.getvalue())
    return EXIT_OK


def _parse_levels(text):
    if not text:
        return []
    return [int(x) for x in text.split(",") if x.strip()]


def _parse_ranges(text, I):  # noqa: E741
    if not text:
        return [(0.0, 1.0)] * I
    parts = [p for p in text.split(";") if p.strip()]
    out = []
    for p in parts:
        lo, hi = (float(x) for x in p.split(","))
        if not hi > lo:
            raise ValidationError(f"range {p} must have lower < upper")
        out.append((lo, hi))
    if len(out) != I:
        raise ValidationError(f"{len(out)} ranges given for {I} quantitative columns")
    return out


def cmd_design(args) -> int:
    from .bench.design import maximin_lhd
    t0 = time.perf_counter()
    levels = _parse_levels(args.levels)
    ranges = _parse_ranges(args.ranges, args.I)
    rng = np.random.default_rng(args.seed)
    d = maximin_lhd(args.n, args.I, len(levels), levels, ranges, rng)
    header = [f"u{i + 1}" for i in range(args.I)] + [f"v{j + 1}" for j in range(len(levels))]
    rows = [list(d.U[i]) + [int(v) for v in d.V[i]] for i in range(d.n)]
    man = qio.make_manifest("design", args.seed,
                            {"n": args.n, "I": args.I, "levels": levels, "ranges": ranges},
                            None, time.perf_counter() - t0)
    buf = io.StringIO()
    qio.write_csv(buf, header, rows, man)
    _emit(args, buf.getvalue())
    return EXIT_OK


def cmd_canon(args) -> int:
    from .identify import canon_isotropic, canon_linear
    Z = qio.read_matrix(args.embedding)
    W = canon_linear(Z) if args.kernel == "linear" else canon_isotropic(Z)
    W = np.where(W == 0.0, 0.0, W)  # drop negative zeros
    buf = io.StringIO()
    for row in W:
        buf.write(",".join(qio.fmt(x) for x in row) + "\n")
    _emit(args, buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for multi-start fits")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="qqgp", parents=[common],
                                description="Latent-variable Gaussian processes for "
                                            "mixed qualitative and quantitative inputs.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="fit one model configuration")
    f.add_argument("data")
    f.add_argument("descriptor")
    f.add_argument("config")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", parents=[common], help="predict at query points")
    pr.add_argument("model")
    pr.add_argument("points")
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("score", parents=[common], help="fit and score candidate models")
    s.add_argument("data")
    s.add_argument("descriptor")
    s.add_argument("configs")
    s.set_defaults(func=cmd_score)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark experiment")
    b.add_argument("spec")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("design", parents=[common], help="maximin Latin hypercube design")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--I", type=int, default=0, help="number of quantitative columns")
    d.add_argument("--levels", default="", help="comma-separated level counts")
    d.add_argument("--ranges", default="", help="'lo,hi;lo,hi' per quantitative column")
    d.set_defaults(func=cmd_design)

    c = sub.add_parser("canon", parents=[common], help="canonical form of an embedding")
    c.add_argument("embedding")
    c.add_argument("--kernel", choices=("linear", "gaussian", "exponential"), default="gaussian")
    c.set_defaults(func=cmd_canon)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    for name, default in (("seed", 0), ("threads", None), ("out", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.threads is not None and args.threads < 1:
        print("ValidationError: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QQGPError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
