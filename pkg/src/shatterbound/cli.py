"""Command-line front end: ``shatterbound estimate|analyze|table2|compare|fit``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, arch, bounds
from .errors import ConfigError, FitError, ParseError, ShatterboundError
from .polyfit import QuadraticFit, evaluate, fit_quadratic
from .shatter_mc import EstimatorConfig, cover_bound, estimate_shattering

DEFAULT_SEED = 1729
SEED_ENV = "SHATTERBOUND_SEED"
DEFAULT_K = (1, 2, 3, 4, 5, 10, 20, 30)
# single-neuron fit in R^2, the default for the sample-size sweep
R2_FIT = QuadraticFit(0.91, -0.98, 2.68, rss=6.94, error_pct=5.07)


def num(x):
    """Round floats to 9 significant digits for stable serialized output."""
    if isinstance(x, float):
        if not math.isfinite(x):
            return None
        return float(f"{x:.9g}")
    if isinstance(x, dict):
        return {k: num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [num(v) for v in x]
    return x


def dump_json(obj):
    return json.dumps(num(obj), indent=2) + "\n"


def default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def manifest(argv, digest=None, seed=None, timestamp=True):
    m = {
        "command": " ".join(["shatterbound", *argv]),
        "config_digest": digest,
        "seed": seed,
        "version": __version__,
    }
    if timestamp:
        m["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return m


def write_output(path, text, argv, digest=None, seed=None):
    """Write ``text`` to ``path`` (stdout for None or '-') with a manifest sidecar."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    sidecar = path.with_name(path.name + ".manifest.json")
    sidecar.write_text(dump_json(manifest(argv, digest, seed)), encoding="utf-8")


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def load_fit_library(path):
    """Read a fit file: one ``{a2, a1, a0, ...}`` record or a map of them."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read fit file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"fit file {path} is not JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(data, dict):
        raise FitError(f"fit file {path} must hold a JSON object")
    if "a2" in data:
        return {"*": QuadraticFit.from_dict(data)}
    return {k: QuadraticFit.from_dict(v) for k, v in data.items()}


def load_single_fit(path):
    lib = load_fit_library(path)
    if len(lib) != 1:
        raise FitError(f"{path} holds {len(lib)} fits; expected exactly one")
    return next(iter(lib.values()))


def resolve_arch(name):
    """Return ``(text, fits_path)`` for a file path or a bundled preset name."""
    p = Path(name)
    if p.is_file():
        sibling = p.with_name(p.name[: -len(".arch")] + ".fits.json") if p.suffix == ".arch" else None
        return p.read_text(encoding="utf-8"), sibling if sibling and sibling.is_file() else None
    stem = p.name[: -len(".arch")] if p.name.endswith(".arch") else p.name
    preset = arch.preset_path(stem)
    if not preset.is_file():
        raise ConfigError(
            f"no architecture file {name!r} and no preset {stem!r} "
            f"(presets: {', '.join(arch.preset_names())})"
        )
    fits = arch.preset_path(stem).parent.joinpath(stem + ".fits.json")
    return preset.read_text(encoding="utf-8"), fits if fits.is_file() else None


def build_function(arch_name, fit_file=None):
    text, fits_path = resolve_arch(arch_name)
    spec = arch.parse_architecture(text)
    if fit_file is not None:
        fits_path = fit_file
    if fits_path is None:
        raise ConfigError(f"no per-layer fits for {arch_name}; pass --fit-file")
    library = load_fit_library(fits_path)
    per_layer = arch.fits_for(spec, library)
    return spec, per_layer, arch.compose_shattering(spec, per_layer)


# -- commands ---------------------------------------------------------------


def cmd_estimate(args, argv):
    seed = args.seed if args.seed is not None else default_seed()
    config = EstimatorConfig(
        iter=args.iter,
        start=args.start,
        end=args.end,
        dims=args.dims,
        average=args.average,
        stdev=args.stdev,
        min_value=args.min_value,
        max_value=args.max_value,
        seed=seed,
        budget_power=args.budget_power,
    )
    progress = None
    if args.verbose:
        progress = lambda n, c: print(f"n={n} count={c}", file=sys.stderr)  # noqa: E731
    curve = estimate_shattering(config, threads=args.threads, progress=progress)
    curve_csv = csv_text(["n", "count"], curve.entries)

    fit = None
    if len(set(curve.ns)) >= 3:
        fit = fit_quadratic(curve.entries)

    if args.out is None:
        sys.stdout.write(curve_csv)
        return 0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "curve.csv").write_text(curve_csv, encoding="utf-8")
    rows = []
    for n, c in curve.entries:
        rows.append((n, c, cover_bound(n, config.dims), evaluate(fit, float(n)) if fit else ""))
    (out / "plot.csv").write_text(
        csv_text(["n", "count", "cover_bound", "fitted"], rows), encoding="utf-8"
    )
    if fit is not None:
        (out / "fit.json").write_text(dump_json(fit.to_dict()), encoding="utf-8")
    m = manifest(argv, curve.config_digest, seed)
    m["budget_rule"] = curve.budget_rule
    m["config"] = {k: getattr(config, k) for k in config.__dataclass_fields__}
    (out / "manifest.json").write_text(dump_json(m), encoding="utf-8")
    return 0


def _divergence_block(report, empirical_risk):
    if report.divergence is None:
        return None
    block = {
        "include_lambda": report.include_lambda,
        "gamma": report.gamma_at_dataset,
        **report.divergence.to_dict(),
    }
    if empirical_risk is not None:
        rb = bounds.risk_bound(empirical_risk, report.divergence)
        block["expected_risk_bound"] = rb.expected_risk_bound
        block["risk_confidence"] = rb.confidence
    return block


def cmd_analyze(args, argv):
    spec, per_layer, f = build_function(args.arch, args.fit_file)
    if args.lam == "product":
        log_lambda, source = f.log_lambda, "product of leading coefficients"
    else:
        try:
            lam = float(args.lam)
        except ValueError:
            raise ConfigError(f"--lambda must be a number or 'product', got {args.lam!r}") from None
        if not lam > 0:
            raise ConfigError("--lambda must be > 0")
        log_lambda, source = math.log(lam), f"explicit lambda={args.lam}"

    gammas = args.gamma or [0.01]
    include = args.gamma_convention == "include"
    report = bounds.convergence_report(
        f.degree, log_lambda, gammas, args.dataset_size, args.delta, include
    )

    dims = {r.layer: r for r in arch.receptive_dims(spec, use_channels=args.use_channels)}
    layers = []
    for i, layer in spec.conv_layers:
        layers.append(
            {
                "layer": i,
                "neurons": layer.neurons,
                "filter": layer.filter_key,
                "input_dim": dims[i].input_dim,
                "spatial": [dims[i].spatial_h, dims[i].spatial_w],
                "fit": per_layer[i].to_dict(),
            }
        )
    neurons, note = arch.equivalent_single_layer(spec)
    out = {
        "manifest": manifest(argv, timestamp=False),
        "architecture": spec.name,
        "conv_layers": layers,
        "equivalent_single_layer": {"neurons": neurons, "note": note},
        "envelope": {
            "degree": f.degree,
            "log_lambda_product": f.log_lambda,
            "log_lambda_used": log_lambda,
            "lambda_source": source,
            "min_safe_n": f.min_safe_n(),
        },
        "min_n": [{"gamma": g, "n": n} for g, n in report.min_n],
        "delta": args.delta,
    }
    if args.dataset_size is not None:
        other = bounds.convergence_report(
            f.degree, log_lambda, gammas, args.dataset_size, args.delta, not include
        )
        primary = _divergence_block(report, args.empirical_risk)
        alternate = _divergence_block(other, args.empirical_risk)
        out["dataset"] = {
            "n": args.dataset_size,
            "gamma_convention": args.gamma_convention,
            "divergence": primary,
            "divergence_by_convention": {
                ("lambda_included" if include else "lambda_dropped"): primary,
                ("lambda_dropped" if include else "lambda_included"): alternate,
            },
        }
    out["verdict"] = report.verdict
    write_output(args.out, dump_json(out), argv)
    return 0


def _parse_k_list(raw):
    try:
        ks = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--k must be a comma-separated list of integers, got {raw!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise ConfigError("--k values must be >= 1")
    return ks


def _fit_from_args(args, default=R2_FIT):
    if args.fit_file is not None:
        return load_single_fit(args.fit_file)
    coeffs = (args.a2, args.a1, args.a0)
    if all(c is None for c in coeffs):
        return default
    if any(c is None for c in coeffs):
        raise ConfigError("--a2, --a1 and --a0 must be given together")
    return QuadraticFit(*coeffs)


def cmd_table2(args, argv):
    fit = _fit_from_args(args)
    ks = _parse_k_list(args.k)
    rows = [(k, bounds.min_n_gamma_poly(fit, k, args.gamma)) for k in ks]
    write_output(args.out, csv_text(["k", "min_n"], rows), argv)
    if len(set(ks)) >= 3:
        g = fit_quadratic(rows)
        text = dump_json({"source_fit": fit.to_dict(), "gamma": args.gamma, "fit": g.to_dict()})
        if args.fit_out is not None:
            write_output(args.fit_out, text, argv)
        elif args.out is not None and args.out != "-":
            p = Path(args.out)
            write_output(p.with_name(p.stem + ".fit.json"), text, argv)
        else:
            sys.stderr.write(text)
    return 0


def cmd_compare(args, argv):
    _, _, f = build_function(args.arch_a, args.fit_file_a)
    _, _, g = build_function(args.arch_b, args.fit_file_b)
    if args.n_values:
        ns = args.n_values
    else:
        lo = max(f.min_safe_n(), g.min_safe_n())
        ns = sorted({lo, *(10**e for e in range(2, 10) if 10**e > lo)})
    result = arch.compare_architectures(f, g, ns)
    out = {
        "manifest": manifest(argv, timestamp=False),
        "a": f.name,
        "b": g.name,
        **result.to_dict(),
    }
    write_output(args.out, dump_json(out), argv)
    return 0


def cmd_fit(args, argv):
    try:
        text = Path(args.data).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.data}: {exc}") from exc
    pairs = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].startswith("#"):
            continue
        try:
            pairs.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            if lineno == 1:
                continue  # header
            raise ParseError(f"expected two numeric columns, got {row!r}", lineno) from None
    fit = fit_quadratic(pairs)
    write_output(args.out, dump_json(fit.to_dict()), argv)
    return 0


# -- parser -----------------------------------------------------------------


def positive_int(raw):
    try:
        v = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def unit_interval(raw):
    v = float(raw)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {v}")
    return v


def positive_float(raw):
    v = float(raw)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive value, got {v}")
    return v


def build_parser():
    p = argparse.ArgumentParser(
        prog="shatterbound",
        description="Shattering-coefficient estimation and learning-guarantee bounds for CNNs.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="Monte Carlo shattering curve of a single neuron")
    e.add_argument("--dims", type=positive_int, required=True)
    e.add_argument("--iter", type=positive_int, default=1000)
    e.add_argument("--start", type=positive_int, default=1)
    e.add_argument("--end", type=positive_int, default=100)
    e.add_argument("--seed", type=int, default=None, help=f"default {DEFAULT_SEED} or ${SEED_ENV}")
    e.add_argument("--threads", type=positive_int, default=1)
    e.add_argument("--budget-power", type=float, default=1.5, help="T(n) = ceil(iter * n**p)")
    e.add_argument("--average", type=float, default=0.0)
    e.add_argument("--stdev", type=float, default=1.0)
    e.add_argument("--min-value", type=float, default=-1.0)
    e.add_argument("--max-value", type=float, default=1.0)
    e.add_argument("--out", help="output directory (curve.csv, fit.json, plot.csv, manifest.json)")
    e.add_argument("-v", "--verbose", action="store_true")
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("analyze", help="convergence report for an architecture")
    a.add_argument("arch", help="architecture file or preset name (alexnet, vgg16, ...)")
    a.add_argument("--fit-file")
    a.add_argument("--gamma", type=positive_float, action="append")
    a.add_argument("--delta", type=unit_interval, default=0.05)
    a.add_argument("--lambda", dest="lam", default=repr(bounds.DEFAULT_LAMBDA),
                   help="envelope constant, or 'product' for the product of leading coefficients")
    a.add_argument("--dataset-size", type=positive_int)
    a.add_argument("--gamma-convention", choices=("include", "drop"), default="include",
                   help="whether log(lambda) enters gamma at the dataset size")
    a.add_argument("--empirical-risk", type=float)
    a.add_argument("--use-channels", action="store_true")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("table2", help="minimal sample size per neuron count")
    t.add_argument("--fit-file")
    t.add_argument("--a2", type=float)
    t.add_argument("--a1", type=float)
    t.add_argument("--a0", type=float)
    t.add_argument("--gamma", type=positive_float, default=0.01)
    t.add_argument("--k", default=",".join(map(str, DEFAULT_K)))
    t.add_argument("--out")
    t.add_argument("--fit-out")
    t.set_defaults(func=cmd_table2)

    c = sub.add_parser("compare", help="compare two architectures' shattering functions")
    c.add_argument("arch_a")
    c.add_argument("arch_b")
    c.add_argument("--fit-file-a")
    c.add_argument("--fit-file-b")
    c.add_argument("--n-values", type=positive_int, nargs="+")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    f = sub.add_parser("fit", help="least-squares quadratic fit of a two-column CSV")
    f.add_argument("data")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        parser.error(str(exc))
    except ShatterboundError as exc:
        print(f"shatterbound: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
