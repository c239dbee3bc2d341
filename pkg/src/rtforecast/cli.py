"""Command line entry point: forecast, compare, gradcheck, synth, emit-plot."""

import argparse
import json
import logging
import os
import sys

from . import synth
from .config import RunConfig, load_config
from .dataio import atomic_write, load_csv, plot_csv, series_to_csv
from .errors import ConfigError, ForecastError
from .harness import MethodSpec, RunReport, compare_methods, derive_seed, plot_rows, run_method
from .training import SequentialLstm, gradient_check, write_training_log

OUTPUT_ENV = "RTFORECAST_OUTPUT_DIR"
DEFAULT_OUTPUT = "rtforecast-out"

# flag name -> method parameter
PARAM_FLAGS = {
    "epochs": "epochs", "lr": "learning_rate", "hidden": "hidden_dim", "layers": "num_layers",
    "init": "init", "init_scale": "init_scale", "p": "p", "d": "d", "q": "q",
    "q_scale": "q_scale", "r_scale": "r_scale",
}
PARAM_KINDS = {
    "epochs": ("lstm",), "learning_rate": ("lstm",), "hidden_dim": ("lstm",), "num_layers": ("lstm",),
    "init": ("lstm",), "init_scale": ("lstm",), "reset_adam": ("lstm",), "p": ("ar", "arima"),
    "d": ("arima",), "q": ("arima",), "q_scale": ("ekf",), "r_scale": ("ekf",),
    "refit": ("ar", "arima"), "scaling": ("lstm", "ekf", "ar", "arima", "naive", "oracle"),
}


def _add_run_args(p):
    p.add_argument("--config", help="INI config file, or a report JSON to replay")
    p.add_argument("--series", help="input CSV")
    p.add_argument("--column", help="value column (name or 0-based index)")
    p.add_argument("--time-column", help="timestamp column (name or 0-based index)")
    p.add_argument("-T", "--train-length", dest="T", type=int, help="training length T")
    p.add_argument("-N", "--horizon", dest="N", type=int, help="number of one-step forecasts N")
    p.add_argument("--preset", help="named (T, N, AR/ARIMA order) preset, e.g. apple")
    p.add_argument("--feedback", choices=["prediction", "observation"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_true", help="include wall time in report JSON")
    p.add_argument("--plot", action="store_true", help="also write plot CSV per method")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--init", choices=["seeded", "zero"])
    p.add_argument("--init-scale", type=float)
    p.add_argument("--reset-adam", action="store_true", default=None)
    p.add_argument("--p", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--q-scale", type=float)
    p.add_argument("--r-scale", type=float)
    p.add_argument("--fit-once", dest="refit", action="store_false", default=None,
                   help="AR/ARIMA: fit on the first window only")
    p.add_argument("--no-scaling", dest="scaling", action="store_false", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="rtforecast", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forecast", help="run one method through the rolling scheme")
    _add_run_args(p)
    p.add_argument("--method", help="method kind or config section name (default lstm)")
    p.add_argument("--training-log", help="CSV of per-epoch losses (LSTM only)")

    p = sub.add_parser("compare", help="run several methods on the same series")
    _add_run_args(p)
    p.add_argument("--methods", help="comma-separated kinds, e.g. lstm,ekf,ar,arima,naive")

    p = sub.add_parser("gradcheck", help="BPTT against central finite differences")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--hidden", type=int, default=4)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("synth", help="write a seeded synthetic series as CSV")
    p.add_argument("kind", choices=synth.KINDS)
    p.add_argument("--points", type=int, default=230)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (stdout when omitted)")
    p.add_argument("--period", type=float)
    p.add_argument("--level", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--start", type=float)

    p = sub.add_parser("emit-plot", help="convert a report JSON into t,observed,predicted,abs_diff CSV")
    p.add_argument("report")
    p.add_argument("--out", help="output CSV (stdout when omitted)")
    return parser


def _method_overrides(args):
    values = {PARAM_FLAGS[k]: getattr(args, k) for k in PARAM_FLAGS if getattr(args, k) is not None}
    for key in ("reset_adam", "refit", "scaling"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    return values


def resolve_config(args, command):
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg.override(series=args.series, column=args.column, time_column=args.time_column, T=args.T,
                 N=args.N, preset=args.preset, feedback=args.feedback, seed=args.seed,
                 output=args.out, workers=args.workers)

    if command == "forecast":
        if args.method:
            chosen = [m for m in cfg.methods if m.name == args.method]
            cfg.methods = chosen or [MethodSpec(args.method)]
        elif not cfg.methods:
            cfg.methods = [MethodSpec("lstm")]
        elif len(cfg.methods) > 1:
            raise ConfigError("config defines several methods; pick one with --method")
    elif args.methods:
        by_name = {m.name: m for m in cfg.methods}
        cfg.methods = [by_name.get(n.strip(), MethodSpec(n.strip())) for n in args.methods.split(",") if n.strip()]
    if not cfg.methods:
        raise ConfigError("no methods to run")

    for key, value in _method_overrides(args).items():
        for m in cfg.methods:
            if m.kind in PARAM_KINDS[key]:
                m.params[key] = value

    if cfg.output is None:
        cfg.output = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
    cfg.apply_preset()
    cfg.validate()
    for m in cfg.methods:
        if m.kind == "lstm" and "seed" not in m.params:
            m.params["seed"] = derive_seed(cfg.seed, m.kind)
    # round trip through from_dict so type errors surface before any work starts
    return RunConfig.from_dict(cfg.to_dict())


def _report_path(cfg, report):
    return os.path.join(cfg.output, f"{report.series_id}__{report.method}.json")


def _write_outputs(cfg, report, args):
    path = _report_path(cfg, report)
    atomic_write(path, report.to_json(include_timing=args.timing))
    if args.plot and report.records:
        atomic_write(path[:-len(".json")] + ".plot.csv", plot_csv(plot_rows(report)))
    return path


def _print_config(cfg):
    print("# resolved configuration")
    print(cfg.to_ini(), end="")
    print(f"# seed: {cfg.seed}")
    for m in cfg.methods:
        if "seed" in m.params:
            print(f"# {m.name} seed: {m.params['seed']}")


def _summary_line(report):
    metric = "n/a" if report.metric_e is None else f"{report.metric_e:.6g}"
    line = f"{report.method:<16} E={metric:<12} status={report.status}"
    return line + (f" ({report.error})" if report.error else "")


def cmd_forecast(args):
    cfg = resolve_config(args, "forecast")
    _print_config(cfg)
    series = load_csv(cfg.series, cfg.column, cfg.time_column).first()
    spec = cfg.methods[0]
    report, fc = run_method(series, spec, cfg.T, cfg.N, cfg.feedback, cfg.seed or 0,
                            echo=cfg.single(spec).to_dict(), return_forecaster=True)
    path = _write_outputs(cfg, report, args)
    if args.training_log and isinstance(fc, SequentialLstm):
        write_training_log(args.training_log, fc.history)
    print(_summary_line(report))
    print(f"report: {path}")
    return 0 if report.status == "ok" else 1


def cmd_compare(args):
    cfg = resolve_config(args, "compare")
    _print_config(cfg)
    series = load_csv(cfg.series, cfg.column, cfg.time_column).first()
    reports = compare_methods(series, cfg.methods, cfg.T, cfg.N, cfg.feedback, cfg.seed or 0,
                              cfg.workers or 1)
    by_name = {m.name: m for m in cfg.methods}
    summary = []
    for report in reports:
        report.config["run_config"] = cfg.single(by_name[report.method]).to_dict()
        path = _write_outputs(cfg, report, args)
        summary.append({"method": report.method, "metric_e": report.metric_e,
                        "status": report.status, "report": os.path.basename(path)})
        print(_summary_line(report))
    atomic_write(os.path.join(cfg.output, f"{series.id}__summary.json"),
                 json.dumps(summary, indent=2) + "\n")
    return 0 if all(r.status == "ok" for r in reports) else 1


def cmd_gradcheck(args):
    errors = gradient_check(args.instances, args.hidden, args.window, args.layers, args.seed)
    worst = max(errors)
    print(f"instances={len(errors)} hidden={args.hidden} window={args.window} layers={args.layers} seed={args.seed}")
    print(f"max relative error: {worst:.3e} (tolerance {args.tol:g})")
    if worst >= args.tol:
        bad = [k for k, e in enumerate(errors) if e >= args.tol]
        print(f"FAIL: instances over tolerance: {bad}")
        return 1
    print("PASS")
    return 0


def cmd_synth(args):
    params = {k: getattr(args, k) for k in ("period", "level", "amplitude", "noise", "sigma", "start")
              if getattr(args, k) is not None}
    series = synth.generate(args.kind, args.points, seed=args.seed, **params)
    text = series_to_csv(series)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_emit_plot(args):
    with open(args.report) as fh:
        report = RunReport.from_dict(json.load(fh))
    text = plot_csv(plot_rows(report))
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"forecast": cmd_forecast, "compare": cmd_compare, "gradcheck": cmd_gradcheck,
            "synth": cmd_synth, "emit-plot": cmd_emit_plot}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("configuration errors:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return 2
    except (ForecastError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
