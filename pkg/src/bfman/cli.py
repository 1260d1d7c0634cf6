"""Command-line entry point: ``bfman simulate | fit | eval | report``.

Failures exit with status 1 and print ``error: <category>: <message>`` on
one line; usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import subprocess
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .metrics import FitSummary, evaluate_fit, summarize
from .model import ConfigError, Hyperparams
from .simulate import GeneratedDataset, ScenarioSpec, builtin_scenarios, generate
from .workflow import fit

logger = logging.getLogger("bfman")


class CLIError(Exception):
    def __init__(self, category, message):
        self.category = category
        super().__init__(message)

    def __reduce__(self):
        return CLIError, (self.category, str(self))


def _code_version():
    here = Path(__file__).resolve().parent
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=here,
                             capture_output=True, text=True, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+{rev}" if rev else __version__


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CLIError("io", f"cannot write to {out}: {exc}") from None
    return out


def _manifest(out: Path, command, config, seeds, outputs, started):
    io.write_json(out / "manifest.json", {
        "command": command, "config": config, "seeds": seeds,
        "code_version": _code_version(), "python": platform.python_version(),
        "numpy": np.__version__, "wall_clock_seconds": round(time.time() - started, 3),
        "outputs": sorted(outputs),
    })


def _pool_map(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_one(spec: ScenarioSpec, replicate: int):
    return replicate, generate(spec, replicate)


def cmd_simulate(args):
    started = time.time()
    if args.spec:
        try:
            spec = ScenarioSpec.from_json(args.spec)
        except FileNotFoundError as exc:
            raise CLIError("io", str(exc)) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise CLIError("config", f"bad scenario spec: {exc}") from None
    else:
        spec = builtin_scenarios()[args.scenario]
    changes = {}
    if args.reps is not None:
        changes["replicates"] = args.reps
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.n is not None:
        changes["n"] = args.n
    spec = spec.with_(**changes)
    out = _out_dir(args.out)
    outputs = ["scenario.json"]
    io.write_json(out / "scenario.json", spec.to_dict())
    for r, ds in _pool_map(_simulate_one, [(spec, r) for r in range(spec.replicates)], args.threads):
        stem = f"rep{r:03d}"
        io.write_matrix_csv(out / f"{stem}_Y.csv", ds.Y)
        io.write_json(out / f"{stem}_truth.json", ds.truth_dict())
        outputs += [f"{stem}_Y.csv", f"{stem}_truth.json"]
    _manifest(out, "simulate", spec.to_dict(), {"base_seed": spec.seed}, outputs, started)
    print(f"wrote {spec.replicates} datasets to {out}")


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _load_config(args) -> Hyperparams:
    try:
        hp = Hyperparams.from_json(args.config) if args.config else Hyperparams()
    except FileNotFoundError as exc:
        raise CLIError("io", str(exc)) from None
    except (json.JSONDecodeError, TypeError) as exc:
        raise CLIError("config", f"bad config file: {exc}") from None
    chain = {key: getattr(args, key) for key in ("iters", "burnin", "thin", "seed")
             if getattr(args, key) is not None}
    return hp.replace(chain=chain) if chain else hp


def _write_fit_summary(out: Path, draws, report, prefix, effective=None):
    summary = summarize(draws, report.retained_columns)
    files = {
        f"{prefix}lambda_mean.csv": (summary.lam_mean, "F"),
        f"{prefix}eta_mean.csv": (summary.eta_mean, "F"),
        f"{prefix}inclusion.csv": (summary.inclusion, "F"),
        f"{prefix}theta.csv": (summary.theta_mean[None, :], "F"),
        f"{prefix}sigma2.csv": (summary.sigma2_mean[None, :], "V"),
    }
    for name, (M, pre) in files.items():
        io.write_matrix_csv(out / name, M, prefix=pre)
    desc = io.write_binary(out / f"{prefix}gram.bin",
                           {"gram_lambda": summary.gram_lambda, "gram_eta": summary.gram_eta})
    io.write_json(out / f"{prefix}gram.json", desc)
    rep = report.to_dict()
    if effective is not None:
        rep["effective_factors"] = effective
    return list(files) + [f"{prefix}gram.bin", f"{prefix}gram.json"], rep


def _fit_one(data_path, out_dir, hp, model, k, threshold, save_draws, command):
    started = time.time()
    try:
        Y, _ = io.read_matrix_csv(data_path)
    except io.ParseError as exc:
        raise CLIError("parse", str(exc)) from None
    except FileNotFoundError as exc:
        raise CLIError("io", str(exc)) from None
    try:
        result = fit(Y, hp, model=model, k=k, threshold=threshold)
    except ConfigError as exc:
        raise CLIError("config", str(exc)) from None
    except FloatingPointError as exc:
        raise CLIError("sampler", str(exc)) from None
    out = _out_dir(out_dir)
    outputs, rep = _write_fit_summary(out, result.draws, result.report, "",
                                      result.effective_factors)
    reports = {"initial": rep, "model": model, "K": result.hp.K}
    if result.final_draws is not None:
        more, final = _write_fit_summary(out, result.final_draws, result.final_report, "final_")
        outputs += more
        reports["final"] = final
    io.write_json(out / "report.json", reports)
    from .geweke import convergence_zscore

    post = result.draws.loglik[result.hp.chain.burnin:]
    diagnostics = {
        "mh_accept_rate": float(np.nanmean(result.draws.accept_rate[result.hp.chain.burnin:]))
        if model == "bfman" else None,
        "loglik_geweke_z": convergence_zscore(post) if post.size >= 40 else None,
        "loglik_trace": result.draws.loglik.tolist(),
    }
    io.write_json(out / "diagnostics.json", diagnostics)
    outputs += ["report.json", "diagnostics.json"]
    if save_draws:
        io.save_draws(out, result.draws)
        outputs += ["draws.bin", "draws.json"]
    _manifest(out, command, {"hyperparams": result.hp.to_dict(), "model": model, "k": k,
                             "threshold": threshold, "data": str(data_path)},
              {"chain": result.hp.chain.seed}, outputs, started)
    return str(out), result.selected_k


def cmd_fit(args):
    hp = _load_config(args)
    k = args.k if args.k == "auto" else int(args.k)
    paths = args.data
    outs = [Path(args.out)] if len(paths) == 1 else [Path(args.out) / Path(p).stem for p in paths]
    command = " ".join(["fit"] + sys.argv[2:]) if sys.argv[1:2] == ["fit"] else "fit"
    jobs = [(p, o, hp, args.model, k, args.threshold, args.save_draws, command)
            for p, o in zip(paths, outs)]
    for out, selected in _pool_map(_fit_one, jobs, args.threads):
        print(f"{out}: {args.model} selected k={selected}")


def _parse_k(value):
    if value == "auto":
        return value
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("--k must be 'auto' or a positive integer") from None
    if k < 1:
        raise argparse.ArgumentTypeError("--k must be 'auto' or a positive integer")
    return str(k)


# ---------------------------------------------------------------------------
# eval / report
# ---------------------------------------------------------------------------

def load_fit_summary(fit_dir, which="initial"):
    fit_dir = Path(fit_dir)
    prefix = "final_" if which == "final" else ""
    if not (fit_dir / f"{prefix}gram.json").is_file():
        raise CLIError("io", f"{fit_dir} holds no {which} fit summary")
    rep = io.read_json(fit_dir / "report.json")[which]
    grams = io.read_binary(fit_dir / f"{prefix}gram.json")
    read = lambda name: io.read_matrix_csv(fit_dir / f"{prefix}{name}")[0]  # noqa: E731
    return FitSummary(
        lam_mean=read("lambda_mean.csv"), eta_mean=read("eta_mean.csv"),
        inclusion=read("inclusion.csv"), theta_mean=read("theta.csv")[0],
        sigma2_mean=read("sigma2.csv")[0], gram_lambda=grams["gram_lambda"].copy(),
        gram_eta=grams["gram_eta"].copy(),
        retained_columns=np.flatnonzero(rep["retained"]),
    ), rep


EVAL_FIELDS = ["scenario", "replicate", "method", "fit", "rv_loading", "rv_score", "tp", "fp",
               "tn", "fn", "true_k", "selected_k", "theta_true", "theta_hat", "theta_surplus"]


def cmd_eval(args):
    try:
        truth = GeneratedDataset.from_truth(io.read_json(args.truth))
    except FileNotFoundError as exc:
        raise CLIError("io", str(exc)) from None
    summary, rep = load_fit_summary(args.fit, args.which)
    manifest = Path(args.fit) / "manifest.json"
    method = io.read_json(manifest)["config"]["model"] if manifest.is_file() else "unknown"
    try:
        result = evaluate_fit(truth, summary)
    except ValueError as exc:
        raise CLIError("dimension", str(exc)) from None
    if "effective_factors" in rep:
        result.selected_k = rep["effective_factors"]
    row = result.row(scenario=args.scenario or "", replicate=args.replicate if args.replicate is not None else "",
                     method=method, fit=str(args.fit))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    new = not out.is_file() or out.stat().st_size == 0
    with open(out, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=EVAL_FIELDS, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    print(f"rv_loading={result.rv_loading:.4f} rv_score={result.rv_score:.4f} "
          f"selected_k={result.selected_k}")


def _read_eval_rows(paths):
    rows = []
    for p in paths:
        p = Path(p)
        files = sorted(p.rglob("*.csv")) if p.is_dir() else [p]
        for f in files:
            with open(f, newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames and "rv_loading" in reader.fieldnames:
                    rows.extend(reader)
    return rows


def aggregate(rows):
    """Median RVs, selected-k histograms and theta summaries per scenario and method."""
    groups = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["method"]), []).append(r)
    table = []
    for (scenario, method), rs in sorted(groups.items()):
        ks = [int(r["selected_k"]) for r in rs]
        hist = {str(k): ks.count(k) for k in sorted(set(ks))}
        theta_hat = np.array([[float(v) for v in r["theta_hat"].split(";")] for r in rs
                              if r["theta_hat"]], dtype=float)
        with warnings.catch_warnings():
            # a true factor unmatched in every replicate has an all-nan column
            warnings.simplefilter("ignore", RuntimeWarning)
            med_theta = np.nanmedian(theta_hat, axis=0) if theta_hat.size else []
        table.append({
            "scenario": scenario, "method": method, "replicates": len(rs),
            "median_rv_loading": float(np.median([float(r["rv_loading"]) for r in rs])),
            "median_rv_score": float(np.median([float(r["rv_score"]) for r in rs])),
            "true_k": int(rs[0]["true_k"]),
            "selected_k_hist": hist,
            "theta_true": rs[0]["theta_true"],
            "median_theta_hat": ";".join(f"{v:.4g}" for v in med_theta) if method == "bfman" else "",
        })
    return table


def cmd_report(args):
    started = time.time()
    rows = _read_eval_rows(args.runs)
    if not rows:
        raise CLIError("input", "no evaluation rows found in " + ", ".join(args.runs))
    table = aggregate(rows)
    out = _out_dir(args.out)
    fields = ["scenario", "method", "replicates", "median_rv_loading", "median_rv_score",
              "true_k", "selected_k_hist", "theta_true", "median_theta_hat"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in table:
            w.writerow({**row, "selected_k_hist": json.dumps(row["selected_k_hist"], sort_keys=True)})
    io.write_json(out / "summary.json", table)
    _manifest(out, "report", {"runs": [str(r) for r in args.runs]}, {}, ["summary.csv", "summary.json"],
              started)
    for row in table:
        print(f"{row['scenario']} {row['method']}: RV(LL')={row['median_rv_loading']:.3f} "
              f"RV(ee')={row['median_rv_score']:.3f} k={row['selected_k_hist']}")


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="bfman", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate benchmark datasets")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=int, choices=[1, 2, 3, 4])
    src.add_argument("--spec", help="JSON scenario spec")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="override the sample size (e.g. reduced scenario 4)")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to one or more data CSVs")
    p.add_argument("--data", required=True, nargs="+")
    p.add_argument("--model", choices=["bfman", "mgps"], default="bfman")
    p.add_argument("--config")
    p.add_argument("--k", type=_parse_k, default="auto")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--iters", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--save-draws", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a fit against a truth sidecar")
    p.add_argument("--truth", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--out", required=True, help="CSV to append to")
    p.add_argument("--which", choices=["initial", "final"], default="initial")
    p.add_argument("--scenario")
    p.add_argument("--replicate", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate evaluation CSVs")
    p.add_argument("--runs", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CLIError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
