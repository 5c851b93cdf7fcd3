"""Command-line front end: run verification tasks, evaluate factors, sample objects.

Subcommands
-----------
verify      run one verification task and write its report
verify-all  run a preset grid of tasks and aggregate a single pass/fail
factor      evaluate one analytic density/transform factor from inline inputs
gamma       evaluate the multivariate gamma function
volume      evaluate a Stiefel manifold volume
sample      draw a random matrix (stiefel | psd | rect) and write it to a file
demo        run the congruence-factor discrepancy demonstration

Exit codes: 0 pass, 1 fail, 2 usage error, 3 inconclusive statistics.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .algebra import AlgebraKind
from .charts import assemble_sd_batch, assemble_svd_batch, sample_stiefel_batch
from .errors import (
    ConfigurationError,
    DivalgError,
    InconclusiveStatisticsError,
    RegistryError,
    UnsupportedAlgebraError,
)
from .linalg import Mat, save_matrix
from .measures import (
    FactorInput,
    coupling_factor_log,
    decomposition_density_log,
    mv_gamma_log,
    stiefel_volume_log,
    tau,
    transform_factor_log,
    uhlig_svd_alternative_log,
)
from .verify import Report, TaskSpec, run_task

TASK_NAMES = {
    "svd": "SVD",
    "sd": "SD",
    "w": "W",
    "qr": "QR",
    "chol": "CHOL",
    "chol-x": "CHOL_X",
    "mp-herm": "MP_HERM",
    "mp-rect": "MP_RECT",
    "uhlig-svd": "UHLIG_SVD",
    "uhlig-qr": "UHLIG_QR",
    "uhlig-mp": "UHLIG_MP",
    "congruence-ns": "CONGRUENCE_NS",
}

ENGINE_NAMES = {
    "chart": "CHART",
    "mc-equality": "MC_EQUALITY",
    "mc-ratio": "MC_RATIO",
    "demo": "DEMO",
}

FACTOR_KINDS = {
    "tau": ("tau", None),
    "svd": ("density", "SVD"),
    "sd": ("density", "SD"),
    "qr": ("density", "QR"),
    "chol": ("density", "CHOL"),
    "mp-herm": ("transform", "MP_HERM"),
    "mp-rect": ("transform", "MP_RECT"),
    "uhlig-svd": ("transform", "UHLIG_SVD"),
    "uhlig-qr": ("transform", "UHLIG_QR"),
    "uhlig-mp": ("transform", "UHLIG_MP"),
    "congruence-ns": ("transform", "CONGRUENCE_NS"),
    "w": ("coupling", "W"),
    "chol-x": ("coupling", "CHOL_X"),
    "uhlig-svd-alt": ("alternative", None),
}

TABLE_DISCLAIMER = (
    "# table view is a reading convenience; field layout is not stable -- "
    "use --format json for scripts"
)


@dataclass(frozen=True)
class CliConfig:
    """Validated flag bundle for the verify paths."""

    command: str
    task: TaskSpec
    jobs: int
    out: str | None
    fmt: str


def _fail_usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _task_from_args(args: argparse.Namespace) -> TaskSpec:
    if args.task not in TASK_NAMES:
        raise ConfigurationError(
            f"unknown task {args.task!r}; expected one of {sorted(TASK_NAMES)}"
        )
    engine = ""
    if args.engine:
        if args.engine not in ENGINE_NAMES:
            raise ConfigurationError(
                f"unknown engine {args.engine!r}; expected one of {sorted(ENGINE_NAMES)}"
            )
        engine = ENGINE_NAMES[args.engine]
    return TaskSpec(
        theorem_id=TASK_NAMES[args.task],
        beta=args.beta,
        m=args.m,
        n=args.n,
        q=args.q,
        engine=engine,
        b_source=args.b_matrix,
        trials=args.trials,
        points=args.points,
        step=args.step,
        eigen_box=(args.lambda_lo, args.lambda_hi),
        gap=args.gap,
        rtol=args.rtol,
        ztol=args.ztol,
        cv_tol=args.cv_tol,
        seed=args.seed,
    )


def _records_to_csv(records: list[dict]) -> str:
    keys = sorted({k for rec in records for k in rec})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, restval="")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec)
    return buf.getvalue()


def _records_to_table(records: list[dict]) -> str:
    keys = sorted({k for rec in records for k in rec})
    rows = [[_cell(rec.get(k, "")) for k in keys] for rec in records]
    widths = [max(len(k), *(len(r[i]) for r in rows)) if rows else len(k)
              for i, k in enumerate(keys)]
    lines = [TABLE_DISCLAIMER]
    lines.append("  ".join(k.ljust(w) for k, w in zip(keys, widths)))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_report(report: Report, fmt: str, out: str | None) -> None:
    if fmt == "json":
        _emit(report.to_json(indent=2) + "\n", out)
    elif fmt == "csv":
        _emit(_records_to_csv(list(report.records)), out)
    else:
        header = (
            f"task={report.task.theorem_id} engine={report.engine} "
            f"beta={report.task.beta} pass={report.passed}\n"
        )
        _emit(header + _records_to_table(list(report.records)), out)


def _exit_for_error(exc: Exception) -> int:
    if isinstance(exc, UnsupportedAlgebraError):
        return _fail_usage(f"octonion results conjectural -- {exc}")
    if isinstance(exc, (RegistryError, ConfigurationError)):
        return _fail_usage(str(exc))
    if isinstance(exc, InconclusiveStatisticsError):
        print(f"inconclusive: {exc}", file=sys.stderr)
        return 3
    if isinstance(exc, DivalgError):
        print(f"failed: {exc}", file=sys.stderr)
        return 1
    raise exc


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        config = CliConfig(
            command="verify",
            task=_task_from_args(args),
            jobs=args.jobs,
            out=args.out,
            fmt=args.format,
        )
    except Exception as exc:  # noqa: BLE001 -- mapped to exit codes
        return _exit_for_error(exc)
    try:
        report = run_task(config.task, jobs=config.jobs)
    except Exception as exc:  # noqa: BLE001
        return _exit_for_error(exc)
    _write_report(report, config.fmt, config.out)
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# verify-all presets


def preset_tasks(preset: str, seed: int) -> list[TaskSpec]:
    """The verification grid: every theorem through every admissible engine."""
    if preset == "desk":
        trials, points = 50_000, 8
    elif preset == "full":
        trials, points = 200_000, 20
    else:
        raise ConfigurationError(f"unknown preset {preset!r}; expected desk or full")
    tasks: list[TaskSpec] = []

    def add(theorem, beta, engine="", **kw):
        tasks.append(
            TaskSpec(
                theorem_id=theorem, beta=beta, engine=engine,
                trials=trials, points=points, seed=seed, **kw,
            )
        )

    for beta in (1, 2, 4):
        for m, q in ((2, 1), (3, 2), (4, 2)):
            add("MP_HERM", beta, m=m, q=q)
        for n, m, q in ((2, 2, 1), (3, 2, 1), (3, 3, 2)):
            add("MP_RECT", beta, n=n, m=m, q=q)
        for m, q in ((2, 1), (3, 2)):
            add("CHOL", beta, m=m, q=q)
        for m, n in ((2, 1), (3, 2)):
            add("UHLIG_QR", beta, m=m, n=n)
        for m in (2, 3):
            add("CONGRUENCE_NS", beta, m=m)
    for beta in (1, 2):
        for n, m, q in ((3, 2, 1), (3, 3, 2)):
            add("W", beta, n=n, m=m, q=q)
        for theorem in ("UHLIG_SVD", "UHLIG_MP"):
            for m, n in ((2, 1), (3, 2)):
                for b_source in ("random", "identity"):
                    add(theorem, beta, m=m, n=n, b_source=b_source)
        add("MP_HERM", beta, engine="MC_EQUALITY", m=2, q=1)
        add("MP_RECT", beta, engine="MC_EQUALITY", n=3, m=2, q=1)
        add("SD", beta, m=2, q=1)
        add("SVD", beta, n=2, m=2, q=1)
        add("QR", beta, n=2, m=2, q=2)
        add("CHOL_X", beta, n=3, m=2, q=2)
    add("UHLIG_SVD", 1, engine="DEMO", m=2, n=1, b_source="demo")
    return tasks


def cmd_verify_all(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    try:
        tasks = preset_tasks(args.preset, args.seed)
    except Exception as exc:  # noqa: BLE001
        return _exit_for_error(exc)
    results: list[dict] = []
    n_fail = n_inconclusive = 0
    for task in tasks:
        try:
            report = run_task(task, jobs=args.jobs)
        except InconclusiveStatisticsError as exc:
            n_inconclusive += 1
            results.append(
                {"task": task.to_dict(), "inconclusive": str(exc), "pass": False}
            )
            continue
        except DivalgError as exc:
            n_fail += 1
            results.append(
                {"task": task.to_dict(), "error": str(exc), "pass": False}
            )
            continue
        if not report.passed:
            n_fail += 1
        results.append(report.to_dict())
    passed = n_fail == 0 and n_inconclusive == 0
    doc = {
        "preset": args.preset,
        "seed": args.seed,
        "version": __version__,
        "tasks": results,
        "n_tasks": len(results),
        "n_failed": n_fail,
        "n_inconclusive": n_inconclusive,
        "pass": passed,
        "runtime_ms": int((time.perf_counter() - start) * 1000),
    }
    if args.format == "json":
        _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    else:
        rows = []
        for item in results:
            task = item["task"]
            rows.append(
                {
                    "theorem": task["theorem_id"],
                    "engine": task["engine"],
                    "beta": task["beta"],
                    "m": task["m"],
                    "n": task["n"],
                    "q": task["q"],
                    "b_source": task["b_source"],
                    "pass": item["pass"],
                    "note": item.get("inconclusive", item.get("error", "")),
                }
            )
        text = _records_to_csv(rows) if args.format == "csv" else _records_to_table(rows)
        summary = f"pass={passed} failed={n_fail} inconclusive={n_inconclusive}\n"
        _emit(text + summary if args.format != "csv" else text, args.out)
    if n_fail:
        return 1
    if n_inconclusive:
        return 3
    return 0


# ---------------------------------------------------------------------------
# factor / gamma / volume / sample


def _spectrum_arg(raw: str | None) -> tuple[float, ...] | None:
    if raw is None:
        return None
    return tuple(float(v) for v in raw.split(","))


def cmd_factor(args: argparse.Namespace) -> int:
    if args.kind not in FACTOR_KINDS:
        return _fail_usage(
            f"unknown factor kind {args.kind!r}; expected one of {sorted(FACTOR_KINDS)}"
        )
    family, name = FACTOR_KINDS[args.kind]
    try:
        if family == "tau":
            value = tau(args.beta, args.q)
            print(f"value: {value:.10g}")
            return 0
        fi = FactorInput(
            beta=args.beta,
            m=args.m,
            n=args.n,
            q=args.q,
            d=_spectrum_arg(args.d),
            lam=_spectrum_arg(getattr(args, "lambda")),
            delta=_spectrum_arg(args.delta),
            t_diag=_spectrum_arg(args.t_diag),
            det_b=args.det_b,
            det_t1t1=args.det_t1t1,
            det_l1l1=args.det_l1l1,
            det_s11=args.det_s11,
            det_gbh=args.det_gbh,
        )
        if family == "density":
            log_value = decomposition_density_log(name, fi)
        elif family == "transform":
            log_value = transform_factor_log(name, fi)
        elif family == "coupling":
            log_value = coupling_factor_log(name, fi)
        else:
            log_value = uhlig_svd_alternative_log(fi)
    except DivalgError as exc:
        return _fail_usage(str(exc))
    print(f"log: {log_value:.10g}")
    print(f"value: {np.exp(log_value):.10g}")
    return 0


def cmd_gamma(args: argparse.Namespace) -> int:
    try:
        log_value = mv_gamma_log(args.m, args.beta, args.a)
    except DivalgError as exc:
        return _fail_usage(str(exc))
    print(f"log: {log_value:.10g}")
    print(f"value: {np.exp(log_value):.10g}")
    return 0


def cmd_volume(args: argparse.Namespace) -> int:
    try:
        log_value = stiefel_volume_log(args.m, args.n, args.beta)
    except DivalgError as exc:
        return _fail_usage(str(exc))
    print(f"log: {log_value:.10g}")
    print(f"value: {np.exp(log_value):.10g}")
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    try:
        kind = AlgebraKind.from_beta(args.beta)
    except DivalgError as exc:
        return _fail_usage(str(exc))
    if args.beta == 8:
        return _fail_usage(
            "octonion results conjectural -- sampling supports beta in {1,2,4}"
        )
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([args.seed, 0x5A])))
    lo, hi = args.lambda_lo, args.lambda_hi
    try:
        if args.space == "stiefel":
            if args.n < args.q:
                raise ConfigurationError(f"stiefel needs n >= q, got n={args.n} q={args.q}")
            data = sample_stiefel_batch(args.n, args.q, kind, rng, 1)[0]
        elif args.space == "psd":
            if args.m < args.q:
                raise ConfigurationError(f"psd needs m >= q, got m={args.m} q={args.q}")
            lam = np.sort(rng.uniform(lo, hi, size=(1, args.q)))[:, ::-1]
            w1 = sample_stiefel_batch(args.m, args.q, kind, rng, 1)
            data = assemble_sd_batch(w1, lam, args.beta)[0]
        else:
            if min(args.n, args.m) < args.q:
                raise ConfigurationError(
                    f"rect needs q <= min(n, m), got n={args.n} m={args.m} q={args.q}"
                )
            d = np.sort(rng.uniform(lo, hi, size=(1, args.q)))[:, ::-1]
            v1 = sample_stiefel_batch(args.n, args.q, kind, rng, 1)
            w1 = sample_stiefel_batch(args.m, args.q, kind, rng, 1)
            data = assemble_svd_batch(v1, d, w1, args.beta)[0]
    except DivalgError as exc:
        return _fail_usage(str(exc))
    save_matrix(Mat(kind, data), args.out)
    print(f"wrote {args.space} sample to {args.out}")
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    try:
        task = TaskSpec(
            theorem_id="UHLIG_SVD",
            beta=args.beta,
            m=args.m,
            n=args.n,
            engine="DEMO",
            b_source=args.b_matrix,
            seed=args.seed,
        )
        report = run_task(task)
    except Exception as exc:  # noqa: BLE001
        return _exit_for_error(exc)
    _write_report(report, args.format, args.out)
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# parser


def _add_task_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=int, required=True, help="algebra dimension: 1, 2 or 4")
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--rtol", type=float, default=1e-5)
    p.add_argument("--ztol", type=float, default=3.0)
    p.add_argument("--cv-tol", type=float, default=0.02)
    p.add_argument("--lambda-lo", type=float, default=1.0)
    p.add_argument("--lambda-hi", type=float, default=2.0)
    p.add_argument("--gap", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--b-matrix", default="random",
                   help="'random', 'identity', 'demo', or a matrix file path")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv", "table"), default="json")
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="divalg",
        description="Verification toolkit for matrix factorization measures "
        "over the real normed division algebras.",
    )
    parser.add_argument("--version", action="version", version=f"divalg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run one verification task")
    p.add_argument("--task", required=True, help=f"one of {sorted(TASK_NAMES)}")
    p.add_argument("--engine", default="", help=f"one of {sorted(ENGINE_NAMES)}")
    _add_task_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("verify-all", help="run a preset grid of tasks")
    p.add_argument("--preset", choices=("desk", "full"), default="desk")
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p)
    p.set_defaults(func=cmd_verify_all)

    p = sub.add_parser("factor", help="evaluate one analytic factor")
    p.add_argument("--kind", required=True, help=f"one of {sorted(FACTOR_KINDS)}")
    p.add_argument("--beta", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--lambda", dest="lambda", default=None,
                   help="eigenvalues, comma separated, descending")
    p.add_argument("--d", default=None, help="singular values, comma separated")
    p.add_argument("--delta", default=None, help="image eigenvalues, comma separated")
    p.add_argument("--t-diag", default=None, help="triangular diagonal, comma separated")
    p.add_argument("--det-b", type=float, default=None)
    p.add_argument("--det-t1t1", type=float, default=None)
    p.add_argument("--det-l1l1", type=float, default=None)
    p.add_argument("--det-s11", type=float, default=None)
    p.add_argument("--det-gbh", type=float, default=None)
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("gamma", help="multivariate gamma function")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--beta", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("volume", help="Stiefel manifold volume")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=int, required=True)
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("sample", help="draw a random matrix and write it to a file")
    p.add_argument("space", choices=("stiefel", "psd", "rect"))
    p.add_argument("--beta", type=int, required=True)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--lambda-lo", type=float, default=1.0)
    p.add_argument("--lambda-hi", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("demo", help="congruence-factor discrepancy demonstration")
    p.add_argument("--beta", type=int, default=1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--b-matrix", default="demo")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv", "table"), default="json")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
