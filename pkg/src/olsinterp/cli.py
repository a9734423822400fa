"""Command-line front end.

Exit status: 0 success, 2 input error, 3 violated rank assumption,
4 numerical failure.  Index sets are 1-based (``"1,3,5-9"``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import colops, inference, rowops, simlab
from .errors import InvalidInput, OlsInterpError, RaggedRow
from .estimator import Design, fit
from .linalg import Tolerance

# Reading --------------------------------------------------------------------


def read_csv_matrix(path: str | os.PathLike[str], has_header: bool = False) -> np.ndarray:
    """Parse a rectangular numeric CSV into a float matrix.

    Blank lines are ignored.  NaN and infinite tokens are rejected, as are rows
    whose field count differs from the first data row.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInput(f"cannot read {p}: {exc.strerror}") from exc
    rows: list[list[float]] = []
    width = None
    header_skipped = not has_header
    for lineno, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not fields or all(f.strip() == "" for f in fields):
            continue
        if not header_skipped:
            header_skipped = True
            continue
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise RaggedRow(lineno, width, len(fields), str(p))
        row = []
        for col, tok in enumerate(fields, start=1):
            try:
                val = float(tok.strip())
            except ValueError:
                raise InvalidInput(f"{p}: line {lineno}, column {col}: {tok!r} is not a number") from None
            if not math.isfinite(val):
                raise InvalidInput(f"{p}: line {lineno}, column {col}: non-finite value {tok!r}")
            row.append(val)
        rows.append(row)
    if not rows:
        raise InvalidInput(f"{p}: no numeric rows")
    return np.array(rows, dtype=np.float64)


def read_vector(path: str, has_header: bool = False) -> np.ndarray:
    m = read_csv_matrix(path, has_header)
    if m.shape[0] != 1 and m.shape[1] != 1:
        raise InvalidInput(f"{path}: expected a single row or column, got shape {m.shape}")
    return m.reshape(-1)


def parse_index_set(spec: str, limit: int) -> list[int]:
    """``"1,3,5-9"`` to sorted 0-based indices, bounds-checked against ``limit``."""
    out: set[int] = set()
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo_s, hi_s = part.split("-", 1)
                lo, hi = int(lo_s), int(hi_s)
                if lo > hi:
                    raise InvalidInput(f"empty range {part!r}")
                out.update(range(lo, hi + 1))
            else:
                out.add(int(part))
        except ValueError:
            raise InvalidInput(f"bad index set entry {part!r}") from None
    if not out:
        raise InvalidInput("index set is empty")
    if min(out) < 1 or max(out) > limit:
        raise InvalidInput(f"index set {spec!r} out of bounds 1..{limit}")
    return sorted(i - 1 for i in out)


def parse_floats(spec: str) -> np.ndarray:
    if os.path.exists(spec):
        return read_vector(spec)
    try:
        vals = [float(t) for t in spec.split(",") if t.strip()]
    except ValueError:
        raise InvalidInput(f"cannot parse numbers from {spec!r}") from None
    arr = np.array(vals)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise InvalidInput(f"need finite numbers, got {spec!r}")
    return arr


def _load_xy(args: argparse.Namespace) -> tuple[Design, np.ndarray]:
    x = read_csv_matrix(args.x, args.header)
    if args.y_col is not None:
        col = args.y_col - 1
        if not 0 <= col < x.shape[1]:
            raise InvalidInput(f"--y-col {args.y_col} outside 1..{x.shape[1]}")
        y = x[:, col].copy()
        x = np.delete(x, col, axis=1)
    else:
        y = read_vector(args.y, args.header)
        if y.size != x.shape[0]:
            raise InvalidInput(f"response has {y.size} entries, design has {x.shape[0]} rows")
    return Design(x, Tolerance.from_env()), y


# Writing --------------------------------------------------------------------


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value"):
        return obj.value
    return obj


def _flatten_csv(result: dict[str, Any]) -> list[list[Any]]:
    rows: list[list[Any]] = []
    for key, val in result.items():
        arr = np.asarray(val) if isinstance(val, (list, np.ndarray)) else None
        if arr is not None and arr.ndim == 2:
            for i, row in enumerate(arr):
                rows.append([f"{key}[{i + 1}]", *(repr(float(v)) for v in row)])
        elif arr is not None:
            rows.append([key, *(repr(float(v)) if v is not None else "" for v in arr.tolist())])
        else:
            rows.append([key, "" if val is None else (repr(val) if isinstance(val, float) else val)])
    return rows


def _emit(result: dict[str, Any], args: argparse.Namespace) -> None:
    result = _jsonable(result)
    if args.format == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(_flatten_csv(result))
        text = buf.getvalue()
    else:
        # repr-based float formatting round-trips exactly.
        text = json.dumps(result, indent=2) + "\n"
    _write(text, args.out)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _interval(pi: rowops.PredictionInterval) -> dict[str, Any]:
    return {"lower": pi.lower, "upper": pi.upper, "method": pi.method.value, "alpha": pi.alpha}


# Subcommands ------------------------------------------------------------------


def cmd_fit(args):
    d, y = _load_xy(args)
    r = fit(d, y)
    return {
        "regime": d.regime.value, "rank": d.rank, "n": d.n, "p": d.p,
        "beta": r.beta_hat, "fitted": r.fitted, "residuals": r.residuals, "hat_diag": r.hat_diag,
    }


def cmd_loo(args):
    d, y = _load_xy(args)
    loo = rowops.loo_residuals(d, y)
    return {"loo_residuals": loo.loo_residuals, "press": loo.press}


def cmd_press(args):
    d, y = _load_xy(args)
    return {"press": rowops.press(rowops.loo_residuals(d, y))}


def cmd_update(args):
    d, y = _load_xy(args)
    xs = read_csv_matrix(args.add_x, args.header)
    ys = read_vector(args.add_y, args.header)
    if xs.shape[0] != ys.size:
        raise InvalidInput(f"--add-x has {xs.shape[0]} rows but --add-y has {ys.size} values")
    r = fit(d, y)
    for xn, yn in zip(xs, ys):
        r = rowops.online_update(r, xn, float(yn))
    return {"regime": r.design.regime.value, "n": r.design.n, "beta": r.beta_hat}


def cmd_jackknife(args):
    d, y = _load_xy(args)
    jk = rowops.jackknife(d, y)
    return {"beta_jack": jk.beta_jack, "v_jack": jk.v_jack}


def cmd_jk_interval(args):
    d, y = _load_xy(args)
    return _interval(rowops.jackknife_interval(d, y, parse_floats(args.x_new), args.alpha))


def cmd_jkplus_interval(args):
    d, y = _load_xy(args)
    return _interval(rowops.jackknife_plus_interval(d, y, parse_floats(args.x_new), args.alpha))


def cmd_ci(args):
    d, y = _load_xy(args)
    return _interval(inference.prediction_ci(d, y, parse_floats(args.x_new), args.alpha))


def cmd_cochran(args):
    d, y = _load_xy(args)
    rep = colops.cochran(d, y, parse_index_set(args.j, d.p))
    return {
        "setting": rep.setting, "alpha_hat": rep.triple.alpha_hat, "beta_hat": rep.triple.beta_hat,
        "delta_hat": rep.triple.delta_hat, "direct_term": rep.direct_term, "bias_term": rep.bias_term,
        "deviation": rep.deviation, "holds": rep.holds,
    }


def cmd_fwl(args):
    d, y = _load_xy(args)
    j = parse_index_set(args.j, d.p)
    res = colops.partial_regularized(d, y, j)
    return {"j": [i + 1 for i in j], "beta_j": res.beta_j, "beta_jc": res.beta_jc,
            "beta_jc_available": res.beta_jc_available}


def cmd_ate(args):
    x = read_csv_matrix(args.x, args.header)
    z = read_vector(args.z, args.header)
    y = read_vector(args.y, args.header)
    return {"tau": colops.ate_estimate(x, z, y, Tolerance.from_env())}


def cmd_variance(args):
    d, y = _load_xy(args)
    est = inference.sigma2_hat(d, y)
    out: dict[str, Any] = {"sigma2_hat": est.sigma2_hat, "denominator": est.denominator,
                           "regime": est.regime.value}
    if args.j:
        pv = colops.partial_variance_estimators(d, y, parse_index_set(args.j, d.p))
        out.update(sigma2_j=pv.sigma2_j, sigma2_jc=pv.sigma2_jc)
    return out


def cmd_gm_check(args):
    x = read_csv_matrix(args.x, args.header)
    m = read_csv_matrix(args.m, args.header)
    rep = inference.gauss_markov_compare(Design(x, Tolerance.from_env()), m, args.sigma2)
    return {
        "regime": rep.regime.value, "dominated": rep.dominated, "trace_gap": rep.trace_gap,
        "trace_ok": rep.trace_ok, "rowspace_gaps": rep.rowspace_gaps,
        "rowspace_min_eig": rep.rowspace_min_eig, "rowspace_ok": rep.rowspace_ok,
        "loewner_min_eig": rep.loewner_min_eig, "loewner_ok": rep.loewner_ok,
        "difference": rep.difference,
    }


def _int_list(spec: str) -> list[int]:
    try:
        return [int(t) for t in spec.split(",") if t.strip()]
    except ValueError:
        raise InvalidInput(f"expected comma-separated integers, got {spec!r}") from None


def cmd_simulate(args):
    model = simlab.CovariateModel(
        kind=simlab.ModelKind(args.model), sigma_x2=args.sigma_x2, k=args.k,
        lam=args.lam, rho=args.rho,
    )
    if args.seed < 0 or args.seed >= 2**64:
        raise InvalidInput("--seed must be a 64-bit unsigned integer")
    sigmas = [float(s) for s in parse_floats(args.sigma)]
    if args.sweep:
        sweep = simlab.simulation_sweep(args.sweep, args.p)
        if args.sweep != "III" and args.sigma != "1":
            sweep = [(n, p, sigmas[0]) for n, p, _ in sweep]
    else:
        sweep = [(n, args.p, s) for n in _int_list(args.n) for s in sigmas]
    cfg = simlab.SimConfig(model, sweep[0][0], sweep[0][1], sweep[0][2], args.trials, args.reps,
                           args.seed, simlab.NoiseKind(args.noise))
    workers = args.workers if args.workers is not None else simlab.default_workers()
    if args.kind == "bias":
        report = simlab.run_bias_sim(cfg, sweep, workers=workers)
    else:
        report = simlab.run_coverage_sim(cfg, args.alpha, workers=workers,
                                         oracle_variance=args.oracle, sweep=sweep)
    if args.csv_out:
        _write(_report_csv(report), args.csv_out)
    if args.format == "csv":
        _write(_report_csv(report), args.out)
    else:
        _write(json.dumps(_jsonable(report.to_json_dict()), indent=2) + "\n", args.out)
    return None


def _report_csv(report: simlab.SimReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.CSV_COLUMNS)
    for row in report.rows():
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# Parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="olsinterp", description=__doc__.splitlines()[0])
    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", help="output path (default: stdout)")
    out.add_argument("--format", choices=("json", "csv"), default="json")

    xy = argparse.ArgumentParser(add_help=False, parents=[out])
    xy.add_argument("--x", required=True, help="design matrix CSV")
    xy.add_argument("--header", action="store_true", help="input CSVs carry one header row")
    resp = xy.add_mutually_exclusive_group(required=True)
    resp.add_argument("--y", help="response CSV (one row or one column)")
    resp.add_argument("--y-col", type=int, help="take the response from this 1-based column of --x")

    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, parents, help_):
        p = sub.add_parser(name, parents=parents, help=help_)
        p.set_defaults(func=fn)
        return p

    add("fit", cmd_fit, [xy], "minimum-norm least squares fit")
    add("loo", cmd_loo, [xy], "leave-one-out residuals")
    add("press", cmd_press, [xy], "PRESS statistic")
    p = add("update", cmd_update, [xy], "append rows by online updating")
    p.add_argument("--add-x", required=True, help="CSV of rows to append")
    p.add_argument("--add-y", required=True, help="CSV of responses to append")
    add("jackknife", cmd_jackknife, [xy], "jackknife point estimate and HC3 variance")
    for name, fn, help_ in (
        ("jk-interval", cmd_jk_interval, "jackknife prediction interval"),
        ("jkplus-interval", cmd_jkplus_interval, "jackknife+ prediction interval"),
        ("ci", cmd_ci, "normal-theory interval for a test prediction"),
    ):
        p = add(name, fn, [xy], help_)
        p.add_argument("--x-new", required=True, help="test covariates: comma list or CSV path")
        p.add_argument("--alpha", type=float, default=0.1)
    for name, fn, help_ in (
        ("cochran", cmd_cochran, "short vs long regression decomposition"),
        ("fwl", cmd_fwl, "J-partially regularized fit"),
    ):
        p = add(name, fn, [xy], help_)
        p.add_argument("--j", required=True, help="1-based column set J, e.g. 1,3,5-9")
    p = add("variance", cmd_variance, [xy], "LOO-based noise variance estimate")
    p.add_argument("--j", help="also report the column-split estimators for this J")

    p = add("ate", cmd_ate, [out], "treatment effect with regularized covariates")
    p.add_argument("--x", required=True, help="covariate CSV")
    p.add_argument("--z", required=True, help="treatment indicator CSV")
    p.add_argument("--y", required=True, help="response CSV")
    p.add_argument("--header", action="store_true")

    p = add("gm-check", cmd_gm_check, [out], "compare OLS covariance with a linear competitor")
    p.add_argument("--x", required=True)
    p.add_argument("--m", required=True, help="competitor matrix CSV (p x n)")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--header", action="store_true")

    p = add("simulate", cmd_simulate, [out], "bias and coverage studies")
    p.add_argument("kind", choices=("bias", "coverage"))
    p.add_argument("--model", choices=[m.value for m in simlab.ModelKind], default="spiked")
    p.add_argument("--n", default="100", help="sample size(s), comma separated")
    p.add_argument("--p", type=int, default=200)
    p.add_argument("--sigma", default="1", help="noise scale(s), comma separated")
    p.add_argument("--sweep", choices=("I", "II", "III"), help="use a preset grid")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="processes (default: all cores)")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--noise", choices=[k.value for k in simlab.NoiseKind], default="gaussian")
    p.add_argument("--oracle", action="store_true", help="use the true noise variance")
    p.add_argument("--k", type=int, default=10, help="number of spikes")
    p.add_argument("--sigma-x2", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.95)
    p.add_argument("--csv-out", help="also write per-replication CSV here")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = args.func(args)
        if result is not None:
            _emit(result, args)
    except OlsInterpError as exc:
        kind = type(exc).__name__
        assumption = getattr(exc, "assumption", None)
        tag = f" [{assumption}]" if assumption else ""
        print(f"olsinterp: {kind}{tag}: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"olsinterp: numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"olsinterp: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
