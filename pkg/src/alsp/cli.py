"""Command-line front end: ``alsp gen|solve|analyze|bench``.

Exit codes: 0 when a run completes (whatever its convergence status),
2 for usage errors and dense-size refusals, 3 for I/O and format errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis
from .dense import SingularMatrixError, TooLargeError
from .krylov import KrylovConfig, bicgstab, gmres_restarted
from .mmio import FormatError, read_vector, write_vector
from .problems import GeneratedProblem, ProblemSpec, generate, load, write_problem
from .report import SolveReport, format_titer
from .spal import gmres_inner, lu_inner, spal_exact, spal_inexact
from .spalbb import bb2_inner, spalbb
from .system import ALConfig, QMode, ShiftedOperator, apply_A

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3

CSV_HEADER = ["problem", "method", "omega", "delta", "oiter", "titer", "cpu_seconds", "final_relres", "status"]
METHODS = ("spal-exact", "spal-inexact", "spalbb", "gmres", "bicgstab")
KRYLOV = ("gmres", "bicgstab")


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class MethodSpec:
    name: str
    restart: int = 20
    inner: str = "gmres"
    delta_decay: float | None = None

    @property
    def label(self) -> str:
        if self.name == "gmres":
            return f"gmres({self.restart})"
        if self.name == "spal-inexact":
            return f"spal-inexact({self.inner})"
        return self.name


@dataclass
class ResultRow:
    problem: str
    method: str
    omega: float | None
    delta: float | None
    oiter: int | None
    titer: float
    cpu_seconds: float
    final_relres: float
    status: str

    def cells(self) -> list:
        def num(v):
            return "" if v is None else f"{v:g}"

        return [
            self.problem,
            self.method,
            num(self.omega),
            num(self.delta),
            "" if self.oiter is None else str(self.oiter),
            format_titer(self.titer),
            f"{self.cpu_seconds:.4f}",
            f"{self.final_relres:.6e}",
            self.status,
        ]


def run_method(prob: GeneratedProblem, method: MethodSpec, cfg: ALConfig, history_inner=False):
    """Solve one problem; returns ``(z, report)``.  A singular ``M`` becomes a breakdown report."""
    sys_ = prob.system
    if method.name in KRYLOV:
        kcfg = KrylovConfig(method.name, restart=method.restart, tol=cfg.tol, maxit=cfg.maxit)
        fn = gmres_restarted if method.name == "gmres" else bicgstab
        return fn(lambda v: apply_A(sys_, v), sys_.rhs, None, kcfg)
    try:
        if method.name == "spal-exact":
            return spal_exact(sys_, cfg)
        if method.name == "spal-inexact":
            if method.inner == "lu":
                inner = lu_inner(sys_, cfg)
            elif method.inner == "bb2":
                inner = bb2_inner()
            else:
                inner = gmres_inner(method.restart)
            return spal_inexact(sys_, cfg, inner, delta_decay=method.delta_decay)
        if method.name == "spalbb":
            return spalbb(sys_, cfg, record_inner=history_inner)
    except SingularMatrixError as exc:
        rep = SolveReport("breakdown", 0, 0.0, 1.0, [1.0], method=method.name, message=str(exc))
        return np.zeros(sys_.size), rep
    raise UsageError(f"unknown method {method.name!r}")


def to_row(problem_id: str, method: MethodSpec, cfg: ALConfig, rep: SolveReport) -> ResultRow:
    krylov = method.name in KRYLOV
    uses_delta = method.name in ("spal-inexact", "spalbb")
    return ResultRow(
        problem=problem_id,
        method=method.label,
        omega=None if krylov else cfg.omega,
        delta=cfg.delta if uses_delta else None,
        oiter=None if krylov else rep.outer_iters,
        titer=rep.total_iters,
        cpu_seconds=rep.wall_seconds,
        final_relres=rep.final_relres,
        status=rep.status,
    )


def write_rows(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.replace(";", ",").split(",")
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def spec_from_args(args) -> ProblemSpec:
    return ProblemSpec(
        kind=args.problem,
        grid=args.grid,
        nu=args.nu,
        wind=_parse_pair(args.wind),
        n=args.n,
        m=args.m,
        rank=args.rank,
        shift=args.shift,
        seed=args.seed,
    )


# --- subcommands -----------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        spec = spec_from_args(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    prob = generate(spec)
    write_problem(prob, args.out)
    s = prob.system
    b_rank = s.b_rank if s.b_rank is not None else ""
    print(f"n={s.n} m={s.m} b_rank={b_rank} -> {args.out}")
    return EXIT_OK


def _config(args, omega=None) -> ALConfig:
    q = QMode.identity()
    if getattr(args, "q_diag", None):
        q = QMode.diagonal(read_vector(args.q_diag))
    try:
        return ALConfig(
            omega=args.omega if omega is None else omega,
            q=q,
            delta=args.delta,
            beta=getattr(args, "beta", 1.0),
            tol=getattr(args, "tol", 1e-6),
            maxit=getattr(args, "maxit", 100_000),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_history(path, rep: SolveReport, half_steps: bool) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "relres"])
        for k, v in enumerate(rep.residual_history):
            it = format_titer(0.5 * k) if half_steps else str(k)
            w.writerow([it, f"{v:.17g}"])


def cmd_solve(args) -> int:
    prob = load(args.problem)
    cfg = _config(args)
    method = MethodSpec(args.method, restart=args.restart, inner=args.inner, delta_decay=args.delta_decay)
    z, rep = run_method(prob, method, cfg, history_inner=bool(args.inner_history))
    if rep.message:
        print(rep.message, file=sys.stderr)
    row = to_row(os.path.basename(os.path.normpath(args.problem)), method, cfg, rep)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_rows([row], fh)
    else:
        write_rows([row], sys.stdout)
    if args.history:
        _write_history(args.history, rep, method.name == "bicgstab")
    if args.inner_history:
        with open(args.inner_history, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["inner_iteration", "residual"])
            for k, v in enumerate(rep.inner_history, start=1):
                w.writerow([k, f"{v:.17g}"])
    if args.solution:
        write_vector(z, args.solution)
    return EXIT_OK


def analyze_problem(prob: GeneratedProblem, cfg: ALConfig) -> dict:
    out = {"n": prob.system.n, "m": prob.system.m}
    rep = analysis.theorem_conditions(prob.system, cfg)
    out["spectral"] = asdict(rep)
    out["admissible"] = {
        "omega": [0.0, rep.omega_max_exact],
        "delta": [0.0, rep.delta_max_inexact],
    }
    M = ShiftedOperator.from_config(prob.system, cfg).dense()
    try:
        out["bb2_condition"] = asdict(analysis.bb2_condition(M))
    except analysis.AnalysisError as exc:
        out["bb2_condition"] = {"error": str(exc)}
    try:
        out["spalbb_condition"] = asdict(analysis.spalbb_condition_matrix(M))
    except analysis.AnalysisError as exc:
        out["spalbb_condition"] = {"error": str(exc)}
    return out


def cmd_analyze(args) -> int:
    prob = load(args.problem)
    cfg = _config(args)
    text = analysis.to_json(analyze_problem(prob, cfg))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


# --- bench -----------------------------------------------------------------


@dataclass
class BenchConfig:
    problems: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    omegas: list = field(default_factory=list)
    delta: float = 0.5
    tol: float = 1e-6
    maxit: int = 100_000
    seed: int = 0
    threads: int = 1


LIST_KEYS = ("problem", "method", "omega")
SCALAR_KEYS = {"delta": float, "tol": float, "maxit": int, "seed": int, "threads": int}


def _kv_options(tokens, where):
    opts = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"{where}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        opts[k.strip().replace("-", "_")] = v.strip()
    return opts


def parse_problem_entry(text: str, where: str, seed: int):
    """``stokes-mac grid=8 nu=1`` or a directory path."""
    tokens = text.split()
    kind = tokens[0].replace("-", "_")
    if kind in ("stokes_mac", "oseen_mac", "random", "bb1", "bb1_counterexample"):
        opts = _kv_options(tokens[1:], where)
        conv = {"grid": int, "nu": float, "n": int, "m": int, "rank": int, "shift": float, "seed": int}
        kw = {"kind": kind, "seed": seed}
        for k, v in opts.items():
            try:
                if k == "wind":
                    kw[k] = _parse_pair(v)
                elif k in conv:
                    kw[k] = conv[k](v)
                else:
                    raise ConfigError(f"{where}: unknown problem option {k!r}")
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from None
        try:
            return ProblemSpec(**kw)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if len(tokens) != 1:
        raise ConfigError(f"{where}: unknown problem kind {tokens[0]!r}")
    return tokens[0]


def parse_method_entry(text: str, where: str) -> MethodSpec:
    tokens = text.split()
    name = tokens[0].replace("_", "-")
    if name not in METHODS:
        raise ConfigError(f"{where}: unknown method {tokens[0]!r} (choose from {', '.join(METHODS)})")
    opts = _kv_options(tokens[1:], where)
    kw = {}
    try:
        if "restart" in opts:
            kw["restart"] = int(opts.pop("restart"))
            if kw["restart"] < 1:
                raise ValueError("restart must be >= 1")
        if "inner" in opts:
            kw["inner"] = opts.pop("inner")
            if kw["inner"] not in ("lu", "gmres", "bb2"):
                raise ValueError(f"unknown inner solver {kw['inner']!r}")
        if "delta_decay" in opts:
            kw["delta_decay"] = float(opts.pop("delta_decay"))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if opts:
        raise ConfigError(f"{where}: unknown method option(s) {', '.join(sorted(opts))}")
    return MethodSpec(name, **kw)


def parse_bench_config(text: str, source: str = "<config>") -> BenchConfig:
    raw = {k: [] for k in LIST_KEYS}
    scalars = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        where = f"{source}:{ln}"
        if "=" not in s:
            raise ConfigError(f"{where}: expected 'key = value', got {s!r}")
        key, value = (p.strip() for p in s.split("=", 1))
        if not value:
            raise ConfigError(f"{where}: empty value for {key!r}")
        if key in LIST_KEYS:
            raw[key].append((value, where))
        elif key in SCALAR_KEYS:
            try:
                scalars[key] = SCALAR_KEYS[key](value)
            except ValueError:
                raise ConfigError(f"{where}: cannot parse {key} value {value!r}") from None
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    cfg = BenchConfig(**scalars)
    if cfg.tol <= 0:
        raise ConfigError(f"{source}: tol must be positive")
    if cfg.threads < 1:
        raise ConfigError(f"{source}: threads must be >= 1")
    for value, where in raw["omega"]:
        for part in value.split(","):
            try:
                w = float(part)
            except ValueError:
                raise ConfigError(f"{where}: cannot parse omega {part.strip()!r}") from None
            if not w > 0:
                raise ConfigError(f"{where}: omega must be positive")
            cfg.omegas.append(w)
    cfg.problems = [parse_problem_entry(v, w, cfg.seed) for v, w in raw["problem"]]
    cfg.methods = [parse_method_entry(v, w) for v, w in raw["method"]]
    for key, lst in (("problem", cfg.problems), ("method", cfg.methods), ("omega", cfg.omegas)):
        if not lst:
            raise ConfigError(f"{source}: no {key} entries (at least one is required)")
    return cfg


def _problem_id(p) -> str:
    if isinstance(p, str):
        return os.path.basename(os.path.normpath(p))
    parts = [p.kind]
    if p.kind in ("stokes_mac", "oseen_mac"):
        parts.append(f"N{p.grid}")
        parts.append(f"nu{p.nu:g}")
    elif p.kind == "random":
        parts.append(f"{p.n}x{p.m}r{p.rank}")
    if p.kind != "bb1_counterexample":
        parts.append(f"s{p.seed}")
    return "-".join(parts)


def run_bench(cfg: BenchConfig, threads: int | None = None) -> list:
    """Every (problem, method, omega) cell in grid order.

    Krylov methods ignore omega, so they are solved once per problem and the
    result is repeated in each omega cell.
    """
    threads = cfg.threads if threads is None else threads
    probs = [load(p) if isinstance(p, str) else generate(p) for p in cfg.problems]
    ids = [_problem_id(p) for p in cfg.problems]
    cells = []
    for pi in range(len(probs)):
        for method in cfg.methods:
            for w in cfg.omegas:
                cells.append((pi, method, w))

    def job(key):
        pi, method, w = key
        al = ALConfig(omega=w, delta=cfg.delta, tol=cfg.tol, maxit=cfg.maxit)
        try:
            _, rep = run_method(probs[pi], method, al)
        except Exception as exc:  # a failing cell must not abort the sweep
            rep = SolveReport("breakdown", 0, 0.0, float("nan"), method=method.name, message=str(exc))
        return to_row(ids[pi], method, al, rep)

    unique = []
    for pi, method, w in cells:
        key = (pi, method, None if method.name in KRYLOV else w)
        if key not in unique:
            unique.append(key)

    def run_key(key):
        pi, method, w = key
        return job((pi, method, cfg.omegas[0] if w is None else w))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = dict(zip(unique, ex.map(run_key, unique)))
    else:
        results = {k: run_key(k) for k in unique}
    rows = []
    for pi, method, w in cells:
        rows.append(results[(pi, method, None if method.name in KRYLOV else w)])
    return rows


def cmd_bench(args) -> int:
    with open(args.config) as fh:
        text = fh.read()
    cfg = parse_bench_config(text, args.config)
    t0 = time.perf_counter()
    rows = run_bench(cfg, args.threads)
    buf = io.StringIO()
    write_rows(rows, buf)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
        print(f"{len(rows)} rows written to {args.out} in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# --- argument parsing ------------------------------------------------------


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="alsp", description="Augmented Lagrangian saddle-point solvers.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a test problem directory")
    g.add_argument("--problem", required=True, choices=["stokes-mac", "oseen-mac", "random", "bb1"])
    g.add_argument("--grid", type=int, default=8)
    g.add_argument("--nu", type=_positive_float, default=1.0)
    g.add_argument("--wind", default="1,0")
    g.add_argument("--n", type=int, default=6)
    g.add_argument("--m", type=int, default=3)
    g.add_argument("--rank", type=int, default=None)
    g.add_argument("--shift", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    def al_flags(p):
        p.add_argument("--omega", type=_positive_float, default=1e-3)
        p.add_argument("--delta", type=float, default=0.5)
        p.add_argument("--beta", type=_positive_float, default=1.0)
        p.add_argument("--q-diag", default=None, help="vector file with a positive diagonal Q")

    s = sub.add_parser("solve", help="run one solver on a problem directory")
    s.add_argument("--problem", required=True)
    s.add_argument("--method", required=True, choices=list(METHODS))
    al_flags(s)
    s.add_argument("--restart", type=int, default=20)
    s.add_argument("--inner", choices=["lu", "gmres", "bb2"], default="gmres")
    s.add_argument("--delta-decay", type=float, default=None)
    s.add_argument("--tol", type=_positive_float, default=1e-6)
    s.add_argument("--maxit", type=int, default=100_000)
    s.add_argument("--out", default=None, help="result CSV (default: stdout)")
    s.add_argument("--history", default=None, help="write (iteration, relres) CSV")
    s.add_argument("--inner-history", default=None, help="spalbb only: inner residual trace CSV")
    s.add_argument("--solution", default=None, help="write the final iterate as a vector file")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("analyze", help="dense spectral report as JSON")
    a.add_argument("--problem", required=True)
    al_flags(a)
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("bench", help="run a (problem x method x omega) sweep")
    b.add_argument("--config", required=True)
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "restart", 1) < 1:
        print("alsp: --restart must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, TooLargeError) as exc:
        print(f"alsp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, FormatError, OSError) as exc:
        print(f"alsp: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # dimension mismatches in loaded problems and similar input faults
        print(f"alsp: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
