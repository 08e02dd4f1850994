"""Command-line front end: ingest or generate problems, solve, verify, report.

Exit codes: 0 all asserted checks held, 1 internal error, 2 input error,
3 an asserted check failed.
"""

import argparse
from dataclasses import dataclass
import json
import math
import sys
import time

import numpy as np

from . import bounds as bounds_mod
from .errors import ParseError, SparseLsqError
from .linalg import as_matrix, as_vector, residual_norm, svd
from .solver import (
    SolveConfig,
    solve_baselines,
    solve_deterministic,
    solve_randomized,
)

__all__ = [
    "SyntheticSpec",
    "RunSpec",
    "ingest",
    "generate",
    "run",
    "frontier",
    "main",
]

SCHEMA_VERSION = "1"
SUITES = ("structural", "theorem1", "theorem2", "lemmas", "all")
_CLI_SEEDS = 100  # seeds for the aggregate randomized-bound suite
_CLI_TRIALS = 200  # trials for the sampler-guarantee suite


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic instance: Haar factors, prescribed spectrum, sparse truth."""

    m: int
    n: int
    k_true: int = 3
    spectrum: object = 0.5  # decay ratio in (0, 1] or explicit list
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ValueError("m and n must be >= 2")
        if not 1 <= self.k_true <= self.n:
            raise ValueError("k_true must lie in [1, n]")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if np.isscalar(self.spectrum):
            if not 0.0 < float(self.spectrum) <= 1.0:
                raise ValueError("decay ratio must lie in (0, 1]")


@dataclass(frozen=True)
class RunSpec:
    matrix_path: str | None = None
    vector_path: str | None = None
    generator: SyntheticSpec | None = None
    k: int = 1
    epsilon: float = 0.25
    mode: str = "deterministic"
    seed: int | None = None
    r_override: int | None = None
    suites: tuple = ("structural",)
    frontier_r: tuple = ()
    out: str | None = None

    def __post_init__(self):
        have_files = self.matrix_path is not None
        if have_files == (self.generator is not None):
            raise ValueError("exactly one of matrix/vector files or a generator")
        if have_files and self.vector_path is None:
            raise ValueError("a vector file is required with --matrix")
        unknown = set(self.suites) - set(SUITES)
        if unknown:
            raise ValueError(f"unknown suites: {sorted(unknown)}")


def _tokens(line):
    return line.split()


def _read_matrix_market(path, lines):
    header = _tokens(lines[0])
    if len(header) != 5 or header[1].lower() != "matrix":
        raise ParseError(path, 1, "malformed MatrixMarket header")
    layout, fieldtype, symmetry = (
        header[2].lower(),
        header[3].lower(),
        header[4].lower(),
    )
    if fieldtype not in ("real", "integer"):
        raise ParseError(path, 1, f"unsupported field type {fieldtype!r}")
    if symmetry != "general":
        raise ParseError(path, 1, f"unsupported symmetry {symmetry!r}")
    body = [
        (no, line)
        for no, line in enumerate(lines[1:], start=2)
        if line.strip() and not line.lstrip().startswith("%")
    ]
    if not body:
        raise ParseError(path, len(lines), "missing size line")
    size_no, size_line = body[0]
    entries = body[1:]
    if layout == "array":
        dims = _tokens(size_line)
        if len(dims) != 2:
            raise ParseError(path, size_no, "array size line must be 'm n'")
        try:
            m, n = int(dims[0]), int(dims[1])
        except ValueError:
            raise ParseError(path, size_no, "non-integer dimensions") from None
        values = []
        for no, line in entries:
            for tok in _tokens(line):
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ParseError(path, no, f"bad value {tok!r}") from None
        if len(values) != m * n:
            raise ParseError(
                path, entries[-1][0] if entries else size_no,
                f"expected {m * n} values, found {len(values)}",
            )
        # Array layout stores entries column by column.
        return np.array(values).reshape((n, m)).T
    if layout == "coordinate":
        dims = _tokens(size_line)
        if len(dims) != 3:
            raise ParseError(path, size_no, "coordinate size line must be 'm n nnz'")
        try:
            m, n, nnz = (int(t) for t in dims)
        except ValueError:
            raise ParseError(path, size_no, "non-integer dimensions") from None
        if len(entries) != nnz:
            raise ParseError(
                path, entries[-1][0] if entries else size_no,
                f"expected {nnz} entries, found {len(entries)}",
            )
        a = np.zeros((m, n))
        for no, line in entries:
            toks = _tokens(line)
            if len(toks) != 3:
                raise ParseError(path, no, "coordinate entry must be 'i j value'")
            try:
                i, j, v = int(toks[0]), int(toks[1]), float(toks[2])
            except ValueError:
                raise ParseError(path, no, "bad coordinate entry") from None
            if not (1 <= i <= m and 1 <= j <= n):
                raise ParseError(path, no, f"index ({i}, {j}) out of range")
            a[i - 1, j - 1] += v  # duplicates accumulate
        return a
    raise ParseError(path, 1, f"unsupported layout {layout!r}")


def _read_csv_matrix(path, lines):
    rows = []
    width = None
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        toks = [t.strip() for t in line.split(",")]
        try:
            row = [float(t) for t in toks]
        except ValueError:
            raise ParseError(path, no, f"bad CSV row {line.strip()!r}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(path, no, f"expected {width} columns, found {len(row)}")
        rows.append(row)
    if not rows:
        raise ParseError(path, 1, "empty matrix file")
    return np.array(rows)


def _read_vector(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    values = []
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            values.append(float(line.strip()))
        except ValueError:
            raise ParseError(path, no, f"bad vector entry {line.strip()!r}") from None
    if not values:
        raise ParseError(path, 1, "empty vector file")
    return np.array(values)


def ingest(matrix_path, vector_path):
    """Load a problem from disk: MatrixMarket or headerless CSV plus a
    newline-delimited vector.  Validates finiteness and dimensions."""
    with open(matrix_path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(matrix_path, 1, "empty matrix file")
    if lines[0].startswith("%%MatrixMarket"):
        a = _read_matrix_market(matrix_path, lines)
    else:
        a = _read_csv_matrix(matrix_path, lines)
    a = as_matrix(a, "matrix")
    b = as_vector(_read_vector(vector_path), "vector")
    if b.shape[0] != a.shape[0]:
        raise ParseError(
            vector_path, 1,
            f"vector has dim {b.shape[0]}, matrix has {a.shape[0]} rows",
        )
    return a, b


def _haar(rng, rows, cols):
    q, rmat = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.where(np.diag(rmat) == 0, 1.0, np.diag(rmat)))


def generate(spec):
    """Build (A, b, metadata) from a :class:`SyntheticSpec`.

    A = U diag(sigma) V^T with Haar-random orthonormal factors; b is A times
    a ``k_true``-sparse vector plus scaled Gaussian noise.
    """
    rng = np.random.default_rng(spec.seed)
    p = min(spec.m, spec.n)
    if np.isscalar(spec.spectrum):
        sigma = float(spec.spectrum) ** np.arange(p)
    else:
        sigma = np.zeros(p)
        given = np.asarray(list(spec.spectrum), dtype=np.float64)
        if given.size > p or given.size < 1:
            raise ValueError(f"explicit spectrum must have 1..{p} values")
        if np.any(given < 0):
            raise ValueError("singular values must be nonnegative")
        sigma[: given.size] = given
    u = _haar(rng, spec.m, p)
    v = _haar(rng, spec.n, p)
    a = (u * sigma) @ v.T
    support = np.sort(rng.choice(spec.n, size=spec.k_true, replace=False))
    coeffs = rng.standard_normal(spec.k_true)
    x_true = np.zeros(spec.n)
    x_true[support] = coeffs
    b = a @ x_true + spec.noise * rng.standard_normal(spec.m)
    meta = {
        "m": spec.m,
        "n": spec.n,
        "seed": spec.seed,
        "noise": spec.noise,
        "spectrum": sigma.tolist(),
        "x_true_indices": support.tolist(),
        "x_true_values": coeffs.tolist(),
    }
    return a, b, meta


def parse_generate_spec(text):
    """Parse a ``key=value[,key=value...]`` generator description."""
    kwargs = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValueError(f"generator item {part!r} is not key=value")
        key, value = part.split("=", 1)
        key = key.strip().lower()
        if key in ("m", "n", "k_true", "seed"):
            kwargs[key] = int(value)
        elif key == "gamma":
            kwargs["spectrum"] = float(value)
        elif key == "spectrum":
            kwargs["spectrum"] = [float(t) for t in value.split(":")]
        elif key == "noise":
            kwargs["noise"] = float(value)
        else:
            raise ValueError(f"unknown generator key {key!r}")
    return SyntheticSpec(**kwargs)


def _suite_reports(a, b, cfg, solution, plan, suites, base_seed):
    reports = []
    want = set(suites)
    if "all" in want:
        want = {"structural", "theorem1", "theorem2", "lemmas"}
    if "structural" in want:
        reports.append(bounds_mod.structural_bound(a, b, cfg.k, plan))
    if "theorem1" in want and cfg.mode == "deterministic":
        reports.append(
            bounds_mod.deterministic_bound_report(
                a, b, cfg.k, cfg.epsilon, solution, plan
            )
        )
    if "theorem2" in want and cfg.mode == "randomized":
        seeds = np.random.SeedSequence(base_seed).generate_state(
            _CLI_SEEDS, dtype=np.uint64
        )
        sols = []
        for s in seeds:
            sol, _ = solve_randomized(
                a, b, SolveConfig(
                    k=cfg.k, epsilon=cfg.epsilon, mode="randomized",
                    seed=int(s), r_override=cfg.r_override,
                ),
            )
            sols.append(sol)
        reports.append(
            bounds_mod.randomized_bound_report(a, b, cfg.k, cfg.epsilon, sols)
        )
    if "lemmas" in want:
        f = svd(a)
        v_t = f.v[:, : cfg.k].T
        e = a - (f.u[:, : cfg.k] * f.sigma[: cfg.k]) @ v_t
        r_suite = math.ceil(
            4 * cfg.k * math.log(2 * cfg.k / bounds_mod.FAILURE_RATE)
            / cfg.epsilon**2
        )
        reports.extend(
            bounds_mod.random_sampler_suite(
                v_t, e, cfg.k, r_suite, _CLI_TRIALS,
                base_seed if base_seed is not None else 0,
            )
        )
    return reports


def _is_asserted(report):
    if not report.applicable:
        return False
    return bool(report.context.get("asserted", True))


def _solution_dict(solution):
    return {
        "dim": solution.dim,
        "budget_r": solution.budget_r,
        "nonzero_count": len(solution.nonzeros),
        "indices": [i for i, _ in solution.nonzeros],
        "values": [v for _, v in solution.nonzeros],
    }


def run(spec):
    """Execute a full run and write the JSON report; returns the exit code."""
    t0 = time.perf_counter()
    try:
        if spec.generator is not None:
            a, b, meta = generate(spec.generator)
            source = {"generator": meta}
        else:
            a, b = ingest(spec.matrix_path, spec.vector_path)
            source = {"matrix": spec.matrix_path, "vector": spec.vector_path}
        cfg = SolveConfig(
            k=spec.k,
            epsilon=spec.epsilon,
            mode=spec.mode,
            seed=spec.seed,
            r_override=spec.r_override,
        )
        t_load = time.perf_counter()

        x_star, x_k_star = solve_baselines(a, b, cfg.k)
        if cfg.mode == "deterministic":
            solution, plan = solve_deterministic(a, b, cfg)
        else:
            solution, plan = solve_randomized(a, b, cfg)
        t_solve = time.perf_counter()

        reports = _suite_reports(a, b, cfg, solution, plan, spec.suites, spec.seed)
        t_verify = time.perf_counter()
    except (SparseLsqError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 1

    violations = [
        r.name
        for r in reports
        if _is_asserted(r)
        and not (r.holds and (r.trace is None or r.trace.dominance_ok()))
    ]
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "k": spec.k,
            "epsilon": spec.epsilon,
            "mode": spec.mode,
            "seed": spec.seed,
            "r_override": spec.r_override,
            "suites": sorted(set(spec.suites)),
            "source": source,
        },
        "problem": {"m": int(a.shape[0]), "n": int(a.shape[1])},
        "baselines": {
            "residual_min_norm": residual_norm(a, x_star, b),
            "residual_rank_k": residual_norm(a, x_k_star, b),
        },
        "solution": {
            **_solution_dict(solution),
            "residual": residual_norm(a, solution.densify(), b),
        },
        "bounds": [r.to_dict() for r in reports],
        "violations": violations,
        "timings": {
            "load_s": t_load - t0,
            "solve_s": t_solve - t_load,
            "verify_s": t_verify - t_solve,
        },
    }
    text = json.dumps(report, indent=2)
    try:
        if spec.out:
            with open(spec.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 3 if violations else 0


def frontier(spec, r_values):
    """Residual versus sparsity table; returns rows of (r, residual, rhs)."""
    values = sorted(set(int(r) for r in r_values))
    if len(values) != len(list(r_values)):
        print("warning: duplicate r values dropped", file=sys.stderr)
    if spec.generator is not None:
        a, b, _ = generate(spec.generator)
    else:
        a, b = ingest(spec.matrix_path, spec.vector_path)
    rows = []
    for r in values:
        cfg = SolveConfig(
            k=spec.k,
            epsilon=spec.epsilon,
            mode=spec.mode,
            seed=spec.seed,
            r_override=r,
        )
        if cfg.mode == "deterministic":
            solution, plan = solve_deterministic(a, b, cfg)
        else:
            solution, plan = solve_randomized(a, b, cfg)
        rep = bounds_mod.structural_bound(a, b, cfg.k, plan)
        rows.append((r, residual_norm(a, solution.densify(), b), rep.rhs))
    return rows


def _write_frontier(rows, out):
    lines = ["r,residual,bound_rhs"]
    lines += [f"{r},{repr(res)},{repr(rhs)}" for r, res, rhs in rows]
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparse-lsq",
        description="Sparse least-squares solutions via column subset selection.",
    )
    parser.add_argument("--matrix", metavar="PATH")
    parser.add_argument("--vector", metavar="PATH")
    parser.add_argument("--generate", metavar="KEY=VAL[,...]")
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--eps", type=float, default=0.25)
    parser.add_argument("--mode", choices=("det", "rand"), default="det")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--r", type=int, help="override the sparsity budget")
    parser.add_argument(
        "--suite", action="append", metavar="|".join(SUITES), default=None
    )
    parser.add_argument("--frontier", metavar="R1,R2,...")
    parser.add_argument("--out", metavar="PATH")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        suites = []
        for item in args.suite or ["structural"]:
            suites.extend(s.strip() for s in item.split(",") if s.strip())
        generator = parse_generate_spec(args.generate) if args.generate else None
        if args.mode == "rand" and args.seed is None:
            raise ValueError("--seed is required with --mode rand")
        spec = RunSpec(
            matrix_path=args.matrix,
            vector_path=args.vector,
            generator=generator,
            k=args.k,
            epsilon=args.eps,
            mode="deterministic" if args.mode == "det" else "randomized",
            seed=args.seed,
            r_override=args.r,
            suites=tuple(suites),
            frontier_r=tuple(
                int(t) for t in (args.frontier or "").split(",") if t.strip()
            ),
            out=args.out,
        )
    except (SparseLsqError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if spec.frontier_r:
        try:
            rows = frontier(spec, spec.frontier_r)
            _write_frontier(rows, spec.out)
        except (SparseLsqError, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
