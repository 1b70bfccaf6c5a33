"""Command-line interface: ``symtensor <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _matrix_csv(m: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(m):
        w.writerow([v.item() if hasattr(v, "item") else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_enumerate(args) -> int:
    from .bipart import generate_bipartitions

    n = args.n if args.n is not None else max(args.k + args.l, 1)
    _write("".join(p.to_json() + "\n" for p in generate_bipartitions(args.k, args.l, n)), args.out)
    return 0


def cmd_count(args) -> int:
    from .bipart import count_p, count_pn

    value = count_p(args.k, args.l) if args.n is None else count_pn(args.k, args.l, args.n)
    _write(f"{value}\n", args.out)
    return 0


def cmd_matrix(args) -> int:
    from . import basis
    from .bipart import generate_bipartitions

    parts = generate_bipartitions(args.k, args.l, args.n)
    if args.weights:
        lam = np.asarray(json.loads(Path(args.weights).read_text())["lambdas"], dtype=np.float64)
        mats = [("weights", basis.assemble_weight_matrix(basis.WeightMatrix(args.k, args.l, args.n, lam[: len(parts)])))]
    else:
        build = basis.build_orbit_matrix if args.basis == "orbit" else basis.build_diagram_matrix
        mats = [(str(p), build(p, args.n).toarray()) for p in parts]
    if args.unroll:
        mats = [(name, basis.unroll(m, args.k, args.l, args.n)) for name, m in mats]
    if args.format == "json":
        text = json.dumps([{"name": name, "matrix": m.tolist()} for name, m in mats]) + "\n"
    else:
        text = "".join(f"# {name}\n" + _matrix_csv(m) for name, m in mats)
    _write(text, args.out)
    return 0


def cmd_compile(args) -> int:
    from .bipart import Bipartition, generate_bipartitions
    from .maplabel import compile_kernel, simplify_kernel

    if args.diagram:
        diagrams = [Bipartition.parse(args.diagram)]
        if (diagrams[0].k, diagrams[0].l) != (args.k, args.l):
            raise ValueError(f"diagram {diagrams[0]} is not a ({args.k},{args.l})-bipartition")
    else:
        diagrams = generate_bipartitions(args.k, args.l, args.n if args.n is not None else max(args.k + args.l, 1))
    kernels = [compile_kernel(d, args.n) for d in diagrams]
    if args.simplify:
        kernels = [simplify_kernel(ker) for ker in kernels]
    obj = kernels[0].to_dict() if args.diagram else [ker.to_dict() for ker in kernels]
    _write(json.dumps(obj) + "\n", args.out)
    return 0


def cmd_apply(args) -> int:
    from .maplabel import Kernel, evaluate_compressed
    from .symidx import SymmetricTensor

    kobj = json.loads(Path(args.kernel).read_text())
    tensor = SymmetricTensor.from_json(Path(args.tensor).read_text())
    n = args.n if args.n is not None else tensor.n
    if n != tensor.n:
        raise ValueError(f"--n {n} does not match the tensor's n={tensor.n}")
    kernels = [Kernel.from_dict(o) for o in (kobj if isinstance(kobj, list) else [kobj])]
    outs = []
    for ker in kernels:
        if ker.k != tensor.k:
            raise ValueError(f"kernel expects order {ker.k}, tensor has order {tensor.k}")
        outs.append(SymmetricTensor(n, ker.l, evaluate_compressed(ker, tensor.values[None, :], n)[0]))
    if args.format == "csv":
        text = "".join(o.to_csv() for o in outs)
    elif isinstance(kobj, list):
        text = json.dumps([json.loads(o.to_json()) for o in outs]) + "\n"
    else:
        text = outs[0].to_json() + "\n"
    _write(text, args.out)
    return 0


def cmd_train(args) -> int:
    from .train import TrainConfig, train_task, TASKS

    cfg = TrainConfig(args.lr, args.epochs, args.batch, args.seed, args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gen, _ = TASKS[args.task]
    data = gen(n=args.n, count=args.count, seed=args.seed)
    models = ["equivariant", "mlp"] if args.model == "both" else [args.model]
    summary = {
        "task": args.task,
        "n": args.n,
        "count": args.count,
        "config": vars(cfg),
        "data": data.meta,
        "runs": [],
    }
    for frac in args.fractions:
        for model in models:
            res = train_task(args.task, model, args.n, args.count, cfg, fraction=frac, data=data)
            tag = f"{model}_f{frac:g}"
            (out / f"curve_{tag}.csv").write_text(res.curve_csv())
            if model == "equivariant":
                (out / f"checkpoint_{tag}.json").write_text(res.model.layer.to_json())
            summary["runs"].append({"model": model, "fraction": frac, "test_mse": res.test_mse})
            print(f"{model}\tfraction={frac:g}\ttest_mse={res.test_mse:.6g}")
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    return 0


def cmd_bench(args) -> int:
    from .train import benchmark_apply, benchmark_csv

    row = benchmark_apply(args.k, args.l, args.n, reps=args.reps, batch=args.batch, seed=args.seed)
    _write(benchmark_csv([row]), args.out)
    return 0


def cmd_generalise(args) -> int:
    from .layer import EquivariantLayer
    from .train import generalisation_eval

    layer = EquivariantLayer.from_json(Path(args.ckpt).read_text())
    task = "equivariant" if layer.l == 1 else "invariant"
    res = generalisation_eval(layer, args.n_list, task=task, count=args.count, seed=args.seed)
    text = "n,test_mse\n" + "".join(f"{n},{v!r}\n" for n, v in res.items())
    _write(text, args.out)
    return 0


def cmd_selfcheck(args) -> int:
    from . import basis
    from .bipart import count_p, count_pn, generate_bipartitions

    table = [
        [1, 1, 2, 3, 5, 7],
        [1, 2, 4, 7, 12, 19],
        [2, 4, 9, 16, 29, 47],
        [3, 7, 16, 31, 57, 97],
        [5, 12, 29, 57, 109, 189],
        [7, 19, 47, 97, 189, 339],
    ]
    checks = []
    checks.append(("bipartition counts", all(count_p(k, l) == table[k][l] for k in range(6) for l in range(6))))
    checks.append(("four (2,1) diagrams at n=3", count_pn(2, 1, 3) == 4))
    golden = {
        "orbit": [
            [[1, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 0, 1]],
            [[0, 0, 0, 1, 0, 1], [1, 0, 0, 0, 0, 1], [1, 0, 0, 1, 0, 0]],
            [[0, 1, 1, 0, 0, 0], [0, 1, 0, 0, 1, 0], [0, 0, 1, 0, 1, 0]],
            [[0, 0, 0, 0, 1, 0], [0, 0, 1, 0, 0, 0], [0, 1, 0, 0, 0, 0]],
        ],
        "diagram": [
            [[1, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 0, 1]],
            [[1, 0, 0, 1, 0, 1]] * 3,
            [[1, 1, 1, 0, 0, 0], [0, 1, 0, 1, 1, 0], [0, 0, 1, 0, 1, 1]],
            [[1] * 6] * 3,
        ],
    }
    parts = generate_bipartitions(2, 1, 3)
    for kind, mats in golden.items():
        build = basis.build_orbit_matrix if kind == "orbit" else basis.build_diagram_matrix
        ok = all(np.array_equal(build(p, 3).toarray(), np.array(m)) for p, m in zip(parts, mats))
        checks.append((f"(2,1) {kind} matrices at n=3", ok))
    ones = generate_bipartitions(1, 1, 4)
    checks.append(
        (
            "(1,1) identity and all-ones",
            np.array_equal(basis.build_diagram_matrix(ones[0], 4).toarray(), np.eye(4, dtype=int))
            and np.array_equal(basis.build_diagram_matrix(ones[1], 4).toarray(), np.ones((4, 4), dtype=int)),
        )
    )
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(ok for _, ok in checks) else 1


# ---------------------------------------------------------------------------
# parser


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output file (or directory for train)")
    common.add_argument("--format", choices=["json", "csv"], default=None)
    common.add_argument("--threads", type=int, default=None, help="cap BLAS/OpenMP threads (env SYMTENSOR_THREADS)")

    p = argparse.ArgumentParser(prog="symtensor", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"symtensor {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def kl(sp, n_required=False):
        sp.add_argument("--k", type=int, required=True)
        sp.add_argument("--l", type=int, required=True)
        sp.add_argument("--n", type=int, required=n_required, default=None)

    s = sub.add_parser("enumerate", parents=[common], help="list (k,l)-bipartitions as JSON lines")
    kl(s)
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("count", parents=[common], help="count (k,l)-bipartitions")
    kl(s)
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("matrix", parents=[common], help="orbit or diagram basis matrices")
    kl(s, n_required=True)
    s.add_argument("--basis", choices=["orbit", "diagram"], default="diagram")
    s.add_argument("--unroll", action="store_true")
    s.add_argument("--weights", default=None, help="checkpoint JSON with lambdas to assemble")
    s.set_defaults(func=cmd_matrix)

    s = sub.add_parser("compile", parents=[common], help="compile map-label kernels to JSON")
    kl(s)
    s.add_argument("--simplify", action="store_true")
    s.add_argument("--diagram", default=None, help='one diagram, e.g. "2,1;1,0" or JSON')
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("apply", parents=[common], help="apply a compiled kernel to a tensor")
    s.add_argument("--kernel", required=True)
    s.add_argument("--tensor", required=True)
    s.add_argument("--n", type=int, default=None)
    s.set_defaults(func=cmd_apply)

    s = sub.add_parser("train", parents=[common], help="train on a synthetic task")
    s.add_argument("--task", choices=["invariant", "equivariant"], required=True)
    s.add_argument("--model", choices=["equivariant", "mlp", "both"], default="both")
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--count", type=int, default=None)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--batch", type=int, default=50)
    s.add_argument("--split", type=float, default=0.9)
    s.add_argument("--fractions", type=_float_list, default=[1.0], help="training-set fractions, e.g. 0.1,0.25,0.5,1")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("bench", parents=[common], help="time kernel vs dense forward")
    kl(s, n_required=True)
    s.add_argument("--reps", type=int, default=5)
    s.add_argument("--batch", type=int, default=50)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("generalise", parents=[common], help="evaluate a checkpoint at other n")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--n-list", type=_int_list, default=[16, 32])
    s.add_argument("--count", type=int, default=1000)
    s.set_defaults(func=cmd_generalise)

    s = sub.add_parser("selfcheck", parents=[common], help="run the built-in golden checks")
    s.set_defaults(func=cmd_selfcheck)
    return p


def _header(args, argv) -> str:
    return f"# symtensor {__version__} seed={args.seed} argv={json.dumps(list(argv))}"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command == "train":
        defaults = {"invariant": (12, 5000), "equivariant": (8, 10000)}[args.task]
        args.n = args.n if args.n is not None else defaults[0]
        args.count = args.count if args.count is not None else defaults[1]
        if args.out is None:
            parser.error("train needs --out DIR")
    if args.format is None:
        args.format = "csv" if args.command in ("matrix", "bench", "generalise") else "json"
    print(_header(args, argv), file=sys.stderr)
    threads = args.threads
    if threads is None and os.environ.get("SYMTENSOR_THREADS"):
        threads = int(os.environ["SYMTENSOR_THREADS"])
    try:
        if threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except (ValueError, OSError, KeyError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
