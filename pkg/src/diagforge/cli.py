"""Command-line front end: synth, encode, qsp, heat, verify and bench."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib import resources

import jsonschema
import numpy as np

from .applications.heat import calibrate_kappa, heat_solve
from .applications.qsp import prepare_state, rows_to_csv, sweep
from .block_encoding import encode, extract_block, rus_chain, success_probability
from .circuit import CIRCUIT_SCHEMA, Circuit, deserialize, depth, dumps, size
from .errors import DiagforgeError
from .functions import FunctionSpec, parse_function, read_column_csv
from .parallel import factor_list_for, parallel_synth
from .simulator import embedded_action
from .synth import DiagonalSpec, SynthPlan, lower_for_strategy, synthesize
from .walsh import num_qubits_for

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_TOLERANCE = 3

SUBCOMMANDS = ("synth", "encode", "qsp", "heat", "verify", "bench")
BUDGET_KEYS = ("epsilon", "sparse_s", "m_qubits")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- io helpers -----------------------------------------------------------------------


def write_atomic(path: str, text: str) -> None:
    """Write to a temp file in the destination directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_schema(name: str) -> dict:
    return json.loads(resources.files("diagforge").joinpath("data", name).read_text())


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def metrics_doc(subcommand: str, config: dict, **fields) -> dict:
    doc = {k: None for k in ("size", "depth", "width", "p_success", "error", "infidelity")}
    doc.update(fields)
    doc["subcommand"] = subcommand
    doc["timestamp"] = datetime.now(timezone.utc).isoformat()
    doc["config"] = config
    doc = _plain(doc)
    jsonschema.validate(doc, load_schema("metrics.schema.json"))
    return doc


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_vector(text: str, n: int | None, seed: int) -> np.ndarray:
    """``inline:a,b,...``, ``csv:path``, ``random`` (needs n) or a builtin ``name:params`` sampled on 2**n points."""
    kind, _, rest = text.partition(":")
    if kind == "inline":
        values = np.array([float(v) for v in rest.split(",") if v.strip()])
    elif kind == "csv":
        values = read_column_csv(rest)
    elif kind == "random":
        if n is None:
            raise UsageError("random phases need --n")
        values = np.random.default_rng(seed).uniform(-math.pi, math.pi, 1 << n)
    else:
        if n is None:
            raise UsageError("a function source needs --n")
        values = parse_function(text).samples(n)
    num_qubits_for(values.size)
    if n is not None and values.size != 1 << n:
        raise UsageError(f"source has {values.size} entries, --n asks for {1 << n}")
    return values


def _budget(args) -> dict | None:
    given = {k: getattr(args, k) for k in BUDGET_KEYS if getattr(args, k, None) is not None}
    if len(given) > 1:
        raise UsageError("budget flags --epsilon, --sparse-s and --m-qubits are mutually exclusive")
    return given or None


def _plan(args, budget) -> SynthPlan:
    approx = None
    if budget and "sparse_s" in budget:
        approx = {"sparse_s": int(budget["sparse_s"])}
    elif budget and "m_qubits" in budget:
        approx = {"m_qubits": int(budget["m_qubits"])}
    elif budget:
        raise UsageError("--epsilon applies to function sources in qsp; use --sparse-s or --m-qubits here")
    return SynthPlan(method=args.method, ordering=args.ordering, mcp_strategy=args.mcp_strategy, approximation=approx)


def _circuit_metrics(c: Circuit) -> dict:
    if not c.lowered:
        return {"size": None, "depth": None, "width": c.width}
    return {"size": size(c), "depth": depth(c), "width": c.width}


def _config_of(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, metrics: dict, circuit: Circuit | None = None, table: str | None = None) -> None:
    if circuit is not None:
        text = dumps(circuit) + "\n"
        jsonschema.validate(json.loads(text), CIRCUIT_SCHEMA)
        if getattr(args, "out", None):
            write_atomic(args.out, text)
    if table is not None and getattr(args, "csv", None):
        write_atomic(args.csv, table)
    text = dump_json(metrics)
    if getattr(args, "metrics", None):
        write_atomic(args.metrics, text)
    else:
        sys.stdout.write(text)


# -- subcommands ----------------------------------------------------------------------


def cmd_synth(args) -> int:
    phases = parse_vector(args.phases, args.n, args.seed)
    plan = _plan(args, _budget(args))
    spec = DiagonalSpec.from_phases(phases)
    if args.m_ancilla:
        factors = factor_list_for(phases, plan)
        circuit = parallel_synth(factors, args.m_ancilla, args.strategy)
    else:
        circuit = synthesize(spec, plan)
        if plan.mcp_strategy:
            circuit = lower_for_strategy(circuit, plan.mcp_strategy)
    _emit(args, metrics_doc("synth", _config_of(args), **_circuit_metrics(circuit)), circuit)
    return EXIT_OK


def cmd_encode(args) -> int:
    values = parse_vector(args.values, args.n, args.seed)
    plan = _plan(args, _budget(args))
    be = encode(DiagonalSpec.from_values(values), args.alpha, plan, args.m_ancilla or 0, args.strategy)
    circuit = be.circuit
    if plan.mcp_strategy:
        circuit = lower_for_strategy(circuit, plan.mcp_strategy)
    fields = _circuit_metrics(circuit)
    fields["error"] = be.epsilon
    fields["details"] = {"alpha": be.alpha, "d_max": be.d_max, "flag": be.flag}
    _emit(args, metrics_doc("encode", _config_of(args), **fields), circuit)
    return EXIT_OK


def cmd_qsp(args) -> int:
    f = parse_function(args.f)
    r = prepare_state(f, args.n, _budget(args), args.alpha, args.m_ancilla or 0, args.method, args.ordering, args.strategy)
    fields = dict(r.metrics)
    fields.update(p_success=r.p_success, error=r.l2_error, infidelity=r.infidelity, l2_error=r.l2_error)
    x = np.arange(1 << args.n) / float(1 << args.n)
    overlap = np.vdot(r.prepared.amps, r.target.amps)
    prepared = r.prepared.amps * (overlap / abs(overlap) if abs(overlap) > 0 else 1.0)
    rows = [
        {"index": i, "x": x[i], "prepared": float(np.real(prepared[i])), "target": float(np.real(r.target.amps[i]))}
        for i in range(1 << args.n)
    ]
    _emit(args, metrics_doc("qsp", _config_of(args), **fields), r.circuit, rows_to_csv(rows))
    return EXIT_OK


def _kappa(value, n: int, alpha: float):
    if value is None or value == "calibrate":
        k, _ = calibrate_kappa(n=n, alpha=alpha)
        return k
    return float(value)


def _heat_runs(f: FunctionSpec, n: int, kappa, times, budgets, alpha: float):
    kappa = _kappa(kappa, n, alpha)
    times = list(times)
    budgets = list(budgets) if budgets is not None else [None] * len(times)
    if len(budgets) != len(times):
        raise UsageError("give one --sparse-s value per time point")
    return kappa, [heat_solve(f, n, kappa, t, b, alpha) for t, b in zip(times, budgets)]


def _heat_table(runs) -> str:
    rows = []
    for run in runs:
        x = np.arange(1 << run.n) / float(1 << run.n)
        for i in range(1 << run.n):
            rows.append({"t": run.t, "x": x[i], "numeric": float(np.real(run.numeric.amps[i])), "analytic": float(np.real(run.analytic.amps[i]))})
    return rows_to_csv(rows)


def cmd_heat(args) -> int:
    if args.epsilon is not None or args.m_qubits is not None:
        raise UsageError("heat takes only --sparse-s budgets")
    f = parse_function(args.f)
    kappa, runs = _heat_runs(f, args.n, args.kappa, args.t, args.sparse_s, args.alpha)
    details = [{"t": r.t, "error": r.error, "operators": r.s_terms, "p_success": r.p_success} for r in runs]
    fields = {
        "width": args.n + 1,
        "error": max(r.error for r in runs),
        "p_success": min(r.p_success for r in runs),
        "details": {"kappa": kappa, "runs": details},
    }
    _emit(args, metrics_doc("heat", _config_of(args), **fields), None, _heat_table(runs))
    return EXIT_OK


def verify_circuit(circuit: Circuit, target: dict) -> float:
    """Largest entrywise deviation between the circuit's action and the target."""
    main = circuit.qubits_with_role("main") or list(range(circuit.width))
    if "phases" in target:
        phases = np.asarray(target["phases"], dtype=float)
        if phases.size != 1 << len(main):
            raise UsageError(f"target has {phases.size} phases, circuit has {len(main)} main qubits")
        block, leak = embedded_action(circuit, main)
        return max(float(np.max(np.abs(block - np.diag(np.exp(1j * phases))))), leak)
    if "values" in target:
        values = np.asarray(target["values"], dtype=float)
        alpha = float(target.get("alpha", 1.0))
        flags = circuit.qubits_with_role("flag")
        if not flags:
            raise UsageError("circuit has no flag qubit to extract a block from")
        if values.size != 1 << len(main):
            raise UsageError(f"target has {values.size} values, circuit has {len(main)} main qubits")
        block = extract_block(circuit, main, flags[0], 1)
        want = np.diag(values / (alpha * np.max(np.abs(values))))
        return float(np.max(np.abs(block - want)))
    raise UsageError("target JSON needs a 'phases' or 'values' list")


def cmd_verify(args) -> int:
    with open(args.circuit) as fh:
        circuit = deserialize(fh.read())
    with open(args.target) as fh:
        target = json.load(fh)
    err = verify_circuit(circuit, target)
    passed = err <= args.tol
    fields = _circuit_metrics(circuit)
    fields.update(error=err, details={"tol": args.tol, "passed": passed})
    _emit(args, metrics_doc("verify", _config_of(args), **fields))
    return EXIT_OK if passed else EXIT_TOLERANCE


# -- bench ----------------------------------------------------------------------------


def _as_list(value):
    return value if isinstance(value, list) else [value]


def bench_run(run: dict) -> tuple[str, list[dict], dict]:
    """Execute one manifest entry; returns (name, csv rows, summary)."""
    kind = run["kind"]
    alpha = float(run.get("alpha", 1.1))
    if kind == "qsp":
        budget = {k: run[k] for k in BUDGET_KEYS if k in run} or None
        r = prepare_state(parse_function(run["f"]), run["n"], budget, alpha)
        row = {"f": run["f"], "n": run["n"], **r.metrics, "p_success": r.p_success, "l2_error": r.l2_error, "infidelity": r.infidelity}
        return run["name"], [row], row
    if kind == "psuccess":
        rows = []
        for spec in _as_list(run["f"]):
            f = parse_function(spec)
            for n in _as_list(run["n"]):
                d = f.samples(n)
                p = success_probability(d, np.full(d.size, 1 / math.sqrt(d.size)), alpha)
                rows.append({"f": spec, "n": n, "p_success": p, "p_alpha2": p * alpha**2})
        return run["name"], rows, {"rows": len(rows)}
    if kind == "rus":
        d = parse_function(run["f"]).samples(run["n"])
        psi = np.full(d.size, 1 / math.sqrt(d.size))
        chain = rus_chain(d, psi, alpha, int(run["rounds"]))
        rows = [{"failures": k, "p_success": p} for k, p in enumerate(chain)]
        return run["name"], rows, {"rounds": len(chain)}
    if kind == "heat":
        f = parse_function(run["f"])
        kappa, runs = _heat_runs(f, run["n"], run.get("kappa"), _as_list(run["t"]), run.get("sparse_s"), alpha)
        rows = [{"t": r.t, "kappa": kappa, "operators": r.s_terms, "error": r.error, "p_success": r.p_success} for r in runs]
        return run["name"], rows, {"kappa": kappa}
    if kind == "sweep":
        rows = []
        for spec in _as_list(run["f"]):
            kw = {"alpha": alpha}
            if run["axis"] == "ancilla":
                kw["ancillas"] = tuple(run.get("ancillas", (0, 2, 4, 8, 16, 32, 64)))
            rows += [{"f": spec, **row} for row in sweep(parse_function(spec), run["n"], run["axis"], **kw)]
        return run["name"], rows, {"rows": len(rows)}
    raise UsageError(f"unknown bench kind {kind!r}")


def thread_cap() -> int:
    raw = os.environ.get("DIAGFORGE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError as exc:
        raise UsageError(f"DIAGFORGE_THREADS must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise UsageError("DIAGFORGE_THREADS must be at least 1")
    return cap


def cmd_bench(args) -> int:
    if args.manifest:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
    else:
        manifest = json.loads(resources.files("diagforge").joinpath("data", "bench_manifest.json").read_text())
    runs = [r for r in manifest["runs"] if not args.only or r["name"] in args.only]
    if args.only and len(runs) != len(set(args.only)):
        known = {r["name"] for r in manifest["runs"]}
        raise UsageError(f"unknown bench runs: {sorted(set(args.only) - known)}")
    workers = max(1, min(thread_cap(), len(runs) or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(bench_run, runs))
    os.makedirs(args.out_dir, exist_ok=True)
    summary = {}
    for name, rows, info in results:
        write_atomic(os.path.join(args.out_dir, f"{name}.csv"), rows_to_csv(_plain(rows)))
        summary[name] = info
    metrics = metrics_doc("bench", _config_of(args), details={"threads": workers, "runs": summary})
    text = dump_json(metrics)
    write_atomic(args.metrics or os.path.join(args.out_dir, "bench_metrics.json"), text)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def _add_common(p) -> None:
    p.add_argument("--config", help="JSON file with flag values; explicit flags win")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metrics", help="metrics JSON path (default: stdout)")


def _add_synthesis(p) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--method", choices=("walsh", "sequential"), default="walsh")
    p.add_argument("--ordering", choices=("gray", "natural"), default="gray")
    p.add_argument("--mcp-strategy", dest="mcp_strategy", choices=("walsh_staircase", "toffoli_ladder"))
    p.add_argument("--m-ancilla", dest="m_ancilla", type=int, default=0)
    p.add_argument("--strategy", choices=("round_robin", "lpt", "support_aware"), default="support_aware")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--epsilon", type=float)
    budget.add_argument("--sparse-s", dest="sparse_s", type=int)
    budget.add_argument("--m-qubits", dest="m_qubits", type=int)
    p.add_argument("--out", help="circuit JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diagforge", description="Synthesize, block-encode and verify diagonal operators.")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("synth", help="circuit for diag(exp(i*phases))")
    _add_common(p)
    _add_synthesis(p)
    p.add_argument("--phases", help="inline:a,b,... | csv:path | random | name:params")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="block-encoding of diag(values)")
    _add_common(p)
    _add_synthesis(p)
    p.add_argument("--values", help="inline:a,b,... | csv:path | name:params")
    p.add_argument("--alpha", type=float, default=1.1)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("qsp", help="state preparation of a sampled function")
    _add_common(p)
    _add_synthesis(p)
    p.add_argument("--f", help="name:params | csv:path")
    p.add_argument("--alpha", type=float, default=1.1)
    p.add_argument("--csv", help="amplitude table path")
    p.set_defaults(func=cmd_qsp)

    p = sub.add_parser("heat", help="periodic diffusion of an initial profile")
    _add_common(p)
    p.add_argument("--f", default="gaussian:0.1", help="initial profile, name:params | csv:path")
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", default="calibrate", help="diffusion coefficient or 'calibrate'")
    p.add_argument("--t", type=float, nargs="+", default=[0.005])
    p.add_argument("--sparse-s", dest="sparse_s", type=int, nargs="+")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--m-qubits", dest="m_qubits", type=int)
    p.add_argument("--alpha", type=float, default=1.1)
    p.add_argument("--csv", help="profile table path")
    p.set_defaults(func=cmd_heat)

    p = sub.add_parser("verify", help="compare a circuit JSON with a target")
    _add_common(p)
    p.add_argument("--circuit")
    p.add_argument("--target", help='JSON with "phases" or "values" (+ "alpha")')
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="replay the shipped experiment manifest")
    _add_common(p)
    p.add_argument("--manifest", help="manifest JSON (default: shipped)")
    p.add_argument("--only", nargs="+", help="run names to execute")
    p.add_argument("--out-dir", dest="out_dir", default="bench_out")
    p.set_defaults(func=cmd_bench)
    return parser


def _load_config(argv: list[str]) -> tuple[dict, list[str]]:
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}, argv
    with open(known.config) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    if not any(a in SUBCOMMANDS for a in argv) and "subcommand" in config:
        argv = [config["subcommand"], *argv]
    return config, argv


REQUIRED = {"synth": ("phases",), "encode": ("values",), "qsp": ("f", "n"), "heat": ("n",), "verify": ("circuit", "target")}


def _apply_config(parser, argv: list[str], config: dict):
    """Parse argv with config values as defaults; a budget flag on the command line replaces config budgets."""
    name = next((a for a in argv if a in SUBCOMMANDS), config.get("subcommand"))
    if config and name is not None:
        if config.get("subcommand", name) != name:
            raise UsageError("config subcommand differs from the command line")
        sub = parser._subparsers._group_actions[0].choices[name]
        dests = {a.dest for a in sub._actions}
        unknown = set(config) - dests - {"subcommand"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**{k: v for k, v in config.items() if k != "subcommand" and k not in BUDGET_KEYS})
    args = parser.parse_args(argv)
    if args.subcommand is None:
        return args
    if not any(getattr(args, k, None) is not None for k in BUDGET_KEYS):
        for k in BUDGET_KEYS:
            if k in config:
                setattr(args, k, config[k])
    missing = [k for k in REQUIRED.get(args.subcommand, ()) if getattr(args, k, None) is None]
    if missing:
        raise UsageError("missing required options: " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return args


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config, argv = _load_config(argv)
        args = _apply_config(parser, argv, config)
        if args.subcommand is None:
            parser.print_help(sys.stderr)
            return EXIT_INVALID
        np.random.seed(args.seed)
        return args.func(args)
    except (UsageError, DiagforgeError, ValueError, OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(f"diagforge: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
