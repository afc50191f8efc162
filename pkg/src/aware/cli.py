"""Command-line entry point: ``aware <subcommand> ...``.

Exit codes: 0 success, 1 validation or verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AwareError
from .graph import (
    DEFAULT_DEGREE_CAP,
    Dataset,
    degree_featurize_dataset,
    find_tudataset,
    load_json_dataset,
    load_tudataset,
    save_json_dataset,
)
from .interpret import (
    edge_importance,
    extract_substructure,
    importance_to_dot,
    wg_alignment,
    write_alignment_csv,
    write_importance_json,
)
from .model import embed_batch, forward, load_checkpoint, save_checkpoint, GraphBatch
from .rip import rip_sweep
from .synthetic import planted_motif_dataset, walk_count_dataset
from .train import (
    TrainConfig,
    ablation_matrix,
    ablation_table,
    evaluate,
    seed_sweep,
    write_ablation_csv,
)
from .verify import SUITES, TOLERANCE, run_suite, summarize

SYNTHETIC = {
    "planted-motif": lambda n, seed: planted_motif_dataset(n, seed)[0],
    "walk-count": lambda n, seed: walk_count_dataset(n, seed),
}


def open_dataset(spec: str, data_dir=None, degree_cap: int = DEFAULT_DEGREE_CAP, seed: int = 0) -> Dataset:
    """Load ``spec``: a JSON file, a TUDataset directory or name, or ``synthetic:<kind>[:N]``."""
    if spec.startswith("synthetic:"):
        parts = spec.split(":")
        if parts[1] not in SYNTHETIC:
            raise AwareError(f"unknown synthetic dataset {parts[1]!r}; expected one of {sorted(SYNTHETIC)}")
        n = int(parts[2]) if len(parts) > 2 else 200
        return SYNTHETIC[parts[1]](n, seed)
    if spec.endswith(".json"):
        ds = load_json_dataset(spec)
    else:
        directory, name = find_tudataset(spec, data_dir)
        ds = load_tudataset(directory, name)
    if not ds.featurized:
        ds = degree_featurize_dataset(ds, degree_cap)
    return ds


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _run_dir(out_dir: str, command: str, payload: dict) -> Path:
    key = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]
    d = Path(out_dir) / f"{command}-{key}"
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.json").write_text(_dump(payload))
    return d


def _load_config(path: str | None, seeds: str | None) -> TrainConfig:
    raw = json.loads(Path(path).read_text()) if path else {}
    if seeds:
        raw["seeds"] = [int(s) for s in seeds.split(",")]
    return TrainConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    ds = open_dataset(args.data, args.data_dir, args.degree_cap, args.seed)
    summary = {
        "name": ds.name,
        "graphs": len(ds),
        "task_kind": ds.task_kind,
        "classes": ds.num_classes,
        "value_counts": list(ds.schema.value_counts),
        "mean_vertices": float(np.mean([g.vertex_count for g in ds.graphs])),
        "mean_edges": float(np.mean([g.edge_count for g in ds.graphs])),
    }
    if args.out:
        save_json_dataset(ds, args.out)
        summary["written"] = str(args.out)
    sys.stdout.write(_dump(summary))
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config, args.seeds)
    ds = open_dataset(args.data, args.data_dir, args.degree_cap, args.seed)
    payload = {"data": args.data, "config": config.to_dict(), "seed": args.seed}
    run = _run_dir(args.out_dir, "train", payload)
    result = seed_sweep(ds, config)
    for rec in result.records:
        save_checkpoint(run / f"seed{rec.seed}.ckpt", rec.params, config.aware, ds.schema)
    out = result.to_dict()
    out["timing"] = {"wall_clock": out.pop("wall_clock")}
    out["run_dir"] = str(run)
    (run / "result.json").write_text(_dump(out))
    sys.stdout.write(_dump(out))
    return 0


def cmd_eval(args) -> int:
    params, config, schema = load_checkpoint(args.checkpoint)
    ds = open_dataset(args.data, args.data_dir, args.degree_cap, args.seed)
    if ds.schema != schema:
        raise AwareError(f"dataset schema {ds.schema.value_counts} does not match checkpoint {schema.value_counts}")
    value = evaluate(params, config, list(ds.graphs), args.metric)
    sys.stdout.write(_dump({"metric": args.metric, "value": value, "graphs": len(ds)}))
    return 0


def cmd_verify(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    records = []
    for name in names:
        records.extend(run_suite(name, args.seed, args.graphs))
    report = {"suites": list(names), "seed": args.seed, "tolerance": TOLERANCE,
              "summary": summarize(records), "records": records}
    text = _dump(report)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0 if report["summary"]["pass"] else 1


def cmd_rip(args) -> int:
    rs = tuple(int(x) for x in args.r.split(","))
    rows = rip_sweep(rs, args.K, args.n, args.s, args.family, args.domain, args.matrices,
                     args.vectors, args.recovery_trials, args.seed)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["family", "r", "K", "n", "s", "trials", "measured_epsilon", "recovery_rate"],
                       lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return 0


def cmd_interpret(args) -> int:
    params, config, schema = load_checkpoint(args.checkpoint)
    ds = open_dataset(args.data, args.data_dir, args.degree_cap, args.seed)
    payload = {"checkpoint": str(args.checkpoint), "data": args.data, "graph": args.graph,
               "threshold": args.threshold, "seed": args.seed}
    run = _run_dir(args.out_dir, "interpret", payload)
    g = ds.graphs[args.graph]
    _, trace = forward(g, params, config)
    imp = edge_importance(trace, g, args.threshold)
    sub = extract_substructure(g, imp)
    write_importance_json(imp, run / "importance.json")
    (run / "importance.dot").write_text(importance_to_dot(g, imp))
    out = {"graph": args.graph, "threshold": args.threshold, "edges": len(imp.scores),
           "kept_edges": [list(e) for e in sub.edges], "components": [list(c) for c in sub.components],
           "run_dir": str(run)}
    if args.alignment:
        rng = np.random.default_rng(args.seed)
        pick = rng.choice(len(ds), size=min(200, len(ds)), replace=False)
        emb = embed_batch(GraphBatch.from_graphs([ds.graphs[i] for i in pick]), params, config).T
        rep = wg_alignment(params, config, emb, seed=args.seed)
        write_alignment_csv(rep, run / "alignment.csv")
        out["alignment"] = rep.to_dict()
    sys.stdout.write(_dump(out))
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args.config, args.seeds)
    ds = open_dataset(args.data, args.data_dir, args.degree_cap, args.seed)
    payload = {"data": args.data, "config": config.to_dict(), "seed": args.seed}
    run = _run_dir(args.out_dir, "ablate", payload)
    results = {name: seed_sweep(ds, cfg) for name, cfg in ablation_matrix(config)}
    rows = ablation_table(results)
    write_ablation_csv(rows, run / "ablation.csv")
    out = {"rows": rows, "results": {k: {kk: vv for kk, vv in v.to_dict().items() if kk != "wall_clock"}
                                     for k, v in results.items()}, "run_dir": str(run)}
    (run / "ablation.json").write_text(_dump(out))
    sys.stdout.write(_dump(out))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aware", description="Attention-weighted walk aggregation for graphs.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--seed", type=int, default=0, help="source of all randomness")
        if data:
            sp.add_argument("--data", required=True,
                            help="JSON file, TUDataset directory or name, or synthetic:<kind>[:N]")
            sp.add_argument("--data-dir", default=None, help="dataset root (default: $AWARE_DATA_DIR)")
            sp.add_argument("--degree-cap", type=int, default=DEFAULT_DEGREE_CAP)

    sp = sub.add_parser("ingest", help="load and summarize a dataset")
    common(sp)
    sp.add_argument("--out", help="write the featurized dataset as JSON")
    sp.set_defaults(func=cmd_ingest)

    for name, func, helptext in (("train", cmd_train, "seed sweep of supervised training"),
                                 ("ablate", cmd_ablate, "run the ablation matrix")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--config", help="JSON config (model and training keys)")
        sp.add_argument("--seeds", help="comma-separated seeds, overrides the config")
        sp.add_argument("--out-dir", default="runs")
        sp.set_defaults(func=func)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--metric", default="ACC", choices=["ACC", "ROC-AUC", "RMSE", "MAE"])
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("verify", help="check the model against the brute-force walk oracle")
    common(sp, data=False)
    sp.add_argument("--suite", default="all", choices=list(SUITES) + ["all"])
    sp.add_argument("--graphs", type=int, default=None, help="random graphs per suite")
    sp.add_argument("--out", help="also write the JSON report here")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("rip", help="empirical isometry constants and sparse recovery")
    common(sp, data=False)
    sp.add_argument("--family", default="rademacher", choices=["rademacher", "gaussian"])
    sp.add_argument("--r", default="64,256,1024", help="comma-separated embedding dimensions")
    sp.add_argument("--K", type=int, default=6)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--s", type=int, default=4)
    sp.add_argument("--domain", default="distinct", choices=["full", "multiset", "distinct"])
    sp.add_argument("--matrices", type=int, default=20)
    sp.add_argument("--vectors", type=int, default=200)
    sp.add_argument("--recovery-trials", type=int, default=100)
    sp.add_argument("--out", help="also write the CSV here")
    sp.set_defaults(func=cmd_rip)

    sp = sub.add_parser("interpret", help="edge importance and W_g alignment for a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--graph", type=int, default=0, help="index of the graph to explain")
    sp.add_argument("--threshold", type=float, default=1.0)
    sp.add_argument("--alignment", action="store_true", help="also report W_g alignment (linear predictor)")
    sp.add_argument("--out-dir", default="runs")
    sp.set_defaults(func=cmd_interpret)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (AwareError, ValueError, OSError) as exc:
        sys.stderr.write(f"aware {args.command}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
