"""Command-line frontend.

Subcommands: generate (synthetic datasets), cluster (run a clustering
algorithm and write tree/assignment artifacts plus a manifest), eval
(score a saved tree), bench (scaleup timing harness), plot (2-D SVG
scatter). Exit codes: 0 success, 2 usage or validation error, 1 internal
error. Every run is reproducible from its manifest: same input and seed
give byte-identical numeric outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import baseline, datasets, dendro, hier, metrics
from .ikernel import IdkFeatures, IdkOps, IsolationModel

MANIFEST_FORMAT = "kernelhc-run-manifest"
MANIFEST_VERSION = 1
DEFAULT_OUT_ENV = "KERNELHC_OUT_DIR"

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]
NOISE_COLOR = "#999999"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, command, config, seed, input_path, outputs,
                    timings, metric_values, warnings, extra=None):
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "command": command,
        "config": config,
        "seed": seed,
        "input": {"path": str(input_path), "sha256": _sha256(input_path)}
        if input_path else None,
        "outputs": {k: str(v) for k, v in outputs.items()},
        "timings": timings,
        "metrics": metric_values,
        "warnings": warnings,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(DEFAULT_OUT_ENV) or "kernelhc-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cap_threads(n):
    if n is None:
        return
    if n < 1:
        raise ValueError(f"--threads must be >= 1, got {n}")
    os.environ.setdefault("OMP_NUM_THREADS", str(n))
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        pass  # numpy may still honor the env var set above


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.spec_file:
        with open(args.spec_file) as f:
            spec = json.load(f)
        components = datasets.components_from_spec(spec)
        name = Path(args.spec_file).stem
    else:
        if args.preset != "paper-analog":
            raise ValueError(f"unknown preset {args.preset!r}")
        components = datasets.PAPER_ANALOG_COMPONENTS
        name = args.preset
    ds = datasets.generate_mixture(components, args.seed, name=name)
    datasets.save_csv(args.out, ds)
    print(f"wrote {ds.n} points, {ds.d} columns, "
          f"{len(np.unique(ds.labels))} classes -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# cluster
# ---------------------------------------------------------------------------

def _run_kernel_pipeline(ds, args):
    config = hier.RunConfig(
        k=args.k,
        psi=args.psi,
        t=args.t,
        tau=args.tau,
        rho=args.rho,
        s=args.subset_size,
        seed=args.seed,
        clusterer=args.clusterer,
        refine=not args.no_refine,
        kernel=args.kernel,
        bandwidth=args.bandwidth,
        eps_sim=args.eps_sim,
        min_pts=args.min_pts,
        restarts=args.restarts,
        tree_method="ahc" if args.algo == "ahc" else "divisive",
    )
    result = hier.run(ds.points, config)
    return result, dataclasses.asdict(config)


def cmd_cluster(args) -> int:
    ds = datasets.load_csv(args.infile, label_column=args.label_col)
    out = _out_dir(args)
    warnings = []
    timings = {}
    metric_values = {}
    outputs = {}

    t0 = time.perf_counter()
    if args.algo == "bisect-kmeans":
        config = baseline.BisectConfig(k=args.k, restarts=args.restarts, seed=args.seed)
        tree = baseline.bisect_kmeans(ds.points, config)
        warnings.extend(getattr(tree, "warnings", []))
        assignments = dendro.leaf_labels(tree)
        config_doc = dataclasses.asdict(config)
        model = None
        extra = {"k_effective": tree.k, "iterations": 0}
    else:
        result, config_doc = _run_kernel_pipeline(ds, args)
        tree = result.tree
        assignments = result.assignments
        warnings.extend(result.warnings)
        timings.update(result.timings)
        model = result.model
        if result.feats is not None:
            dendro.annotate_alphas(tree, result.feats)
        metric_values["tsc_local_before_refine"] = result.tsc_trace[0]
        metric_values["tsc_local_after_refine"] = result.tsc_trace[1]
        extra = {"k_effective": result.k, "iterations": result.iterations}
    timings["total"] = time.perf_counter() - t0

    outputs["tree_json"] = out / "tree.json"
    outputs["newick"] = out / "tree.newick"
    outputs["assignments"] = out / "assignments.csv"
    with open(outputs["tree_json"], "w") as f:
        f.write(tree.to_json())
    with open(outputs["newick"], "w") as f:
        f.write(tree.to_newick() + "\n")
    datasets.save_assignments(outputs["assignments"], assignments)
    if model is not None:
        outputs["model"] = out / "model.npz"
        model.save(outputs["model"])

    if ds.labels is not None:
        metric_values["purity"] = dendro.dendrogram_purity(tree, ds.labels)
        flat = dendro.leaf_labels(tree)
        metric_values["nmi"] = metrics.nmi(flat, ds.labels)
        metric_values["ari"] = metrics.ari(flat, ds.labels)

    manifest = out / "manifest.json"
    _write_manifest(manifest, "cluster", {"algo": args.algo, **config_doc},
                    args.seed, args.infile, outputs, timings, metric_values,
                    warnings, extra)
    for key, val in metric_values.items():
        print(f"{key}: {val:.4f}")
    print(f"artifacts in {out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    with open(args.tree) as f:
        tree = dendro.Dendrogram.from_json(f.read())
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    if not wanted:
        raise ValueError("no metrics requested")
    unknown = set(wanted) - {"purity", "nmi", "ari", "tsc"}
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")

    labels = None
    if {"purity", "nmi", "ari"} & set(wanted):
        if not args.labels:
            raise ValueError("--labels is required for purity/nmi/ari")
        labels = datasets.load_csv(args.labels, label_column=args.label_col).labels
        if labels is None:
            raise ValueError(f"no {args.label_col!r} column in {args.labels}")

    report = {}
    if "purity" in wanted:
        report["purity"] = dendro.dendrogram_purity(tree, labels)
    if "nmi" in wanted or "ari" in wanted:
        flat = dendro.leaf_labels(tree)
        if "nmi" in wanted:
            report["nmi"] = metrics.nmi(flat, labels)
        if "ari" in wanted:
            report["ari"] = metrics.ari(flat, labels)
    if "tsc" in wanted:
        if not (args.infile and args.model):
            raise ValueError("--in and --model are required for tsc")
        ds = datasets.load_csv(args.infile, label_column=args.label_col)
        model = IsolationModel.load(args.model)
        feats = IdkFeatures.fit(model, ds.points)
        report["tsc"] = dendro.tsc(tree, feats)
        report["tsc_local"] = dendro.tsc_local(tree, feats)

    width = max(len(k) for k in report)
    for key, val in report.items():
        print(f"{key:<{width}}  {val:.6f}")
    print(json.dumps(report, sort_keys=True))
    if args.out:
        with open(args.out, "w") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def fit_linear_vs_quadratic(ns, ts):
    """Least-squares fit of t = a + b*n against t = a + c*n^2.

    Returns (sse_linear, sse_quadratic); the model with the smaller
    residual explains the scaling better.
    """
    ns = np.asarray(ns, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    sses = []
    for powered in (ns, ns**2):
        A = np.column_stack([np.ones_like(powered), powered])
        coef, *_ = np.linalg.lstsq(A, ts, rcond=None)
        sses.append(float(((A @ coef - ts) ** 2).sum()))
    return sses[0], sses[1]


def prefers_linear(ns, ts) -> bool:
    sse_lin, sse_quad = fit_linear_vs_quadratic(ns, ts)
    return sse_lin <= sse_quad


def _parse_sizes(text: str):
    factors = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        factors.append(float(part[:-1]) if part.endswith("x") else float(part))
    if not factors:
        raise ValueError("--sizes must list at least one size factor")
    return factors


def run_scaleup(factors, repeats, seed, k=datasets.PAPER_ANALOG_K, psi=16,
                t=200, tau=0.01, rho=0.1, s=2000, restarts=10):
    """Time the kernel pipeline and bisecting k-means on scaled copies of
    the analog dataset; returns a list of row dicts (min over repeats)."""
    rows = []
    for factor in factors:
        comps = [dataclasses.replace(c, size=max(1, int(round(c.size * factor))))
                 for c in datasets.PAPER_ANALOG_COMPONENTS]
        ds = datasets.generate_mixture(comps, seed, name=f"analog-{factor}x")
        n = ds.n
        config = hier.RunConfig(k=k, psi=psi, t=t, tau=tau, rho=rho,
                                s=min(s, n), seed=seed)
        hkc_times, bkm_times = [], []
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            hier.run(ds.points, config)
            hkc_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            baseline.bisect_kmeans(
                ds.points, baseline.BisectConfig(k=k, restarts=restarts, seed=seed)
            )
            bkm_times.append(time.perf_counter() - t0)
        rows.append({"factor": factor, "n": n,
                     "hkc_seconds": min(hkc_times),
                     "bisect_seconds": min(bkm_times)})
    return rows


def cmd_bench(args) -> int:
    factors = _parse_sizes(args.sizes)
    out = _out_dir(args)
    rows = run_scaleup(factors, args.repeats, args.seed, psi=args.psi,
                       tau=args.tau, s=args.subset_size or 2000,
                       restarts=args.restarts)
    csv_path = out / "scaleup.csv"
    with open(csv_path, "w") as f:
        f.write("factor,n,hkc_seconds,bisect_seconds\n")
        for r in rows:
            f.write(f"{r['factor']},{r['n']},{r['hkc_seconds']:.6f},{r['bisect_seconds']:.6f}\n")
    ns = [r["n"] for r in rows]
    summary = {
        "rows": rows,
        "hkc_prefers_linear": prefers_linear(ns, [r["hkc_seconds"] for r in rows]),
        "bisect_prefers_linear": prefers_linear(ns, [r["bisect_seconds"] for r in rows]),
    }
    with open(out / "scaleup.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"{'n':>8} {'hkc_s':>10} {'bisect_s':>10}")
    for r in rows:
        print(f"{r['n']:>8} {r['hkc_seconds']:>10.3f} {r['bisect_seconds']:>10.3f}")
    print(f"hkc prefers linear fit: {summary['hkc_prefers_linear']}")
    print(f"results in {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def write_scatter_svg(path, points, labels, width=720, height=540, margin=36):
    """One circle per point, colored by cluster; label -1 renders gray."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)

    def sx(x):
        return margin + (x - lo[0]) / span[0] * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - lo[1]) / span[1] * (height - 2 * margin)

    uniq = [u for u in np.unique(labels) if u >= 0]
    color = {u: PALETTE[i % len(PALETTE)] for i, u in enumerate(uniq)}
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for p, lab in zip(points, labels):
        fill = color.get(lab, NOISE_COLOR) if lab >= 0 else NOISE_COLOR
        lines.append(
            f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="2.5" '
            f'fill="{fill}" fill-opacity="0.8"/>'
        )
    lines.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def cmd_plot(args) -> int:
    ds = datasets.load_csv(args.infile, label_column=args.label_col)
    if ds.d != 2:
        raise ValueError(f"plotting needs 2-D data, got {ds.d} columns")
    labels = datasets.load_assignments(args.assignments)
    if len(labels) != ds.n:
        raise ValueError(f"{len(labels)} assignments for {ds.n} points")
    write_scatter_svg(args.out, ds.points, labels)
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelhc",
        description="Divisive hierarchical clustering with distributional kernels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset CSV")
    g.add_argument("--preset", default="paper-analog")
    g.add_argument("--spec-file", default=None, help="JSON list of mixture components")
    g.add_argument("--seed", type=int, default=datasets.PAPER_ANALOG_SEED)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="cluster a CSV dataset")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--label-col", default=None)
    c.add_argument("--algo", choices=["hkc", "bisect-kmeans", "ahc"], default="hkc")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--psi", type=int, default=16)
    c.add_argument("--t", type=int, default=200)
    c.add_argument("--tau", type=float, default=0.01)
    c.add_argument("--rho", type=float, default=0.1)
    c.add_argument("--subset-size", type=int, default=None)
    c.add_argument("--kernel", choices=["idk", "gdk"], default="idk")
    c.add_argument("--bandwidth", type=float, default=None)
    c.add_argument("--clusterer", choices=["kpskc", "kmeans", "ik-dbscan"],
                   default="kpskc")
    c.add_argument("--eps-sim", type=float, default=0.15)
    c.add_argument("--min-pts", type=int, default=5)
    c.add_argument("--restarts", type=int, default=10)
    c.add_argument("--no-refine", action="store_true")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out-dir", default=None)
    c.add_argument("--threads", type=int, default=None)
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("eval", help="score a saved dendrogram")
    e.add_argument("--tree", required=True)
    e.add_argument("--labels", default=None, help="CSV holding the label column")
    e.add_argument("--label-col", default="label")
    e.add_argument("--metrics", default="purity")
    e.add_argument("--in", dest="infile", default=None)
    e.add_argument("--model", default=None)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="scaleup timing of the two algorithms")
    b.add_argument("--sizes", default="1x,2x,4x,8x")
    b.add_argument("--repeats", type=int, default=2)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--psi", type=int, default=16)
    b.add_argument("--tau", type=float, default=0.01)
    b.add_argument("--subset-size", type=int, default=None)
    b.add_argument("--restarts", type=int, default=10)
    b.add_argument("--out-dir", default=None)
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="2-D scatter SVG colored by cluster")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--label-col", default=None)
    p.add_argument("--assignments", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", None) is not None:
            _cap_threads(args.threads)
        return args.func(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - last-resort guard for exit code 1
        print(f"internal error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
