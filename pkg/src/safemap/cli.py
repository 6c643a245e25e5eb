"""Command-line pipeline around the splitting loop.

Three subcommands: `verify` runs a scenario config through expansion,
splitting, and bounding, and writes the safety map as JSON; `mc-check`
draws random initial states inside each certified subdomain and confirms
the sampled ground truth lies inside the stored bounds; `plot-data`
flattens a map into CSV rows for external drawing.

Exit codes: 0 completed (unsafe verdicts and sampling violations are
results, not failures), 2 config or input schema problem, 3 internal
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import pathlib
import sys

import numpy as np

from . import ads
from . import scenarios as sc

__all__ = [
    "MAP_SCHEMA_VERSION",
    "safety_map",
    "verify",
    "mc_check",
    "plot_rows",
    "write_plot_csv",
    "load_map",
    "main",
]

MAP_SCHEMA_VERSION = 1


def _finite(x: float):
    # NaN marks "not applicable" internally; JSON carries null instead
    return float(x) if math.isfinite(x) else None


def _subdomain_json(r: ads.SubdomainResult) -> dict:
    return {
        "lineage": [[j, s] for j, s in r.domain.lineage],
        "box": [[lo, hi] for lo, hi in r.domain.box()],
        "status": r.status,
        "verdict": r.verdict,
        "message": r.message,
        "output_names": list(r.output_names),
        "bounds": [[b.lo, b.hi] for b in r.bounds] if r.bounds else None,
        "remainder": list(r.remainder.per_component) if r.remainder else None,
        "metric_bound": [r.metric_bound.lo, r.metric_bound.hi]
        if r.metric_bound else None,
        "split_error": _finite(r.split_error),
        "condition": _finite(r.condition),
    }


def safety_map(setup: sc.VerifySetup, results, workers: int = 1,
               seed: int = 0) -> dict:
    """Assemble the safety-map document from a finished run."""
    root_volume = setup.root.volume()
    fractions = {"safe": 0.0, "unsafe": 0.0, "indeterminate": 0.0}
    counts = {"safe": 0, "unsafe": 0, "indeterminate": 0}
    peak = None
    for r in results:
        fractions[r.verdict] += r.domain.volume() / root_volume
        counts[r.verdict] += 1
        if r.metric_bound is not None:
            peak = r.metric_bound.hi if peak is None \
                else max(peak, r.metric_bound.hi)
    return {
        "schema_version": MAP_SCHEMA_VERSION,
        "scenario": setup.echo,
        "run": {"workers": int(workers), "seed": int(seed)},
        "subdomains": [_subdomain_json(r) for r in results],
        "aggregates": {
            "subdomain_count": len(results),
            "counts": counts,
            "volume_fractions": fractions,
            "safe_volume_fraction": fractions["safe"],
            "max_metric_bound": peak,
        },
    }


def verify(config_path, workers: int = 1, seed: int = 0) -> dict:
    """Run the full pipeline for one config file."""
    setup = sc.load_config(config_path)
    results = ads.run(setup.scenario, setup.root, setup.cfg, workers=workers)
    return safety_map(setup, results, workers=workers, seed=seed)


def dump_json(doc: dict) -> str:
    # sorted keys and bare separators keep reruns byte-identical
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      allow_nan=False) + "\n"


def load_map(path) -> dict:
    p = pathlib.Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise sc.ConfigError(f"cannot read map {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise sc.ConfigError(f"map {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "subdomains" not in doc \
            or "scenario" not in doc:
        raise sc.ConfigError(f"{path} is not a safety map")
    if doc.get("schema_version") != MAP_SCHEMA_VERSION:
        raise sc.ConfigError(
            f"unsupported map schema_version {doc.get('schema_version')}")
    return doc


def _sample_state(scenario, center, hw, unit) -> list:
    x0 = list(scenario.nominal)
    for j, var in enumerate(scenario.domain_vars):
        x0[var] = center[j] + hw[j] * unit[j]
    return x0


def mc_check(map_doc: dict, samples: int, seed: int,
             base_dir=None) -> dict:
    """Sampled containment audit of every certified subdomain.

    Draws uniform initial states per ok subdomain, reruns the pointwise
    event search, and checks that the metric lies inside the stored metric
    bound and each event output inside its stored interval (both already
    widened by the truncation estimate). Margins are signed distances to
    the nearest bound edge: positive means outside.
    """
    if samples < 1:
        raise sc.ConfigError(f"samples must be >= 1, got {samples}")
    setup = sc.build_setup(map_doc["scenario"], base_dir=base_dir)
    scenario = setup.scenario
    order = setup.cfg.order
    rng = np.random.default_rng(seed)
    out_subs = []
    totals = {"metric": 0, "outputs": 0, "no_event": 0, "failed": 0}
    total_samples = 0
    for sub in map_doc["subdomains"]:
        if sub["status"] != "ok":
            continue
        center = [0.5 * (lo + hi) for lo, hi in sub["box"]]
        hw = [0.5 * (hi - lo) for lo, hi in sub["box"]]
        m_lo, m_hi = sub["metric_bound"]
        bounds = sub["bounds"]
        hits = {"metric": 0, "outputs": 0, "no_event": 0, "failed": 0}
        worst_metric = -math.inf
        worst_output = -math.inf
        for _ in range(samples):
            unit = rng.uniform(-1.0, 1.0, size=len(hw))
            x0 = _sample_state(scenario, center, hw, unit)
            try:
                truth = scenario.sample_truth(x0, order)
            except sc.FAILURES:
                hits["failed"] += 1
                continue
            if truth is None:
                hits["no_event"] += 1
                continue
            outputs, value = truth
            margin = max(m_lo - value, value - m_hi)
            worst_metric = max(worst_metric, margin)
            if margin > 0.0:
                hits["metric"] += 1
            margin = max(max(lo - v, v - hi)
                         for v, (lo, hi) in zip(outputs, bounds))
            worst_output = max(worst_output, margin)
            if margin > 0.0:
                hits["outputs"] += 1
        total_samples += samples
        for k in totals:
            totals[k] += hits[k]
        out_subs.append({
            "lineage": sub["lineage"],
            "samples": samples,
            "violations": hits,
            "worst_metric_margin": _finite(worst_metric),
            "worst_output_margin": _finite(worst_output),
        })
    return {
        "schema_version": MAP_SCHEMA_VERSION,
        "samples_per_subdomain": int(samples),
        "seed": int(seed),
        "subdomains": out_subs,
        "totals": {
            "samples": total_samples,
            "violations": sum(totals.values()),
            "by_kind": totals,
        },
    }


def plot_rows(map_doc: dict) -> list[list]:
    """One flat row per subdomain: corners, verdict, metric interval."""
    dims = len(map_doc["subdomains"][0]["box"]) if map_doc["subdomains"] \
        else 0
    header = ["lineage"]
    for j in range(dims):
        header += [f"x{j}_lo", f"x{j}_hi"]
    header += ["verdict", "metric_lo", "metric_hi"]
    rows = [header]
    for sub in map_doc["subdomains"]:
        path = "".join(s for _, s in sub["lineage"]) or "root"
        row = [path]
        for lo, hi in sub["box"]:
            row += [repr(lo), repr(hi)]
        m = sub["metric_bound"]
        row += [sub["verdict"],
                repr(m[0]) if m else "",
                repr(m[1]) if m else ""]
        rows.append(row)
    return rows


def write_plot_csv(map_doc: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(plot_rows(map_doc))


def _cmd_verify(args) -> int:
    doc = verify(args.config, workers=args.workers, seed=args.seed)
    pathlib.Path(args.out).write_text(dump_json(doc), encoding="utf-8")
    agg = doc["aggregates"]
    counts = agg["counts"]
    print(f"{agg['subdomain_count']} subdomains: {counts['safe']} safe, "
          f"{counts['unsafe']} unsafe, {counts['indeterminate']} "
          f"indeterminate; safe volume fraction "
          f"{agg['safe_volume_fraction']:.4f}")
    if counts["indeterminate"]:
        print(f"warning: {counts['indeterminate']} subdomains have no "
              f"certified bounds", file=sys.stderr)
    print(f"wrote {args.out}")
    return 0


def _cmd_mc_check(args) -> int:
    path = pathlib.Path(args.map)
    report = mc_check(load_map(path), args.samples, args.seed,
                      base_dir=path.parent)
    text = dump_json(report)
    if args.out:
        pathlib.Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    totals = report["totals"]
    print(f"{totals['samples']} samples, {totals['violations']} violations",
          file=sys.stderr)
    return 0


def _cmd_plot_data(args) -> int:
    doc = load_map(args.map)
    write_plot_csv(doc, args.out)
    print(f"wrote {args.out} ({len(doc['subdomains'])} rows)")
    return 0


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="safemap",
        description="certify event outcomes of a controlled system over a "
                    "box of initial states")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a scenario config to a safety map")
    v.add_argument("--config", required=True, help="scenario config JSON")
    v.add_argument("--out", required=True, help="safety map output path")
    v.add_argument("--workers", type=int, default=1,
                   help="parallel expansion workers (default 1)")
    v.add_argument("--seed", type=int, default=0,
                   help="run seed recorded in the map (default 0)")
    v.set_defaults(fn=_cmd_verify)

    m = sub.add_parser("mc-check",
                       help="sampled containment audit of a safety map")
    m.add_argument("--map", required=True, help="safety map JSON")
    m.add_argument("--samples", type=int, default=100,
                   help="samples per certified subdomain (default 100)")
    m.add_argument("--seed", type=int, default=0, help="sampling seed")
    m.add_argument("--out", help="write the report here instead of stdout")
    m.set_defaults(fn=_cmd_mc_check)

    p = sub.add_parser("plot-data",
                       help="flatten a safety map to CSV for drawing")
    p.add_argument("--map", required=True, help="safety map JSON")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(fn=_cmd_plot_data)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except sc.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
