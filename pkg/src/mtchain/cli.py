"""Command-line entry point: run chain experiments from a TOML config,
analyze persisted runs into plot-ready CSV/JSON reports, and expose the
scorer and the curve fitter as one-shot utilities.

Exit codes: 0 success, 1 usage/config problem, 2 backend failure,
3 data integrity violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .analysis import (
    accumulated_gleu,
    aggregate_curves,
    curve_to_json,
    fit_power_law,
    fit_to_json,
    load_curve_csv,
    matrix_to_json,
    pair_matrix,
    size_trajectory,
    write_band_csv,
    write_curves_csv,
    write_matrix_csv,
    write_sizes_csv,
)
from .backends import (
    BackendConfig,
    BackendError,
    CachedBackend,
    CacheIntegrityError,
    GoogleV2Backend,
    SimulatorBackend,
    SimulatorParams,
    TranslationCache,
    TranslationRequest,
    translate,
)
from .catalog import (
    Catalog,
    CatalogError,
    TOPOLOGIES,
    build_common_chain,
    build_mixed_chain,
    build_random_chain,
    bundled_catalog,
    load_catalog,
)
from .gleu import score_texts
from .runner import (
    ChainRun,
    DataIntegrityError,
    SourceText,
    bundled_text,
    load_run,
    load_text,
    resume_chain,
    run_chain,
)


class UsageError(Exception):
    """Bad command line or experiment configuration."""


@dataclass(frozen=True)
class TextConfig:
    id: str
    path: Path | None = None
    language: str | None = None


@dataclass(frozen=True)
class ChainConfig:
    label: str
    mode: str
    hops: int
    seed: int | None = None
    family: str | None = None
    families: tuple[str, ...] = ()
    topology: str = "pivot"


@dataclass
class ExperimentConfig:
    output_dir: Path
    backend: dict
    texts: list[TextConfig]
    chains: list[ChainConfig]
    catalog_path: Path | None = None
    reference: str = "en"
    digest: str = ""


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file (paths resolve against it)."""
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
        data = tomllib.loads(raw_bytes.decode("utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: invalid TOML: {exc}") from exc
    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    backend = data.get("backend", {"kind": "simulator"})
    if backend.get("kind", "simulator") not in ("simulator", "google-v2"):
        raise UsageError(f"unknown backend kind {backend.get('kind')!r}")

    texts = []
    for entry in data.get("texts", []):
        if "id" not in entry:
            raise UsageError("every [[texts]] entry needs an id")
        if "path" in entry:
            if "language" not in entry:
                raise UsageError(f"text {entry['id']!r}: a path needs a language")
            file_path = resolve(entry["path"])
            if not file_path.exists():
                raise UsageError(f"text {entry['id']!r}: file not found: {file_path}")
            texts.append(TextConfig(id=entry["id"], path=file_path, language=entry["language"]))
        else:
            texts.append(TextConfig(id=entry["id"]))
    if not texts:
        raise UsageError("config defines no texts")

    chains = []
    labels = set()
    for entry in data.get("chains", []):
        label = entry.get("label")
        mode = entry.get("mode")
        hops = entry.get("hops")
        if not label or not mode or not hops:
            raise UsageError("every [[chains]] entry needs label, mode, and hops")
        if label in labels:
            raise UsageError(f"duplicate chain label {label!r}")
        labels.add(label)
        topology = entry.get("topology", "pivot")
        if topology not in TOPOLOGIES:
            raise UsageError(f"chain {label!r}: unknown topology {topology!r}")
        if mode == "random":
            if "seed" not in entry:
                raise UsageError(f"random chain {label!r} needs a seed")
        elif mode == "common":
            if "family" not in entry:
                raise UsageError(f"common chain {label!r} needs a family")
        elif mode == "mixed":
            if "families" not in entry or "seed" not in entry:
                raise UsageError(f"mixed chain {label!r} needs families and a seed")
        else:
            raise UsageError(f"chain {label!r}: unknown mode {mode!r}")
        chains.append(
            ChainConfig(
                label=label,
                mode=mode,
                hops=int(hops),
                seed=entry.get("seed"),
                family=entry.get("family"),
                families=tuple(entry.get("families", ())),
                topology=topology,
            )
        )
    if not chains:
        raise UsageError("config defines no chains")

    catalog_path = resolve(data["catalog"]) if "catalog" in data else None
    if catalog_path is not None and not catalog_path.exists():
        raise UsageError(f"catalog file not found: {catalog_path}")
    output_dir = resolve(data.get("output_dir", "runs"))
    if "cache_dir" in backend:
        backend = dict(backend)
        backend["cache_dir"] = str(resolve(backend["cache_dir"]))
    return ExperimentConfig(
        output_dir=output_dir,
        backend=backend,
        texts=texts,
        chains=chains,
        catalog_path=catalog_path,
        reference=data.get("reference", "en"),
        digest=hashlib.sha256(raw_bytes).hexdigest(),
    )


def build_catalog(config: ExperimentConfig) -> Catalog:
    if config.catalog_path is not None:
        return load_catalog(config.catalog_path, reference=config.reference)
    return bundled_catalog(reference=config.reference)


def build_backend(config: ExperimentConfig, catalog: Catalog):
    """Construct the configured backend (optionally cache-wrapped)."""
    cfg = config.backend
    kind = cfg.get("kind", "simulator")
    if kind == "simulator":
        params = SimulatorParams(
            seed=int(cfg.get("seed", 0)),
            deletion_coefficient=float(cfg.get("deletion_coefficient", 0.03)),
            substitution_coefficient=float(cfg.get("substitution_coefficient", 0.08)),
            distance_normalizer=cfg.get("distance_normalizer"),
        )
        backend = SimulatorBackend(catalog, params)
    else:
        backend_config = BackendConfig(
            endpoint=cfg.get("endpoint", BackendConfig.endpoint),
            api_key_env=cfg.get("api_key_env", BackendConfig.api_key_env),
            rate_limit=float(cfg.get("rate_limit", BackendConfig.rate_limit)),
            max_attempts=int(cfg.get("max_attempts", BackendConfig.max_attempts)),
            backoff_base=float(cfg.get("backoff_base", BackendConfig.backoff_base)),
            timeout=float(cfg.get("timeout", BackendConfig.timeout)),
        )
        backend = GoogleV2Backend(backend_config)
    if "cache_dir" in cfg:
        backend = CachedBackend(backend, TranslationCache(cfg["cache_dir"]))
    return backend


def _build_spec(chain: ChainConfig, catalog: Catalog, topology: str | None):
    topo = topology or chain.topology
    if chain.mode == "random":
        return build_random_chain(catalog, chain.hops, chain.seed, topology=topo, label=chain.label)
    if chain.mode == "common":
        return build_common_chain(catalog, chain.family, chain.hops, topology=topo, label=chain.label)
    return build_mixed_chain(
        catalog, list(chain.families), chain.hops, chain.seed, topology=topo, label=chain.label
    )


def _load_source_text(text_cfg: TextConfig) -> SourceText:
    if text_cfg.path is not None:
        return load_text(text_cfg.path, text_cfg.id, text_cfg.language)
    try:
        return bundled_text(text_cfg.id)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc


def _intake(text: SourceText, reference: str, backend) -> SourceText:
    """Bring a source text into the reference language before the chain starts."""
    if text.language == reference:
        return text
    body = translate(backend, TranslationRequest(text.body, text.language, reference))
    return SourceText(
        id=text.id,
        language=reference,
        body=body,
        origin_language=text.language,
        origin_body=text.body,
    )


def cmd_run(
    config: ExperimentConfig,
    jobs: int = 1,
    topology: str | None = None,
    backend=None,
    echo=print,
) -> tuple[list[Path], bool]:
    """Execute or resume every configured chain x text combination.

    Returns the run directories and whether every run completed.  A
    pre-built backend can be injected (tests); otherwise the configured
    one is constructed, which for a live backend validates credentials
    before any hop runs.
    """
    catalog = build_catalog(config)
    if backend is None:
        backend = build_backend(config, catalog)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    intake_cache: dict[str, SourceText] = {}
    intake_lock = threading.Lock()

    def intake_for(text_cfg: TextConfig) -> SourceText:
        # lock so concurrent chains sharing a text translate it only once
        with intake_lock:
            if text_cfg.id not in intake_cache:
                intake_cache[text_cfg.id] = _intake(
                    _load_source_text(text_cfg), catalog.reference, backend
                )
            return intake_cache[text_cfg.id]

    tasks = [(chain, text) for chain in config.chains for text in config.texts]

    def execute(task) -> ChainRun:
        chain, text_cfg = task
        run_id = f"{chain.label}__{text_cfg.id}"
        run_dir = config.output_dir / run_id
        if (run_dir / "spec.json").exists():
            run = load_run(run_dir)
            if run.complete:
                echo(f"[{run_id}] already complete ({run.spec.hops} hops), skipping")
                return run
            echo(f"[{run_id}] resuming at hop {len(run.hops) + 1}/{run.spec.hops}")
            run = resume_chain(run, backend)
        else:
            spec = _build_spec(chain, catalog, topology)
            text = intake_for(text_cfg)
            echo(f"[{run_id}] running {spec.hops} hops ({spec.topology})")
            run = run_chain(text, spec, backend, run_dir, run_id=run_id)
        echo(f"[{run_id}] {run.status} ({len(run.hops)}/{run.spec.hops} hops)")
        return run

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(execute, tasks))
    else:
        runs = [execute(task) for task in tasks]
    all_complete = all(run.complete for run in runs)
    return [run.path for run in runs], all_complete


def _discover_runs(paths: list[Path]) -> list[ChainRun]:
    run_dirs: list[Path] = []
    for path in paths:
        if (path / "spec.json").exists():
            run_dirs.append(path)
        elif path.is_dir():
            run_dirs.extend(sorted(p for p in path.iterdir() if (p / "spec.json").exists()))
    if not run_dirs:
        raise UsageError(f"no runs found under: {', '.join(str(p) for p in paths)}")
    return [load_run(p) for p in run_dirs]


def cmd_analyze(
    run_paths: list[Path],
    out_dir: Path,
    groups: list[str] | None = None,
    echo=print,
) -> dict:
    """Build the full report for a set of persisted runs.

    Emits report.json plus plot-ready CSVs: per-run and per-group accuracy
    curves, size curves, fit summary, per-group RMSE bands, and per-label
    pair matrices.
    """
    runs = _discover_runs(run_paths)
    if groups:
        runs = [run for run in runs if run.spec.mode in groups]
        if not runs:
            raise UsageError(f"no runs found for groups: {', '.join(groups)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    curves = []
    run_report = {}
    for run in runs:
        curve = accumulated_gleu(run)
        fit = fit_power_law(curve)
        curves.append(curve)
        sizes = [float(run.text.initial_word_count)] + [
            float(hop.output_word_count) for hop in run.hops
        ]
        run_report[run.run_id] = {
            "label": run.spec.label,
            "mode": run.spec.mode,
            "topology": run.spec.topology,
            "status": run.status,
            "fit": fit_to_json(fit),
            "final_size_ratio": (sizes[-1] / sizes[0]) if sizes[0] else 0.0,
        }

    group_order = sorted({run.spec.mode for run in runs})
    group_report = {}
    mean_curves = []
    for mode in group_order:
        members = [c for run, c in zip(runs, curves) if run.spec.mode == mode]
        mean_curve, band, fit = aggregate_curves(members, label=f"mean-{mode}")
        mean_curves.append(mean_curve)
        group_report[mode] = {
            "fit": fit_to_json(fit),
            "curves": [c.label for c in members],
            "mean_curve": curve_to_json(mean_curve),
            "band_half_width": band.half_width,
        }
        write_band_csv(out_dir / f"band_{mode}.csv", band)

    per_run_sizes, mean_sizes, final_ratio = size_trajectory(runs)
    write_sizes_csv(out_dir / "sizes.csv", per_run_sizes + [mean_sizes])
    write_curves_csv(out_dir / "curves.csv", curves + mean_curves)

    matrices = {}
    for label in sorted({run.spec.label for run in runs}):
        members = [run for run in runs if run.spec.label == label]
        matrix = pair_matrix(members)
        matrices[label] = matrix_to_json(matrix)
        write_matrix_csv(out_dir / f"matrix_{label}.csv", matrix)
    overall = pair_matrix(runs)
    write_matrix_csv(out_dir / "matrix_overall.csv", overall)
    write_matrix_csv(out_dir / "matrix_overall_counts.csv", overall, counts=True)

    with open(out_dir / "fits.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("scope,name,alpha,rmse,n_points\n")
        for mode in group_order:
            fit = group_report[mode]["fit"]
            fh.write(f"group,{mode},{fit['alpha']!r},{fit['rmse']!r},{fit['n_points']}\n")
        for run_id in sorted(run_report):
            fit = run_report[run_id]["fit"]
            fh.write(f"run,{run_id},{fit['alpha']!r},{fit['rmse']!r},{fit['n_points']}\n")

    report = {
        "provenance": {
            "tool_version": __version__,
            "backends": sorted({run.backend_identity for run in runs}),
            "runs_digest": hashlib.sha256(
                "\n".join(
                    sorted(
                        hashlib.sha256((run.path / "hops.jsonl").read_bytes()).hexdigest()
                        for run in runs
                    )
                ).encode("ascii")
            ).hexdigest(),
            "generated_at": datetime.now(timezone.utc).isoformat(),
        },
        "groups": group_report,
        "runs": run_report,
        "pair_matrices": matrices,
        "pair_matrix_overall": matrix_to_json(overall),
        "sizes": {
            "mean": [[t, v] for t, v in mean_sizes.points],
            "final_size_ratio": final_ratio,
        },
    }
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    for mode in group_order:
        fit = group_report[mode]["fit"]
        echo(f"group {mode}: alpha={fit['alpha']:.4f} rmse={fit['rmse']:.4f} n={fit['n_points']}")
    return report


def cmd_score(candidate_path: Path, reference_path: Path, n_max: int = 4, echo=print) -> float:
    try:
        candidate = Path(candidate_path).read_text(encoding="utf-8")
        reference = Path(reference_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read input file: {exc}") from exc
    value = score_texts(candidate, reference, n_max=n_max).value
    echo(f"{value:.6f}")
    return value


def cmd_fit(curve_path: Path, out: Path | None = None, echo=print) -> list[dict]:
    try:
        curves = load_curve_csv(curve_path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot fit {curve_path}: {exc}") from exc
    results = []
    for curve in curves:
        fit = fit_power_law(curve)
        results.append({"curve": curve.label or "curve", **fit_to_json(fit)})
        echo(
            f"{curve.label or 'curve'}: alpha={fit.alpha:.6f} "
            f"rmse={fit.rmse:.6f} n={fit.n_points}"
        )
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(results, fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")
    return results


def cmd_heatmap(run_paths: list[Path], out_dir: Path, echo=print) -> None:
    runs = _discover_runs(run_paths)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = pair_matrix(runs)
    write_matrix_csv(out_dir / "matrix.csv", matrix)
    write_matrix_csv(out_dir / "matrix_counts.csv", matrix, counts=True)
    overall = matrix.overall_mean()
    shown = f"{overall:.4f}" if overall is not None else "undefined"
    echo(
        f"{len(matrix.languages)} languages, {len(matrix.cells)} directed pairs, "
        f"off-diagonal mean {shown}"
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mtchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the chains defined in a config file")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--topology", choices=list(TOPOLOGIES), default=None)
    p_run.add_argument("--out", type=Path, default=None, help="override the config output_dir")

    p_analyze = sub.add_parser("analyze", help="build a report from persisted runs")
    p_analyze.add_argument("runs", nargs="+", type=Path)
    p_analyze.add_argument("--out", required=True, type=Path)
    p_analyze.add_argument("--group", action="append", dest="groups", default=None,
                           choices=["random", "common", "mixed"])

    p_score = sub.add_parser("score", help="GLEU between two text files")
    p_score.add_argument("candidate", type=Path)
    p_score.add_argument("reference", type=Path)
    p_score.add_argument("--nmax", type=int, default=4, help="highest n-gram order")

    p_fit = sub.add_parser("fit", help="fit the decay law to a curve CSV")
    p_fit.add_argument("curve", type=Path)
    p_fit.add_argument("--out", type=Path, default=None)

    p_heatmap = sub.add_parser("heatmap", help="pair-accuracy matrix from runs")
    p_heatmap.add_argument("runs", nargs="+", type=Path)
    p_heatmap.add_argument("--out", required=True, type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return int(exc.code or 0)
    try:
        if args.command == "run":
            config = load_experiment_config(args.config)
            if args.out is not None:
                config.output_dir = args.out
            _, all_complete = cmd_run(config, jobs=args.jobs, topology=args.topology)
            return 0 if all_complete else 2
        if args.command == "analyze":
            cmd_analyze(args.runs, args.out, groups=args.groups)
            return 0
        if args.command == "score":
            cmd_score(args.candidate, args.reference, n_max=args.nmax)
            return 0
        if args.command == "fit":
            cmd_fit(args.curve, out=args.out)
            return 0
        if args.command == "heatmap":
            cmd_heatmap(args.runs, args.out)
            return 0
        raise UsageError(f"unknown command {args.command!r}")
    except (UsageError, CatalogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except (DataIntegrityError, CacheIntegrityError) as exc:
        print(f"data integrity error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
