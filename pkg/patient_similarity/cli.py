"""
Command-Line Interface

Subcommands:
    gen      seeded synthetic records with planted groups
    dist     normalised distance matrix for one metric
    cluster  k-cluster partition, cluster summary and 2-D embedding
    compare  the seven-column cross-metric table for selected pairs
    sweep    pq-gram distance statistics over a grid of p and q
    runs     list, show or delete recorded runs

Usage:
    python -m patient_similarity gen --n-patients 60 --n-codes 12 --n-groups 3 --out data
    python -m patient_similarity dist --input data/records.csv --metric pqgram --p 1 --q 3 --out results
    python -m patient_similarity cluster --input data/records.csv --metric ted --k 3 --restarts 10
    python -m patient_similarity compare --input data/records.csv --smallest 16
    python -m patient_similarity runs --out results --show 1a2b3c4d

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple
import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

# Try to import rich for better formatting
try:
    from rich.console import Console
    from rich.table import Table
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

from .clustering import (
    METHODS, adjusted_rand, consensus_partition, embed_2d, embedding_frame,
    pair_cluster_frame, partition_frame, read_groups, summarize_clusters, summary_frame,
)
from .config import Config, RunConfig, get_config
from .distance_matrix import (
    METRIC_NAMES, NORMALIZATION_MODES, DistanceMatrix, MetricSpec, comparison_metrics,
    cross_metric_report, distance_matrices, metric_axiom_report, minmax_normalize,
    read_matrix_csv, shared_events_report, smallest_pairs,
)
from .errors import ParameterError, PatientSimilarityError
from .ingestion import PatientDataset, build_frequency_table, load_code_descriptions, load_records
from .library import RunLibrary
from .synthetic import generate_records, write_synthetic

logger = logging.getLogger(__name__)

DEFAULT_SMALLEST = 16
RAW_SUFFIX = '_raw'
EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE_ERROR = 2


# ========================================
# Output helpers
# ========================================

def write_csv(frame: pd.DataFrame, path: str, index: bool = False) -> str:
    """Fixed 6-decimal floats and \\n line endings so reruns are byte-identical"""
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    frame.to_csv(path, index=index, float_format='%.6f', lineterminator='\n')
    return path


def print_table(title: str, columns: Sequence[str], rows: Sequence[Sequence]):
    """Print a table with rich when available"""
    if RICH_AVAILABLE:
        table = Table(title=title)
        for column in columns:
            table.add_column(str(column))
        for row in rows:
            table.add_row(*[_cell(value) for value in row])
        Console().print(table)
    else:
        print(f"\n=== {title} ===")
        print("  ".join(str(c) for c in columns))
        for row in rows:
            print("  ".join(_cell(value) for value in row))


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.6f}"
    return str(value)


def matrix_filename(metric: MetricSpec, mode: str) -> str:
    """distances_<tag>.csv, or distances_<tag>_raw.csv when nothing was normalised"""
    suffix = RAW_SUFFIX if mode == 'none' else ''
    return f"distances_{metric.tag}{suffix}.csv"


def _ensure_folder(folder: str):
    if folder:
        os.makedirs(folder, exist_ok=True)


def _error(message: str):
    print(f"[ERROR] {message}", file=sys.stderr)


# ========================================
# Shared steps
# ========================================

def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Collect the per-run flags; raises ParameterError when they do not validate"""
    run = RunConfig(**{k: v for k, v in vars(args).items()
                       if k in RunConfig.__dataclass_fields__ and v is not None})
    is_valid, errors = run.validate()
    if not is_valid:
        raise ParameterError("; ".join(errors))
    return run


def _load(run: RunConfig) -> PatientDataset:
    if not run.input:
        raise ParameterError("--input is required")
    if not os.path.exists(run.input):
        raise FileNotFoundError(run.input)
    return load_records(run.input, strict=run.strict)


def _library_folder(config: Config, out: str) -> str:
    return config.storage.library_folder or os.path.join(out, 'library')


def _record(args: argparse.Namespace, config: Config, command: str, parameters: Dict, outputs: List[str]):
    if not getattr(args, 'record', False):
        return
    entry = RunLibrary(_library_folder(config, args.out)).save_run(command, parameters, outputs)
    print(f"[OK] recorded run {entry['id']}")


# ========================================
# Commands
# ========================================

def cmd_gen(args: argparse.Namespace, config: Config) -> int:
    """Write synthetic records and their planted groups"""
    records, groups = generate_records(args.n_patients, args.n_codes, args.n_groups, seed=args.seed)
    path = os.path.join(args.out, args.filename)
    try:
        records_path, groups_path = write_synthetic(records, groups, path)
    except OSError as e:
        raise PatientSimilarityError(f"cannot write {path}: {e.strerror or e}")

    print(f"[OK] {len(groups)} patients, {len(records)} events -> {records_path}")
    print(f"[OK] planted groups -> {groups_path}")
    _record(args, config, 'gen', {
        'n_patients': args.n_patients, 'n_codes': args.n_codes,
        'n_groups': args.n_groups, 'seed': args.seed, 'out': args.out,
    }, [records_path, groups_path])
    return EXIT_OK


def cmd_dist(args: argparse.Namespace, config: Config) -> int:
    """Normalised distance matrix for one metric"""
    run = run_config_from_args(args)
    metric = run.metric_spec()
    dataset = _load(run)

    raw, normalized = distance_matrices(dataset, metric, mode=run.normalize, workers=run.workers)
    _ensure_folder(run.out)
    path = normalized.to_csv(os.path.join(run.out, matrix_filename(metric, run.normalize)))

    off = raw.off_diagonal()
    print_table('Distance matrix', ['patients', 'metric', 'normalization', 'min raw', 'max raw'], [
        [raw.n, str(metric), run.normalize, float(off.min()), float(off.max())],
    ])

    if args.check_axioms:
        report = metric_axiom_report(normalized)
        print_table('Metric axioms', list(report), [list(report.values())])

    print(f"[OK] matrix -> {path}")
    _record(args, config, 'dist', run.to_dict(), [path])
    return EXIT_OK


def _cluster_matrix(args: argparse.Namespace, run: RunConfig, metric: MetricSpec) -> Tuple[DistanceMatrix, Optional[PatientDataset]]:
    if args.matrix:
        if not os.path.exists(args.matrix):
            raise FileNotFoundError(args.matrix)
        try:
            matrix = read_matrix_csv(args.matrix, metric=metric)
        except (ValueError, pd.errors.ParserError) as e:
            raise PatientSimilarityError(f"{args.matrix}: {e}")
        if run.normalize == 'none':
            return matrix, None
        # native: a dist file without the raw suffix already holds normalised values
        is_raw = os.path.basename(args.matrix).endswith(RAW_SUFFIX + '.csv')
        if run.normalize == 'native' and not is_raw and matrix.n and matrix.values.max() <= 1:
            matrix = DistanceMatrix(ids=matrix.ids, values=matrix.values, metric=metric, normalized=True)
        return minmax_normalize(matrix), None

    dataset = _load(run)
    _, normalized = distance_matrices(dataset, metric, mode=run.normalize, workers=run.workers)
    return normalized, dataset


def cmd_cluster(args: argparse.Namespace, config: Config) -> int:
    """Consensus partition, cluster summary and embedding"""
    run = run_config_from_args(args)
    if args.smallest is not None and args.smallest < 1:
        raise ParameterError(f"--smallest must be positive, got {args.smallest}")
    metric = run.metric_spec()
    matrix, dataset = _cluster_matrix(args, run, metric)

    features = None
    if run.method == 'kmeans' and dataset is not None and not metric.is_tree:
        features = build_frequency_table(dataset).values

    partition = consensus_partition(matrix, run.k, restarts=run.restarts, base_seed=run.seed,
                                    method=run.method, features=features)
    summary = summarize_clusters(partition, matrix)
    coords = embed_2d(matrix)

    _ensure_folder(run.out)
    outputs = [
        write_csv(partition_frame(partition, summary), os.path.join(run.out, f"partition_{metric.tag}.csv")),
        write_csv(summary_frame(summary), os.path.join(run.out, f"summary_{metric.tag}.csv")),
        write_csv(embedding_frame(partition, coords), os.path.join(run.out, f"embedding_{metric.tag}.csv")),
    ]

    if args.smallest is not None:
        pairs = pair_cluster_frame(partition, summary, smallest_pairs(matrix, args.smallest))
        outputs.append(write_csv(pairs, os.path.join(run.out, f"pairs_clusters_{metric.tag}.csv")))
        print(f"{int(pairs['same_cluster'].sum())}/{len(pairs)} closest pairs share a cluster")

    print_table(f"Clusters ({metric}, k={run.k})", ['cluster', 'role', 'count', 'mean distance'], [
        [c, summary.role_of(c), summary.counts[c - 1], summary.means[c - 1]]
        for c in range(1, partition.k + 1)
    ])

    if args.truth:
        if not os.path.exists(args.truth):
            raise FileNotFoundError(args.truth)
        score = adjusted_rand(partition, read_groups(args.truth))
        print(f"Adjusted Rand index vs {args.truth}: {score:.6f}")

    for path in outputs:
        print(f"[OK] {path}")
    _record(args, config, 'cluster', dict(run.to_dict(), matrix=args.matrix), outputs)
    return EXIT_OK


def _parse_pair(text: str) -> Tuple[str, str]:
    parts = [part.strip() for part in text.split(',')]
    if len(parts) != 2 or not all(parts):
        raise ParameterError(f"--pair expects A,B, got {text!r}")
    return parts[0], parts[1]


def _read_pairs(path: str) -> List[Tuple[str, str]]:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if frame.shape[1] < 2:
        raise ParameterError(f"{path}: expected two id columns")
    if 'patient_a' in frame.columns and 'patient_b' in frame.columns:
        frame = frame[['patient_a', 'patient_b']]
    return [(str(a).strip(), str(b).strip()) for a, b in frame.iloc[:, :2].itertuples(index=False)]


def _rank_metric(name: str, metrics: Sequence[MetricSpec]) -> MetricSpec:
    for metric in metrics:
        if name in (metric.tag, metric.name):
            return metric
    choices = ', '.join(m.tag for m in metrics)
    raise ParameterError(f"--rank-by must be one of {choices}, got {name!r}")


def cmd_compare(args: argparse.Namespace, config: Config) -> int:
    """Seven-column normalised distance table for selected pairs"""
    run = run_config_from_args(args)
    dataset = _load(run)
    metrics = comparison_metrics()

    pairs = [_parse_pair(text) for text in (args.pair or [])]
    if args.pairs:
        pairs.extend(_read_pairs(args.pairs))
    for first, second in pairs:
        dataset.get(first)
        dataset.get(second)

    matrices: Dict[str, DistanceMatrix] = {}
    for metric in metrics:
        matrices[metric.column] = distance_matrices(dataset, metric, mode=run.normalize, workers=run.workers)[1]

    if args.smallest is not None or not pairs:
        limit = DEFAULT_SMALLEST if args.smallest is None else args.smallest
        ranked = matrices[_rank_metric(args.rank_by, metrics).column]
        pairs.extend((a, b) for a, b, _ in smallest_pairs(ranked, limit))

    report = cross_metric_report(matrices, pairs)
    descriptions = load_code_descriptions(args.descriptions) if args.descriptions else None
    events = shared_events_report(dataset, pairs, descriptions)

    _ensure_folder(run.out)
    outputs = [
        write_csv(report, os.path.join(run.out, 'compare.csv')),
        write_csv(events, os.path.join(run.out, 'shared_events.csv')),
    ]

    print_table('Normalised distances', list(report.columns), report.values.tolist())
    for path in outputs:
        print(f"[OK] {path}")
    _record(args, config, 'compare', dict(run.to_dict(), pairs=[list(p) for p in pairs]), outputs)
    return EXIT_OK


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ParameterError(f"expected comma separated integers, got {text!r}")
    if not values:
        raise ParameterError("expected at least one value")
    return values


def cmd_sweep(args: argparse.Namespace, config: Config) -> int:
    """pq-gram distance statistics for every (p, q) in the grid"""
    run = run_config_from_args(args)
    p_values, q_values = _int_list(args.p_values), _int_list(args.q_values)
    specs = [MetricSpec('pqgram', p=p, q=q) for p in p_values for q in q_values]
    dataset = _load(run)

    rows = []
    for metric in specs:
        matrix = distance_matrices(dataset, metric, mode=run.normalize, workers=run.workers)[1]
        off = matrix.off_diagonal()
        closest = smallest_pairs(matrix, 1)[0]
        rows.append({
            'p': metric.p,
            'q': metric.q,
            'mean': float(off.mean()),
            'median': float(np.median(off)),
            'min_pair': f"{closest[0]}|{closest[1]}",
            'zero_pairs': int(np.count_nonzero(off == 0)),
        })

    frame = pd.DataFrame(rows, columns=['p', 'q', 'mean', 'median', 'min_pair', 'zero_pairs'])
    _ensure_folder(run.out)
    path = write_csv(frame, os.path.join(run.out, 'pq_sweep.csv'))
    print_table('pq-gram sweep', list(frame.columns), frame.values.tolist())
    print(f"[OK] {path}")
    _record(args, config, 'sweep', dict(run.to_dict(), p_values=p_values, q_values=q_values), [path])
    return EXIT_OK


def cmd_runs(args: argparse.Namespace, config: Config) -> int:
    """List, show or delete recorded runs"""
    folder = _library_folder(config, args.out)
    if not os.path.isdir(folder):
        if args.show or args.delete:
            raise PatientSimilarityError(f"no run library at {folder}")
        print(f"No runs recorded in {folder}")
        return EXIT_OK
    library = RunLibrary(folder)

    if args.show:
        entry = library.get_run(args.show)
        if entry is None:
            raise PatientSimilarityError(f"unknown run id: {args.show}")
        print(json.dumps(entry, indent=2, ensure_ascii=False))
        return EXIT_OK

    if args.delete:
        if not library.delete_run(args.delete):
            raise PatientSimilarityError(f"unknown run id: {args.delete}")
        print(f"[OK] deleted run {args.delete}")
        return EXIT_OK

    runs = library.list_runs()
    if not runs:
        print(f"No runs recorded in {folder}")
        return EXIT_OK
    print_table(f"Runs in {folder}", ['id', 'command', 'created', 'outputs'], [
        [entry['id'], entry['command'], entry['created_at'], entry['output_count']] for entry in runs
    ])
    return EXIT_OK


# ========================================
# Parser
# ========================================

def build_parser(config: Config) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='patient_similarity',
        description='Patient similarity from event records: tree and vector distances, clustering',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    python -m patient_similarity gen --n-patients 60 --n-groups 3 --out data
    python -m patient_similarity dist --input data/records.csv --metric pqgram --p 2 --q 3
    python -m patient_similarity cluster --input data/records.csv --metric euclidean --truth data/records_groups.csv
    python -m patient_similarity compare --input data/records.csv --pair P00001,P00004
    python -m patient_similarity runs --out results
        """
    )
    parser.add_argument('--env-file', default=None, help='Path to .env file')
    parser.add_argument('--verbose', action='store_true', help='Log at DEBUG level')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=config.compute.seed, help='RNG seed (default: %(default)s)')
    common.add_argument('--out', default=config.storage.output_folder, help='Output directory (default: %(default)s)')
    common.add_argument('--record', action='store_true',
                        help='Record the run in the run library (<out>/library unless PS_LIBRARY_FOLDER is set)')

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument('--input', help='Event records (.csv, .xlsx or .ods)')
    strictness = data.add_mutually_exclusive_group()
    strictness.add_argument('--strict', dest='strict', action='store_true', default=True,
                            help='Abort on the first invalid row (default)')
    strictness.add_argument('--lenient', dest='strict', action='store_false',
                            help='Skip invalid rows and report how many were skipped')
    data.add_argument('--normalize', choices=NORMALIZATION_MODES, default='native',
                      help='native: pq-gram/edit distance own normalisation, min-max otherwise (default)')
    data.add_argument('--workers', type=int, default=config.compute.workers,
                      help='Processes for tree metrics (default: %(default)s)')

    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument('--metric', choices=METRIC_NAMES, default='euclidean', help='Distance metric')
    metric.add_argument('--p', type=float, default=None, help='Minkowski exponent (default 3) or pq-gram stem length (default 1)')
    metric.add_argument('--q', type=int, default=None, help='pq-gram base length (default 3)')

    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    gen = commands.add_parser('gen', parents=[common], help='Generate synthetic records')
    gen.add_argument('--n-patients', type=int, default=60)
    gen.add_argument('--n-codes', type=int, default=12)
    gen.add_argument('--n-groups', '--planted', dest='n_groups', type=int, default=3)
    gen.add_argument('--filename', default='records.csv', help='Records file name inside --out')
    gen.set_defaults(handler=cmd_gen)

    dist = commands.add_parser('dist', parents=[common, data, metric], help='Distance matrix for one metric')
    dist.add_argument('--check-axioms', action='store_true', help='Report metric axiom violations')
    dist.set_defaults(handler=cmd_dist)

    cluster = commands.add_parser('cluster', parents=[common, data, metric], help='Cluster patients')
    cluster.add_argument('--k', type=int, default=3, help='Number of clusters (default: %(default)s)')
    cluster.add_argument('--restarts', type=int, default=10, help='Seeded restarts for the majority vote')
    cluster.add_argument('--method', choices=METHODS, default='kmedoids')
    cluster.add_argument('--matrix', default=None, help='Reuse a matrix CSV written by dist')
    cluster.add_argument('--truth', default=None, help='patient_id,group CSV to score with the adjusted Rand index')
    cluster.add_argument('--smallest', type=int, default=None,
                         help='Report the cluster of both patients of the N closest pairs')
    cluster.set_defaults(handler=cmd_cluster)

    compare = commands.add_parser('compare', parents=[common, data], help='Cross-metric table for pairs')
    compare.add_argument('--pair', action='append', help='Patient pair A,B (repeatable)')
    compare.add_argument('--pairs', default=None, help='CSV of pairs (patient_a,patient_b)')
    compare.add_argument('--smallest', type=int, default=None, help=f'Add the N closest pairs (default {DEFAULT_SMALLEST} when no pairs are given)')
    compare.add_argument('--rank-by', default='euclidean', help='Metric tag ranking --smallest (e.g. ted, pqgram_p1_q3)')
    compare.add_argument('--descriptions', default=None, help='code,description lookup for shared events')
    compare.set_defaults(handler=cmd_compare)

    sweep = commands.add_parser('sweep', parents=[common, data], help='pq-gram statistics over p and q')
    sweep.add_argument('--p-values', default='1,2,3')
    sweep.add_argument('--q-values', default='1,2,3')
    sweep.set_defaults(handler=cmd_sweep, metric='pqgram')

    runs = commands.add_parser('runs', help='List, show or delete recorded runs')
    runs.add_argument('--out', default=config.storage.output_folder,
                      help='Output directory whose library to read (default: %(default)s)')
    action = runs.add_mutually_exclusive_group()
    action.add_argument('--show', metavar='ID', default=None, help='Print one run record')
    action.add_argument('--delete', metavar='ID', default=None, help='Remove one run record')
    runs.set_defaults(handler=cmd_runs)

    return parser


def _env_file(argv: Sequence[str]) -> Optional[str]:
    for i, arg in enumerate(argv):
        if arg == '--env-file' and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith('--env-file='):
            return arg.split('=', 1)[1]
    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command, return the exit code"""
    argv = list(sys.argv[1:] if argv is None else argv)

    try:
        config = get_config(_env_file(argv))
        is_valid, errors = config.validate()
        if not is_valid:
            raise ParameterError("; ".join(errors))
        parser = build_parser(config)
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE_ERROR if e.code else EXIT_OK
    except ParameterError as e:
        _error(e.message)
        return EXIT_USAGE_ERROR

    level = logging.DEBUG if args.verbose else getattr(logging, config.compute.log_level.upper())
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    handler: Callable[[argparse.Namespace, Config], int] = args.handler
    try:
        return handler(args, config)
    except FileNotFoundError as e:
        _error(f"file not found: {e.filename or e}")
        return EXIT_USAGE_ERROR
    except ParameterError as e:
        _error(e.message)
        return EXIT_USAGE_ERROR
    except PatientSimilarityError as e:
        _error(e.message)
        return EXIT_DATA_ERROR
    except OSError as e:
        _error(f"cannot write output: {e}")
        return EXIT_DATA_ERROR


if __name__ == '__main__':
    sys.exit(main())
