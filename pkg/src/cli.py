"""
cli.py

Command-line entry point (`har-bench`).

    har-bench summarize-data [--dataset-root DIR] [--seed N] [--out FILE]
    har-bench run [--experiments LIST] [--seed N] [--dataset-root DIR] [--out DIR]
                  [--config FILE] [--workers N] [--from-artifact FILE]
                  [--save-models] [--no-progress]
    har-bench render ARTIFACT [--out DIR]
    har-bench fetch [--url URL] [--dest DIR] [--force]

Exit status: 0 on success, 1 on a handled error, 2 on bad usage.
"""
import argparse
import logging
import sys
from pathlib import Path

from src import __version__
from src.config import Config, configure_logging, ensure_output_folder
from src.errors import ConfigurationError, HarError
from src.services.dataset_service import dataset_service
from src.services.experiment_service import experiment_service
from src.utils.files import atomic_write_text
from src.utils.formatters import format_artifact, format_dataset_summary

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='har-bench',
                                     description='Benchmark classical classifiers on the UCI HAR smartphone dataset')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR (default: HAR_LOG_LEVEL)')
    commands = parser.add_subparsers(dest='command', required=True)

    summarize = commands.add_parser('summarize-data', help='partition sizes and class histograms')
    summarize.add_argument('--dataset-root', type=Path, default=None)
    summarize.add_argument('--seed', type=int, default=42)
    summarize.add_argument('--out', type=Path, default=None, help='write the JSON summary here')

    run = commands.add_parser('run', help='train and evaluate the selected models')
    run.add_argument('--experiments', default=None,
                     help='comma-separated: knn_sweep, svm_kernels, naive_bayes, mlp, mlp_search, all')
    run.add_argument('--seed', type=int, default=None)
    run.add_argument('--dataset-root', type=Path, default=None)
    run.add_argument('--out', type=Path, default=None, help='output directory')
    run.add_argument('--config', type=Path, default=None, help='key=value experiment file')
    run.add_argument('--workers', type=int, default=None, help='processes for the pairwise SVM machines')
    run.add_argument('--from-artifact', type=Path, default=None,
                     help='start from the configuration embedded in an earlier artifact.json')
    run.add_argument('--save-models', action='store_true', default=None)
    run.add_argument('--no-progress', action='store_true')

    render = commands.add_parser('render', help='regenerate tables and figures from artifact.json')
    render.add_argument('artifact', type=Path)
    render.add_argument('--out', type=Path, default=None)

    fetch = commands.add_parser('fetch', help='download and unpack the dataset archive')
    fetch.add_argument('--url', default=None, help='archive URL (default: HAR_DATASET_URL)')
    fetch.add_argument('--dest', type=Path, default=None, help='target directory (default: HAR_DATASET_ROOT)')
    fetch.add_argument('--force', action='store_true')
    return parser


def _summarize(args: argparse.Namespace) -> int:
    root = args.dataset_root or Config().dataset.root
    summary = experiment_service.summarize_data(root, args.seed)
    if args.out is not None:
        atomic_write_text(args.out, summary.model_dump_json(indent=2) + '\n')
    print(format_dataset_summary(summary))
    return 0


def _run(args: argparse.Namespace) -> int:
    base = experiment_service.load_artifact(args.from_artifact).config if args.from_artifact else None
    experiment_config = experiment_service.build_config(
        config_file=args.config,
        base=base,
        experiments=args.experiments,
        seed=args.seed,
        dataset_root=args.dataset_root,
        output_directory=args.out,
        workers=args.workers,
        save_models=args.save_models,
        show_progress=False if args.no_progress else None,
    )
    ensure_output_folder(experiment_config.output_directory)
    artifact = experiment_service.run(experiment_config)
    experiment_service.write_outputs(artifact, experiment_config.output_directory)
    print(format_artifact(artifact), end='')
    return 1 if artifact.failures else 0


def _render(args: argparse.Namespace) -> int:
    written = experiment_service.render(args.artifact, args.out)
    for path in written:
        print(path)
    return 0


def _fetch(args: argparse.Namespace) -> int:
    environment = Config()
    destination = args.dest or environment.dataset.root
    if destination is None:
        raise ConfigurationError("no destination: pass --dest or set HAR_DATASET_ROOT")
    root = dataset_service.fetch(args.url or environment.dataset.url, destination, force=args.force)
    print(root)
    return 0


_COMMANDS = {
    'summarize-data': _summarize,
    'run': _run,
    'render': _render,
    'fetch': _fetch,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
        return _COMMANDS[args.command](args)
    except HarError as error:
        logger.error("%s: %s", type(error).__name__, error)
        return 1


if __name__ == '__main__':
    sys.exit(main())
