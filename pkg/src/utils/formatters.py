"""
formatters.py

This file turns evaluation records into documents: the CSV / JSON / SVG
renderings of a report, the result tables of a run, the training-history
CSV, and the markdown shown to MCP clients.

Every renderer is deterministic: the same record always yields the same
bytes. Confusion matrices are always rendered with rows = true class and
columns = predicted class, and say so in the document.
"""
import csv
import io
from collections.abc import Iterable
from enum import Enum
from xml.sax.saxutils import escape

from src.errors import ConfigurationError
from src.models.experiment import (
    PUBLISHED_KNN_VALIDATION,
    PUBLISHED_TARGETS,
    ComparisonRow,
    HyperparameterGap,
    KnnSweepSection,
    RunArtifact,
    SvmKernelRun,
)
from src.models.mlp import TrainingHistory
from src.models.report import UNDEFINED, EvalReport
from src.models.sample import ActivityLabel, DatasetSummary

ORIENTATION = 'rows = true class, columns = predicted class'

_CELL = 64
_LEFT = 190
_TOP = 70
_LIGHT = (247, 251, 255)
_DARK = (8, 48, 107)


class ReportFormat(str, Enum):
    CSV = 'csv'
    JSON = 'json'
    SVG = 'svg'


def render_report(report: EvalReport, output_format: ReportFormat | str) -> str:
    """
    Render a report as CSV, JSON or an SVG heat map.

    Raises:
        ConfigurationError: unknown format tag
    """
    try:
        output_format = ReportFormat(output_format)
    except ValueError as error:
        raise ConfigurationError(f"unsupported report format: {output_format!r} (use csv, json or svg)") from error
    if output_format is ReportFormat.JSON:
        return report.model_dump_json(indent=2) + '\n'
    if output_format is ReportFormat.CSV:
        return _report_csv(report)
    return _report_svg(report)


def _write_csv(rows: Iterable[Iterable]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerows(rows)
    return buffer.getvalue()


def _ratio(value: float | None) -> str:
    return UNDEFINED if value is None else f'{value:.6f}'


def _report_csv(report: EvalReport) -> str:
    names = [label.name for label in ActivityLabel]
    rows: list[list] = [
        ['# format_version', report.format_version],
        ['# model', report.model_tag],
        ['# split', report.split_tag],
        ['# accuracy', f'{report.accuracy:.6f}'],
        ['# orientation', ORIENTATION],
        ['true\\predicted', *names],
    ]
    for label, counts in zip(names, report.confusion.counts.tolist()):
        rows.append([label, *counts])
    rows.append([])
    rows.append(['class', 'precision', 'recall', 'support'])
    for entry in report.per_class:
        rows.append([entry.label.name, _ratio(entry.precision), _ratio(entry.recall), entry.support])
    return _write_csv(rows)


def _shade(fraction: float) -> str:
    channels = (round(light + (dark - light) * fraction) for light, dark in zip(_LIGHT, _DARK))
    return 'rgb({},{},{})'.format(*channels)


def _report_svg(report: EvalReport) -> str:
    """Heat map colored by row-normalized frequency, annotated with counts"""
    counts = report.confusion.counts.tolist()
    size = len(counts)
    width = _LEFT + size * _CELL + 20
    height = _TOP + size * _CELL + 150
    title = escape(f'{report.model_tag} on {report.split_tag}: accuracy {report.accuracy_percent:.2f} %')
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<title>{title}</title>',
        f'<text x="{_LEFT}" y="24" font-size="14">{title}</text>',
        f'<text x="{_LEFT}" y="44">{ORIENTATION}</text>',
    ]
    for row, row_counts in enumerate(counts):
        total = sum(row_counts)
        y = _TOP + row * _CELL
        parts.append(f'<text x="{_LEFT - 8}" y="{y + _CELL // 2 + 4}" text-anchor="end">'
                     f'{ActivityLabel(row + 1).name}</text>')
        for column, count in enumerate(row_counts):
            fraction = count / total if total else 0.0
            x = _LEFT + column * _CELL
            ink = 'white' if fraction > 0.5 else 'black'
            parts.append(f'<rect x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" fill="{_shade(fraction)}" '
                         f'stroke="white" data-true="{row + 1}" data-predicted="{column + 1}"/>')
            parts.append(f'<text x="{x + _CELL // 2}" y="{y + _CELL // 2 + 4}" text-anchor="middle" '
                         f'fill="{ink}">{count}</text>')
    label_y = _TOP + size * _CELL + 8
    for column in range(size):
        x = _LEFT + column * _CELL + _CELL // 2
        parts.append(f'<text x="{x}" y="{label_y}" text-anchor="end" '
                     f'transform="rotate(-45 {x} {label_y})">{ActivityLabel(column + 1).name}</text>')
    parts.append(f'<text x="{_LEFT + size * _CELL // 2}" y="{height - 10}" text-anchor="middle">'
                 f'predicted class</text>')
    parts.append(f'<text x="14" y="{_TOP + size * _CELL // 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {_TOP + size * _CELL // 2})">true class</text>')
    parts.append('</svg>')
    return '\n'.join(parts) + '\n'


def knn_table_csv(section: KnnSweepSection) -> str:
    """K against validation accuracy, with the published value for each K"""
    rows: list[list] = [['k', 'validation_accuracy_percent', 'published_validation_percent']]
    for k in sorted(section.validation):
        published = PUBLISHED_KNN_VALIDATION.get(k)
        rows.append([k, f'{section.validation[k].accuracy_percent:.2f}',
                     '' if published is None else f'{published:.2f}'])
    return _write_csv(rows)


def svm_table_csv(runs: list[SvmKernelRun]) -> str:
    rows: list[list] = [['kernel', 'parameters', 'test_accuracy_percent', 'published_percent',
                         'converged_machines', 'machines', 'max_kkt_violation']]
    for run in runs:
        target = PUBLISHED_TARGETS.get(run.model_tag)
        rows.append([
            run.kernel.tag,
            run.kernel.describe(),
            f'{run.report.accuracy_percent:.2f}',
            '' if target is None else f'{target.accuracy_percent:.2f}',
            sum(machine.converged for machine in run.machines),
            len(run.machines),
            f'{max((m.max_kkt_violation for m in run.machines), default=0.0):.3e}',
        ])
    return _write_csv(rows)


def comparison_table_csv(rows: list[ComparisonRow]) -> str:
    table: list[list] = [['model', 'accuracy_percent', 'published_percent', 'delta_pp', 'band_pp', 'within_band']]
    for row in rows:
        table.append([row.label, f'{row.accuracy_percent:.2f}', f'{row.published_percent:.2f}',
                      f'{row.delta_pp:+.2f}', f'{row.band_pp:.1f}', 'yes' if row.within_band else 'no'])
    return _write_csv(table)


def history_csv(history: TrainingHistory) -> str:
    rows: list[list] = [['epoch', 'train_loss', 'val_accuracy']]
    rows.extend([record.epoch, f'{record.train_loss:.10f}', f'{record.val_accuracy:.6f}']
                for record in history.records)
    return _write_csv(rows)


def hyperparameter_gaps_markdown(gaps: list[HyperparameterGap]) -> str:
    """Report of every model that missed its published band"""
    if not gaps:
        return '# Hyperparameter gaps\n\nEvery model landed within its published band.\n'
    sections = ['# Hyperparameter gaps', '']
    for gap in gaps:
        sections.append(f'## {gap.label}')
        sections.append('')
        sections.append(f'Measured {gap.accuracy_percent:.2f} %, published {gap.published_percent:.2f} % '
                        f'(band +-{gap.band_pp:.1f} pp).')
        if gap.reconstructed:
            sections.append('The kernel hyperparameters of this model are not published; '
                            'the values below are reconstructed defaults.')
        sections.append('')
        sections.extend(f'- {name}: {value}' for name, value in gap.parameters.items())
        sections.append('')
    return '\n'.join(sections)


def format_report(report: EvalReport) -> str:
    """Markdown summary of one report"""
    lines = [
        f'## {report.model_tag} on {report.split_tag}',
        '',
        f'Accuracy: {report.accuracy_percent:.2f} % ({report.confusion.correct}/{report.total})',
        '',
        '| class | precision | recall | support |',
        '|---|---|---|---|',
    ]
    lines.extend(f'| {entry.label.name} | {_ratio(entry.precision)} | {_ratio(entry.recall)} | {entry.support} |'
                 for entry in report.per_class)
    return '\n'.join(lines)


def format_dataset_summary(summary: DatasetSummary) -> str:
    names = [label.name for label in ActivityLabel]
    lines = [
        f'# Dataset ({summary.feature_count} features, split seed {summary.split_seed})',
        '',
        f'Protocol: {summary.protocol_tag}',
        '',
        '| partition | size | subjects | ' + ' | '.join(names) + ' |',
        '|---|---|---|' + '---|' * len(names),
    ]
    for name, part in summary.partitions.items():
        counts = ' | '.join(str(part.histogram.get(label, 0)) for label in names)
        lines.append(f'| {name} | {part.size} | {len(part.subjects)} | {counts} |')
    return '\n'.join(lines)


def format_artifact(artifact: RunArtifact) -> str:
    """Markdown overview of a run: comparison, ranking, gaps and failures"""
    lines = [f'# Results (seed {artifact.config.seed})', '']
    if artifact.comparison:
        lines += ['| model | accuracy % | published % | delta pp | in band |', '|---|---|---|---|---|']
        lines += [f'| {row.label} | {row.accuracy_percent:.2f} | {row.published_percent:.2f} | '
                  f'{row.delta_pp:+.2f} | {"yes" if row.within_band else "no"} |' for row in artifact.comparison]
        lines.append('')
    else:
        lines += ['No model results.', '']
    if artifact.ranking is not None:
        lines.append(f'Top model: {artifact.ranking.top_model}; bottom model: {artifact.ranking.bottom_model}')
        lines.append('')
    if artifact.hyperparameter_gaps:
        lines.append('Outside the published band: ' + ', '.join(gap.label for gap in artifact.hyperparameter_gaps))
        lines.append('')
    for failure in artifact.failures:
        lines.append(f'FAILED {failure.experiment}/{failure.model_tag}: {failure.error_type}: {failure.message}')
    if artifact.timings:
        lines.append('Timings: ' + ', '.join(f'{tag} {seconds:.1f}s' for tag, seconds in artifact.timings.items()))
    return '\n'.join(lines).rstrip() + '\n'


def create_success_response(message: str) -> dict:
    """
    Create success response for MCP tool calls

    Args:
        message: The success message to include

    Returns:
        A properly formatted MCP response object
    """
    return {
        "content": [
            {
                "type": "text",
                "text": message,
            },
        ],
    }


def create_error_response(message: str) -> dict:
    """
    Create error response for MCP tool calls

    It includes the isError flag to indicate failure.
    """
    return {
        "content": [
            {
                "type": "text",
                "text": message,
            },
        ],
        "isError": True,
    }
