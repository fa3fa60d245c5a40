import asyncio

import server
from src.services.experiment_service import ARTIFACT_FILE


def call(tool_name, arguments=None) -> str:
    content = asyncio.run(server.handle_tool_call(tool_name, arguments))
    assert len(content) == 1
    return content[0].text


def test_lists_every_tool():
    tools = asyncio.run(server.list_tools_handler())
    assert [tool.name for tool in tools] == ['summarize-data', 'run-experiments', 'render-artifact', 'show-results']


def test_summarize_data(synthetic_root):
    text = call('summarize-data', {'datasetRoot': str(synthetic_root), 'seed': 5})
    assert text.startswith('# Dataset (561 features, split seed 5)')


def test_errors_come_back_as_text(tmp_path):
    assert call('no-such-tool', {}) == 'Unknown tool: no-such-tool'
    assert call('summarize-data', {'datasetRoot': str(tmp_path / 'nowhere')}).startswith(
        'Failed to summarize dataset')
    assert call('run-experiments', {'experiments': []}).startswith('Failed to run experiments')
    assert call('render-artifact', {}).startswith('Failed to render artifact')


def test_run_render_and_show(synthetic_root, tmp_path):
    out = tmp_path / 'results'
    text = call('run-experiments', {
        'experiments': ['knn_sweep', 'naive_bayes'],
        'datasetRoot': str(synthetic_root),
        'outputDirectory': str(out),
        'overrides': {'knn_k_values': '1,3,5', 'seed': 1},
    })
    assert text.startswith(f'Results written to {out}')
    # explicit arguments win over overrides
    assert '# Results (seed 42)' in text
    assert (out / ARTIFACT_FILE).is_file()

    rendered = call('render-artifact', {'artifactPath': str(out / ARTIFACT_FILE),
                                        'outputDirectory': str(tmp_path / 'again')})
    assert rendered.startswith('Rendered ')
    assert (tmp_path / 'again' / 'table_knn.csv').is_file()

    shown = call('show-results', {'artifactPath': str(out), 'modelTag': 'naive_bayes'})
    assert '# Results (seed 42)' in shown
    assert 'Accuracy:' in shown

    missing = call('show-results', {'artifactPath': str(out), 'modelTag': 'svm_linear'})
    assert missing.startswith('Failed to read results')
    assert 'knn' in missing
