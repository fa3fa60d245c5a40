import json

import pytest

from src.cli import main
from src.services.experiment_service import ARTIFACT_FILE

QUICK = ('knn_k_values = 1,3,5\n'
         'svm_kernels = linear\n'
         'mlp_hidden_layers = 8\n'
         'mlp_epochs = 3\n'
         'mlp_seed_count = 1\n')


@pytest.fixture
def quick_file(tmp_path):
    path = tmp_path / 'quick.cfg'
    path.write_text(QUICK)
    return path


def test_summarize_data(synthetic_root, tmp_path, capsys):
    out = tmp_path / 'summary.json'
    assert main(['summarize-data', '--dataset-root', str(synthetic_root), '--seed', '3', '--out', str(out)]) == 0
    assert 'split seed 3' in capsys.readouterr().out
    summary = json.loads(out.read_text())
    assert summary['split_seed'] == 3
    assert summary['partitions']['train']['size'] == 60


def test_run_and_render(synthetic_root, tmp_path, quick_file, capsys):
    out = tmp_path / 'results'
    code = main(['run', '--dataset-root', str(synthetic_root), '--out', str(out), '--config', str(quick_file),
                 '--experiments', 'knn_sweep,svm_kernels,naive_bayes,mlp', '--no-progress'])
    assert code == 0
    assert '# Results (seed 42)' in capsys.readouterr().out
    artifact = json.loads((out / ARTIFACT_FILE).read_text())
    assert artifact['config']['knn_k_values'] == [1, 3, 5]
    assert [row['model_tag'] for row in artifact['comparison']] == ['knn', 'mlp', 'naive_bayes', 'svm_linear']

    again = tmp_path / 'again'
    assert main(['render', str(out / ARTIFACT_FILE), '--out', str(again)]) == 0
    assert (again / 'table_comparison.csv').read_bytes() == (out / 'table_comparison.csv').read_bytes()


def test_run_from_artifact_reuses_its_config(synthetic_root, tmp_path, quick_file):
    first = tmp_path / 'first'
    assert main(['run', '--dataset-root', str(synthetic_root), '--out', str(first), '--config', str(quick_file),
                 '--experiments', 'naive_bayes', '--seed', '11', '--no-progress']) == 0
    second = tmp_path / 'second'
    assert main(['run', '--from-artifact', str(first / ARTIFACT_FILE), '--out', str(second)]) == 0
    config = json.loads((second / ARTIFACT_FILE).read_text())['config']
    assert config['seed'] == 11
    assert config['experiments'] == ['naive_bayes']


def test_failed_model_sets_exit_code(synthetic_root, tmp_path):
    code = main(['--log-level', 'error', 'run', '--dataset-root', str(synthetic_root), '--out', str(tmp_path),
                 '--experiments', 'knn_sweep', '--no-progress'])
    assert code == 0
    config = tmp_path / 'bad.cfg'
    config.write_text('knn_k_values = 1000\n')
    code = main(['run', '--dataset-root', str(synthetic_root), '--out', str(tmp_path), '--experiments', 'knn_sweep',
                 '--config', str(config), '--no-progress'])
    assert code == 1


def test_handled_errors_exit_with_one(tmp_path, capsys):
    assert main(['summarize-data', '--dataset-root', str(tmp_path / 'nowhere')]) == 1
    assert main(['render', str(tmp_path / 'missing.json')]) == 1
    assert main(['--log-level', 'chatty', 'render', str(tmp_path / 'missing.json')]) == 1
    assert capsys.readouterr().out == ''


def test_fetch_with_existing_dataset(synthetic_root, capsys):
    assert main(['fetch', '--dest', str(synthetic_root.parent)]) == 0
    assert capsys.readouterr().out.strip() == str(synthetic_root)


def test_fetch_without_destination(monkeypatch):
    monkeypatch.delenv('HAR_DATASET_ROOT', raising=False)
    assert main(['fetch']) == 1


def test_bad_usage_exits_with_two():
    with pytest.raises(SystemExit) as caught:
        main(['run', '--workers', 'many'])
    assert caught.value.code == 2
