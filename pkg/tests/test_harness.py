import pytest

from authformer.config import ModelConfig
from authformer.data.dataset import Dataset
from authformer.errors import AuthFormerValidationError, RouteError
from authformer.modalities import Modality
from authformer.training import reports
from authformer.training.harness import (
    ABLATION_COMBINATIONS,
    AblationRow,
    ablation_gains,
    ablation_run,
    config_for,
    depth_sweep,
    parse_layer_counts,
)
from authformer.training.metrics import classification_report

EXPECTED_LABELS = [
    "Palmprint & Finger & Voice",
    "Face & Palmprint & Voice",
    "Finger & Face & Voice",
    "Face & Palmprint",
    "Face & Voice",
    "Finger & Palmprint",
    "Finger & Voice",
    "Finger & Face",
    "Palmprint & Voice",
    "Face",
    "Palmprint",
    "Finger",
    "Voice",
]


@pytest.fixture
def ablation_rows(tiny_dataset, tiny_config, fast_train):
    return ablation_run(tiny_dataset, tiny_config, fast_train)


class TestAblation:
    def test_rows_follow_reporting_order(self, ablation_rows):
        assert [r.combination for r in ablation_rows] == EXPECTED_LABELS
        assert len(ABLATION_COMBINATIONS) == 13
        for row in ablation_rows:
            assert 0.0 <= row.accuracy <= 1.0
            assert 0.0 <= row.macro_f1 <= 1.0

    def test_deterministic(self, ablation_rows, tiny_dataset, tiny_config, fast_train):
        again = ablation_run(tiny_dataset, tiny_config, fast_train)
        assert [r.model_dump() for r in again] == [r.model_dump() for r in ablation_rows]

    def test_parallel_matches_serial(self, ablation_rows, tiny_dataset, tiny_config, fast_train):
        parallel = ablation_run(tiny_dataset, tiny_config, fast_train, jobs=2)
        assert [r.model_dump() for r in parallel] == [r.model_dump() for r in ablation_rows]

    def test_subset_of_combinations(self, tiny_dataset, tiny_config, fast_train):
        rows = ablation_run(
            tiny_dataset, tiny_config, fast_train, combinations=[(Modality.VOICE,), (Modality.FACE, Modality.VOICE)]
        )
        assert [r.combination for r in rows] == ["Voice", "Face & Voice"]

    def test_missing_modality(self, tiny_dataset, tiny_config, fast_train):
        no_palm = Dataset(
            {m: a for m, a in tiny_dataset.arrays.items() if m is not Modality.PALMPRINT},
            tiny_dataset.labels, tiny_dataset.ids, tiny_dataset.splits, tiny_dataset.num_classes,
        )
        with pytest.raises(RouteError, match="palmprint"):
            ablation_run(no_palm, tiny_config, fast_train)


def _row(combination: str, modalities, accuracy: float) -> AblationRow:
    return AblationRow(
        combination=combination, modalities=list(modalities), accuracy=accuracy, macro_f1=accuracy,
        macro_recall=accuracy,
    )


class TestGains:
    def test_best_constituent(self):
        rows = [
            _row("Face & Voice", [Modality.FACE, Modality.VOICE], 0.9),
            _row("Finger & Palmprint", [Modality.FINGERPRINT, Modality.PALMPRINT], 0.6),
            _row("Face", [Modality.FACE], 0.7),
            _row("Voice", [Modality.VOICE], 0.8),
            _row("Finger", [Modality.FINGERPRINT], 0.65),
        ]
        gains = ablation_gains(rows)
        assert [g.combination for g in gains] == ["Face & Voice", "Finger & Palmprint"]
        assert gains[0].best_unimodal == "Voice"
        assert gains[0].gain == pytest.approx(0.1)
        assert gains[1].best_unimodal == "Finger"
        assert gains[1].gain == pytest.approx(-0.05)

    def test_no_unimodal_rows(self):
        assert ablation_gains([_row("Face & Voice", [Modality.FACE, Modality.VOICE], 0.9)]) == []


class TestDepthSweep:
    def test_parameters_grow_linearly(self, tiny_dataset, tiny_config, fast_train):
        rows = depth_sweep(tiny_dataset, (1, 2, 3), tiny_config, fast_train)
        assert [r.layers for r in rows] == [1, 2, 3]
        counts = [r.parameters for r in rows]
        assert counts[1] - counts[0] == counts[2] - counts[1] > 0
        for r in rows:
            assert r.seconds_per_epoch >= 0.0

    def test_zero_layers(self, tiny_dataset, tiny_config, fast_train):
        (row,) = depth_sweep(tiny_dataset, (0,), tiny_config, fast_train)
        assert row.layers == 0
        assert row.parameters > 0

    def test_empty_sweep(self, tiny_dataset, tiny_config, fast_train):
        with pytest.raises(AuthFormerValidationError):
            depth_sweep(tiny_dataset, (), tiny_config, fast_train)

    def test_default_depth(self):
        assert ModelConfig().layers == 2


@pytest.mark.parametrize(
    "text, expected",
    [(None, (1, 2, 3, 4, 5, 6)), ("", (1, 2, 3, 4, 5, 6)), ("2..4", (2, 3, 4)), ("1,2,4", (1, 2, 4)), ("3", (3,))],
)
def test_parse_layer_counts(text, expected):
    assert parse_layer_counts(text) == expected


@pytest.mark.parametrize("text", ["a..b", "1,x", "4..2", "-1,2", ","])
def test_parse_layer_counts_rejects(text):
    with pytest.raises(AuthFormerValidationError):
        parse_layer_counts(text)


def test_config_for_canonicalises(tiny_config):
    config = config_for(tiny_config, [Modality.VOICE, Modality.PALMPRINT], num_classes=5, layers=1)
    assert config.modalities == (Modality.PALMPRINT, Modality.VOICE)
    assert config.num_classes == 5
    assert config.layers == 1
    assert config.embed == tiny_config.embed


class TestReports:
    def test_metrics_csv(self):
        report = classification_report([0, 0, 1, 1], [0, 1, 1, 1], combination="Face")
        assert reports.to_csv(reports.metrics_table(report)) == (
            '"combination","n_samples","accuracy","macro_recall","macro_f1"\n'
            '"Face",4,0.7500,0.7500,0.7333\n'
        )

    def test_per_class_csv(self):
        report = classification_report([0, 0, 1, 1], [0, 1, 1, 1])
        assert reports.to_csv(reports.per_class_table(report)).splitlines() == [
            '"class","support","precision","recall","f1"',
            "0,2,1.0000,0.5000,0.6667",
            "1,2,0.6667,1.0000,0.8000",
        ]

    def test_ablation_csv(self):
        text = reports.to_csv(reports.ablation_table([_row("Face & Voice", [Modality.FACE, Modality.VOICE], 0.5)]))
        assert text.splitlines()[1] == '"Face & Voice",0.5000,0.5000,0.5000'

    def test_write_csv(self, tmp_path):
        table = (["layers", "accuracy"], [[1, reports.metric(0.123456)]])
        path = reports.write_csv(tmp_path / "out" / "depth.csv", table)
        assert path.read_text() == '"layers","accuracy"\n1,0.1235\n'

    def test_format_table_aligns(self):
        text = reports.format_table((["a", "bbb"], [["xx", 1]]))
        assert text.splitlines() == ["a   bbb", "--  ---", "xx  1"]
