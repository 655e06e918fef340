from pathlib import Path

import pytest

from tdnn_enhance.config import ConfigError, RunConfig, expand_preset, load_config, parse_config, parse_contexts
from tdnn_enhance.datagen import PairKind
from tdnn_enhance.errors import DataError
from tdnn_enhance.network import CONTEXT_PRESETS, receptive_field

GOLDEN = Path(__file__).parent / "golden" / "presets.txt"


def _pair(text):
    left, right = text.split(":")
    return int(left), int(right)


def golden_rows():
    rows = {}
    for line in GOLDEN.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        name, network, *layers = line.split("\t")
        rows[name] = (_pair(network), tuple(_pair(x) for x in layers))
    return rows


def test_golden_covers_every_preset():
    assert set(golden_rows()) == set(CONTEXT_PRESETS)


@pytest.mark.parametrize("name", sorted(golden_rows()))
def test_preset_expansion_matches_golden(name):
    network, layers = golden_rows()[name]
    assert expand_preset(name) == layers
    assert expand_preset(name.upper()) == layers
    assert receptive_field(layers) == network


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        expand_preset("tdnn-z")


def test_parse_contexts():
    assert parse_contexts("-1:1, -2:2,0:0") == ((-1, 1), (-2, 2), (0, 0))
    with pytest.raises(ConfigError):
        parse_contexts("-1:1, 2")
    with pytest.raises(ConfigError):
        parse_contexts("1:-1")


def test_defaults():
    cfg = RunConfig()
    assert cfg.layer_contexts() == expand_preset("tdnn-f")
    assert cfg.plan.total_epochs == 45
    assert cfg.learning_rate == 5e-4


def test_parse_full_config():
    cfg = parse_config(
        """
        # demo
        model.preset = dnn
        model.hidden = 64
        model.seed = 4
        train.stages = noisy_clean:2, clean_clean:1
        train.learning_rate = 0.001
        train.batch = 2
        train.checkpoints = yes
        data.seed = 9
        data.n_train = 3
        data.snrs = 0, 5
        data.train_expand = random
        io.out_dir = somewhere   # trailing comment
        """
    )
    assert cfg.layer_contexts() == expand_preset("dnn")
    assert cfg.hidden == 64 and cfg.model_seed == 4
    assert [(m, n) for m, n in cfg.plan.stages] == [(PairKind.NOISY_TO_CLEAN, 2), (PairKind.CLEAN_TO_CLEAN, 1)]
    assert cfg.learning_rate == 1e-3 and cfg.batch == 2 and cfg.checkpoints
    assert cfg.seed == 9
    assert cfg.synth.n_train == 3 and cfg.synth.snrs == (0.0, 5.0) and cfg.synth.train_expand == "random"
    assert cfg.out_dir == "somewhere"


def test_explicit_contexts_and_widths():
    cfg = parse_config("model.contexts = -1:1, -2:2, 0:0\nmodel.hidden = 16, 8\n")
    assert cfg.layer_contexts() == ((-1, 1), (-2, 2), (0, 0))
    assert cfg.hidden == (16, 8)
    with pytest.raises(ConfigError, match="hidden"):
        parse_config("model.contexts = -1:1, -2:2, 0:0\nmodel.hidden = 16\nmodel.hidden = 16, 8, 4\n")


@pytest.mark.parametrize(
    "text, line",
    [
        ("model.preset = dnn\nnonsense\n", 2),
        ("model.colour = red\n", 1),
        ("\n\nfoo.bar = 1\n", 3),
        ("model.hidden = many\n", 1),
        ("train.stages = noisy_clean:0\n", 1),
        ("train.checkpoints = maybe\n", 1),
        ("model.contexts = 2:1\n", 1),
    ],
)
def test_errors_name_the_line(text, line):
    with pytest.raises(ConfigError, match=f"line {line}"):
        parse_config(text)


def test_config_error_is_data_error(tmp_path):
    assert issubclass(ConfigError, DataError)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.cfg")


def test_with_seed_sets_both_seeds():
    cfg = RunConfig().with_seed(7)
    assert cfg.seed == 7 and cfg.model_seed == 7
