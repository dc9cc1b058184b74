import json

import pytest

from roughwave import config
from roughwave.errors import ConfigError


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults():
    cfg = config.load()
    assert cfg.seed == 0
    assert cfg.metric.family == "minkowski"
    assert cfg["kernel"]["j"] == 4 and cfg["strichartz"]["levels"] == [3, 4, 5, 6]
    assert len(cfg.digest()) == 64


def test_digest_tracks_content(tmp_path):
    a = config.load(_write(tmp_path, "schema_version = 1\n[run]\nseed = 1\n"))
    b = config.load(_write(tmp_path, "schema_version = 1\n[run]\nseed = 1\n", "d.toml"))
    c = config.load(_write(tmp_path, "schema_version = 1\n[run]\nseed = 2\n", "e.toml"))
    assert a.digest() == b.digest() != c.digest()


def test_full_file(tmp_path):
    text = """
schema_version = 1
[metric]
family = "bump"
epsilon = 0.05
center = [0.1, 0.0, 0.0]
[strichartz]
p = "inf"
q = 2
[kernel]
j = 3
tau_min = 0.8
"""
    cfg = config.load(_write(tmp_path, text))
    assert cfg.metric.epsilon == 0.05 and cfg.metric.center == (0.1, 0.0, 0.0)
    assert cfg.to_dict()["schema_version"] == 1


@pytest.mark.parametrize("text,path", [
    ("[run]\nseed = 1\n", "schema_version"),
    ("schema_version = 7\n", "schema_version"),
    ("schema_version = 1\nextra = 1\n", "extra"),
    ("schema_version = 1\n[run]\nseeed = 1\n", "run.seeed"),
    ("schema_version = 1\n[run]\nseed = 'x'\n", "run.seed"),
    ("schema_version = 1\n[run]\nseed = true\n", "run.seed"),
    ("schema_version = 1\n[metric]\nepsilon = 0.2\nfamily = 'bump'\n", "metric.epsilon"),
    ("schema_version = 1\n[metric]\nwarp = 1\n", "metric.warp"),
    ("schema_version = 1\n[strichartz]\np = 3\nq = 3\n", "strichartz"),
    ("schema_version = 1\n[strichartz]\nlevels = [3]\n", "strichartz.levels"),
    ("schema_version = 1\n[parametrix]\nprofile = 'square'\n", "parametrix.profile"),
    ("schema_version = 1\n[eikonal]\neps_ladder = [0.0, 0.05]\n", "eikonal.eps_ladder"),
    ("schema_version = 1\n[kernel]\nj = 3\ntau_min = 1.6\n", "kernel.tau_min"),
    ("schema_version = 1\n[kernel]\nn_tau = 2\n", "kernel.n_tau"),
    ("schema_version = 1\n[lemma]\nn_pairs = [1, 2]\n", "lemma.n_pairs"),
    ("schema_version = 1\n[lemma]\npairs_file = '/nonexistent/p.json'\n", "lemma.pairs_file"),
    ("schema_version = 1\n[run\n", "c.toml"),
])
def test_config_errors_name_the_field(tmp_path, text, path):
    with pytest.raises(ConfigError) as exc:
        config.load(_write(tmp_path, text))
    assert exc.value.path.endswith(path)


def test_missing_file():
    with pytest.raises(ConfigError):
        config.load("/nonexistent/config.toml")


def test_pairs_file_validation(tmp_path):
    good = tmp_path / "p.json"
    good.write_text(json.dumps([{"t": 0.1, "x": [0, 0, 0], "s": 0.6, "y": [0.1, 0.2, 0.3]}]))
    assert len(config.load_pairs(good)) == 1
    empty = tmp_path / "e.json"
    empty.write_text("[]")
    assert config.load_pairs(empty) == []
    for bad, where in [
        ([{"t": 0.5, "x": [0, 0, 0], "s": 0.1, "y": [0, 0, 0]}], "[0]"),
        ([{"t": 0.1, "x": [0, 0], "s": 0.5, "y": [0, 0, 0]}], "[0].x"),
        ([{"t": 0.1, "s": 0.5}], "[0]"),
        ({"t": 0.1}, "pairs_file"),
    ]:
        p = tmp_path / "b.json"
        p.write_text(json.dumps(bad))
        with pytest.raises(ConfigError) as exc:
            config.load_pairs(p)
        assert exc.value.path.endswith(where)
    p = tmp_path / "broken.json"
    p.write_text("[{")
    with pytest.raises(ConfigError):
        config.load_pairs(p)
