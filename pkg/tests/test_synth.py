import pytest

from airmine.model import ConfigError
from airmine.synth import SynthConfig, generate, load_truth


def small(**kw):
    base = dict(seed=3, n_users=20, span_days=40)
    base.update(kw)
    return SynthConfig(**base)


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def test_generation_is_deterministic(tmp_path):
    cfg = small()
    a = generate(cfg, str(tmp_path / "a"))
    b = generate(cfg, str(tmp_path / "b"))
    for key in ("location", "app", "census", "pois", "truth"):
        assert read(a[key]) == read(b[key])


def test_seed_changes_output(tmp_path):
    a = generate(small(), str(tmp_path / "a"))
    b = generate(small(seed=4), str(tmp_path / "b"))
    assert read(a["location"]) != read(b["location"])


def test_role_counts_follow_fractions(tmp_path):
    cfg = small(n_users=40)
    out = generate(cfg, str(tmp_path / "c"))
    truth = load_truth(out["truth"])
    counts = truth["counts"]
    assert counts["commuters"] == 10     # 25% of 40
    assert counts["homeworkers"] == 6    # 15% of 40
    assert counts["nomads"] == 2         # 5% of 40
    assert sum(counts.values()) == 40
    roles = [u["role"] for u in truth["users"].values()]
    assert roles.count("commuter") == 10


def test_truth_funnel_is_monotone(tmp_path):
    out = generate(small(n_users=40), str(tmp_path / "d"))
    f = load_truth(out["truth"])["funnel"]
    chain = [f["users"], f["consistent"], f["homed"],
             f["homed_in_district"], f["employed"], f["commuters"]]
    assert chain == sorted(chain, reverse=True)


def test_zero_users_yields_headers_only(tmp_path):
    out = generate(small(n_users=0), str(tmp_path / "e"))
    loc = read(out["location"]).splitlines()
    assert loc == ["uid,ts,lat,lon"]
    truth = load_truth(out["truth"])
    assert truth["users"] == {}
    assert truth["funnel"]["users"] == 0


def test_bad_configs_are_rejected():
    with pytest.raises(ConfigError):
        small(fraction_commuters=0.9, fraction_homeworkers=0.5)
    with pytest.raises(ConfigError):
        small(fraction_nomads=0.5)  # exceeds the non-homed share
    with pytest.raises(ConfigError):
        small(span_days=0)
    with pytest.raises(ConfigError):
        small(start_date="last tuesday")


def test_config_from_dict():
    cfg = SynthConfig.from_dict({"n_users": "50", "seed": "9",
                                 "utc_offset": "-8"})
    assert cfg.n_users == 50 and cfg.seed == 9 and cfg.utc_offset == -8.0
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"bogus": "1"})


def test_truth_lists_planted_artifacts(tmp_path):
    out = generate(small(n_users=40), str(tmp_path / "f"))
    truth = load_truth(out["truth"])
    assert len(truth["towers"]) == 4
    assert len(truth["districts"]) == 9
    assert set(truth["communities"]) == {"app_a", "app_b"}
    # every user with visits planted appears in the users map
    assert set(truth["visits"]) <= set(truth["users"])
