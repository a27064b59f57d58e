import pytest

from airmine.model import ConfigError
from airmine.util import (load_config, parallel_map, percent,
                          read_key_values, sha256_hex)


def test_read_key_values(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("# comment\nk_anonymity = 7\n\nutc_offset=-8  \n")
    assert read_key_values(str(p)) == {"k_anonymity": "7", "utc_offset": "-8"}


def test_read_key_values_rejects_garbage(tmp_path):
    p = tmp_path / "b.cfg"
    p.write_text("this line has no equals sign\n")
    with pytest.raises(ConfigError):
        read_key_values(str(p))


def test_load_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("k_anonymity = 3\nnight_start_hour = 23\n")
    cfg = load_config(str(p))
    assert cfg.k_anonymity == 3
    assert cfg.night_start_hour == 23.0


def test_percent_rounding():
    assert percent(1, 3) == 33.3
    assert percent(2, 3) == 66.7
    assert percent(1, 1) == 100.0
    with pytest.raises(ConfigError):
        percent(1, 0)


def test_sha256_hex_vector():
    # FIPS 180-2 test vector for "abc"
    assert sha256_hex(b"abc") == ("ba7816bf8f01cfea414140de5dae2223"
                                  "b00361a396177a9cb410ff61f20015ad")


def _square(x):
    return x * x


@pytest.mark.parametrize("threads", [1, 3])
def test_parallel_map_preserves_order(threads):
    xs = list(range(40))
    assert parallel_map(_square, xs, threads) == [x * x for x in xs]
    assert parallel_map(_square, [], threads) == []
