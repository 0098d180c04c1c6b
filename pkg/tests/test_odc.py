import pytest
from hypothesis import given, strategies as st

from drsim.engine import ConfigError
from drsim.odc import (
    DOWNLOAD, NAIVE, ByzantineSource, DataSource, DataSourceSet, ads_size, export_res_csv, load_sources_csv,
    make_sources, median, run_odc, save_sources_csv, select_ads,
)


def test_median_example():
    assert median([10, 12, 1000]) == 12


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=21).filter(lambda v: len(v) % 2 == 1))
def test_median_has_as_many_below_as_above(vals):
    m = median(vals)
    assert sum(v < m for v in vals) <= len(vals) // 2
    assert sum(v > m for v in vals) <= len(vals) // 2


def test_ads_size():
    assert ads_size(5, 0.4) == 5
    assert select_ads(7, 0.2) == [1, 2, 3, 4, 5]
    with pytest.raises(ConfigError):
        ads_size(4, 0.5)


def test_byzantine_source_modes():
    s = ByzantineSource((5, 6), 8, "equivocate")
    assert s.query(1, peer=2) == 255 and s.query(1, peer=3) == 0
    assert ByzantineSource((5,), 8, "deflate").query_many([1]) == [0]


def test_identical_sources_give_their_values():
    vals = (3, 1, 4, 1, 5)
    data = DataSourceSet([DataSource(vals, 8) for _ in range(3)], 8)
    for mode in (NAIVE, DOWNLOAD):
        r = run_odc(data, 4, 1 / 3, mode, seed=1)
        assert r.in_range and all(v == vals for v in r.res.values())


@pytest.mark.parametrize("modes", ["inflate", "deflate", "equivocate"])
def test_medians_stay_in_honest_range(modes):
    data = make_sources(5, 64, 0.4, 3, modes=modes)
    assert len(data.byzantine) == 2
    for mode in (NAIVE, DOWNLOAD):
        r = run_odc(data, 7, 0.4, mode, seed=3, f_peers=2)
        assert r.in_range and len(r.res) == 5


def test_download_needs_few_faulty_peers():
    with pytest.raises(ConfigError):
        run_odc(make_sources(3, 8, 0.3, 0), 6, 0.3, DOWNLOAD, f_peers=2)


def test_csv_roundtrip(tmp_path):
    data = make_sources(3, 10, 0.3, 4)
    save_sources_csv(data, tmp_path / "src.csv")
    back = load_sources_csv(tmp_path / "src.csv", byzantine=data.byzantine)
    assert [s.values for s in back.sources] == [s.values for s in data.sources]
    export_res_csv((7, 8), tmp_path / "res.csv")
    assert (tmp_path / "res.csv").read_text() == "index,value\n1,7\n2,8\n"
