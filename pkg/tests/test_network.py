"""Construction rules for links and the derived network variants."""

import numpy as np
import pytest

from spdt.network import (
    BuilderConfig,
    DynamicContactNetwork,
    SPDTLink,
    densify,
    extract_spdt_links,
    load_network,
    make_ldt_lst,
    project_spst,
    save_network,
)
from spdt.synth import SynthConfig, generate_trace
from spdt.trace import LocationUpdate, ParsedTrace, Visit, segment_all

CFG = BuilderConfig(horizon_days=32)


def extract(visits, updates, cfg=CFG):
    return extract_spdt_links(visits, updates, cfg)


def the_link(net):
    links = list(net.iter_links())
    assert len(links) == 1
    return links[0]


class TestExtractRules:
    def test_direct_only_hand_trace(self):
        host_visit = Visit("h", 0.0, 0.0, 0.0, 30.0)
        ups = [LocationUpdate("v", 10.0, 5.0, 0.0), LocationUpdate("v", 20.0, 5.0, 0.0)]
        link = the_link(extract([host_visit], ups))
        assert link == SPDTLink("h", "v", 0, 30, 10, 20, 0)

    def test_indirect_only_hand_trace(self):
        host_visit = Visit("h", 0.0, 0.0, 0.0, 30.0)
        ups = [LocationUpdate("v", 100.0, 3.0, 4.0), LocationUpdate("v", 150.0, 3.0, 4.0)]
        link = the_link(extract([host_visit], ups))
        assert link == SPDTLink("h", "v", 0, 30, 100, 150, 0)

    def test_25m_excluded(self):
        host_visit = Visit("h", 0.0, 0.0, 0.0, 30.0)
        ups = [LocationUpdate("v", 10.0, 25.0, 0.0)]
        assert extract([host_visit], ups).n_links == 0

    def test_exactly_20m_included(self):
        host_visit = Visit("h", 0.0, 0.0, 0.0, 30.0)
        ups = [LocationUpdate("v", 10.0, 20.0, 0.0)]
        assert extract([host_visit], ups).n_links == 1

    def test_window_cutoff_after_departure(self):
        host_visit = Visit("h", 0.0, 0.0, 0.0, 30.0)
        # 30 + 200 = 230 is the window end: an arrival at 229 creates a link,
        # an arrival at the boundary or past it does not
        assert extract([host_visit], [LocationUpdate("v", 229.0, 0.0, 0.0)]).n_links == 1
        assert extract([host_visit], [LocationUpdate("v", 230.0, 0.0, 0.0)]).n_links == 0
        assert extract([host_visit], [LocationUpdate("v", 231.0, 0.0, 0.0)]).n_links == 0

    def test_departure_truncated_at_window_end(self):
        host_visit = Visit("h", 0.0, 0.0, 0.0, 30.0)
        ups = [LocationUpdate("v", 100.0, 0.0, 0.0), LocationUpdate("v", 230.0, 0.0, 0.0)]
        link = the_link(extract([host_visit], ups))
        assert (link.t_s_n, link.t_l_n) == (100, 230)

    def test_co_presence_yields_two_directed_links(self):
        visits = [Visit("a", 0.0, 0.0, 0.0, 30.0), Visit("b", 1.0, 0.0, 5.0, 25.0)]
        ups = [
            LocationUpdate("a", 0.0, 0.0, 0.0), LocationUpdate("a", 30.0, 0.0, 0.0),
            LocationUpdate("b", 5.0, 1.0, 0.0), LocationUpdate("b", 25.0, 1.0, 0.0),
        ]
        net = extract(visits, ups)
        pairs = {(l.host_id, l.neighbour_id) for l in net.iter_links()}
        assert pairs == {("a", "b"), ("b", "a")}

    def test_one_link_per_host_visit(self):
        visits = [Visit("h", 0.0, 0.0, 0.0, 30.0), Visit("h", 0.0, 0.0, 300.0, 330.0)]
        ups = [LocationUpdate("v", 10.0, 1.0, 0.0), LocationUpdate("v", 310.0, 1.0, 0.0)]
        net = extract(visits, ups)
        assert net.n_links == 2

    def test_update_at_host_arrival_instant_dropped(self):
        # a lone report exactly at the host's arrival leaves no exposure window
        host_visit = Visit("h", 0.0, 0.0, 0.0, 30.0)
        assert extract([host_visit], [LocationUpdate("v", 0.0, 1.0, 0.0)]).n_links == 0

    def test_days_beyond_horizon_dropped(self):
        cfg = BuilderConfig(horizon_days=1)
        visits = [Visit("h", 0.0, 0.0, 2000.0, 2030.0)]
        ups = [LocationUpdate("v", 2010.0, 1.0, 0.0)]
        assert extract([visits[0]], ups, cfg).n_links == 0

    def test_day_index_from_host_start(self):
        host_visit = Visit("h", 0.0, 0.0, 1500.0, 1530.0)
        ups = [LocationUpdate("v", 1510.0, 1.0, 0.0)]
        assert the_link(extract([host_visit], ups)).day == 1


class TestBuilderConfig:
    def test_rejects_nonpositive_values(self):
        with pytest.raises(ValueError):
            BuilderConfig(radius_m=0.0)
        with pytest.raises(ValueError):
            BuilderConfig(indirect_window_min=-5.0)
        with pytest.raises(ValueError):
            BuilderConfig(horizon_days=0)


class TestNetworkContainer:
    def test_isolated_users_not_carried(self):
        net = DynamicContactNetwork.from_links(
            [SPDTLink("a", "b", 0, 10, 5, 8, 0)], horizon=2)
        assert net.users == ("a", "b")

    def test_self_link_rejected(self):
        with pytest.raises(ValueError):
            DynamicContactNetwork.from_links(
                [SPDTLink("a", "a", 0, 10, 5, 8, 0)], horizon=1)

    def test_day_slices_cover_links(self):
        links = [SPDTLink("a", "b", 0, 10, 5, 8, 0),
                 SPDTLink("a", "b", 1500, 1510, 1505, 1508, 1),
                 SPDTLink("b", "a", 1500, 1510, 1505, 1508, 1)]
        net = DynamicContactNetwork.from_links(links, horizon=3)
        assert list(net.day_link_counts()) == [1, 2, 0]
        sl = net.day_slice(1)
        assert sl.stop - sl.start == 2


class TestProjectSPST:
    def test_mixed_link_truncated(self):
        net = DynamicContactNetwork.from_links(
            [SPDTLink("a", "b", 0, 30, 10, 100, 0)], horizon=1)
        link = the_link(project_spst(net))
        assert (link.t_s_n, link.t_l_n) == (10, 30)

    def test_indirect_only_removed(self):
        net = DynamicContactNetwork.from_links(
            [SPDTLink("a", "b", 0, 30, 100, 150, 0)], horizon=1)
        assert project_spst(net).n_links == 0

    def test_user_connected_only_indirectly_dropped(self):
        net = DynamicContactNetwork.from_links([
            SPDTLink("a", "b", 0, 30, 10, 20, 0),
            SPDTLink("a", "c", 0, 30, 100, 150, 0),
        ], horizon=1)
        proj = project_spst(net)
        assert proj.users == ("a", "b")

    def test_subset_per_day(self):
        cfg = SynthConfig(n_users=150, days=5, rng_seed=3, n_locations=12,
                          area_m=(800.0, 800.0), active_day_probability=0.4)
        parsed = ParsedTrace(updates=generate_trace(cfg))
        net = extract(segment_all(parsed), parsed, BuilderConfig(horizon_days=5))
        proj = project_spst(net)
        assert set(proj.users) <= set(net.users)
        assert np.all(proj.day_link_counts() <= net.day_link_counts())


class TestDensify:
    def test_single_active_day_fills_horizon(self):
        links = [SPDTLink("h", "v", 3 * 1440, 3 * 1440 + 30, 3 * 1440 + 10,
                          3 * 1440 + 20, 3)]
        net = DynamicContactNetwork.from_links(links, horizon=32)
        dense = densify(net, rng_seed=0)
        assert list(dense.day_link_counts()) == [1] * 32
        # time-shifted copies keep the within-day offsets
        for link in dense.iter_links():
            assert link.t_s == link.day * 1440
            assert (link.t_l - link.t_s, link.t_s_n - link.t_s,
                    link.t_l_n - link.t_s) == (30, 10, 20)

    def test_host_active_every_day_unchanged(self):
        links = [SPDTLink("h", "v", d * 1440, d * 1440 + 10, d * 1440 + 2,
                          d * 1440 + 8, d) for d in range(4)]
        net = DynamicContactNetwork.from_links(links, horizon=4)
        assert densify(net, rng_seed=1) == net

    def test_original_days_bit_identical(self):
        links = [SPDTLink("h", "v", 1440, 1460, 1445, 1455, 1),
                 SPDTLink("x", "y", 0, 60, 10, 50, 0)]
        net = DynamicContactNetwork.from_links(links, horizon=5)
        dense = densify(net, rng_seed=9)
        originals = {(l.host_id, l.day): l for l in net.iter_links()}
        for link in dense.iter_links():
            if (link.host_id, link.day) in originals:
                assert link == originals[(link.host_id, link.day)]

    def test_seed_changes_source_days_not_structure(self):
        links = [SPDTLink("h", "v", 0, 30, 10, 20, 0),
                 SPDTLink("h", "w", 1440, 1470, 1450, 1460, 1)]
        net = DynamicContactNetwork.from_links(links, horizon=20)
        d0, d1 = densify(net, rng_seed=0), densify(net, rng_seed=1)
        assert list(d0.day_link_counts()) == [1] * 20
        assert list(d1.day_link_counts()) == [1] * 20
        assert densify(net, rng_seed=0) == d0  # deterministic under seed


class TestMakeLdtLst:
    def test_indirect_link_rewritten_with_duration_preserved(self):
        net = DynamicContactNetwork.from_links(
            [SPDTLink("a", "b", 0, 30, 100, 150, 0)], horizon=1)
        ldt, lst = make_ldt_lst(net)
        link = the_link(ldt)
        assert (link.t_s, link.t_l, link.t_s_n, link.t_l_n) == (0, 30, 0, 50)
        assert the_link(lst).t_l_n == 30

    def test_keep_departure_mode(self):
        net = DynamicContactNetwork.from_links(
            [SPDTLink("a", "b", 0, 30, 100, 150, 0)], horizon=1)
        ldt, _ = make_ldt_lst(net, keep_departure=True)
        link = the_link(ldt)
        assert (link.t_s_n, link.t_l_n) == (0, 150)

    def test_mixed_link_unchanged(self):
        net = DynamicContactNetwork.from_links(
            [SPDTLink("a", "b", 0, 30, 10, 100, 0)], horizon=1)
        ldt, _ = make_ldt_lst(net)
        assert the_link(ldt) == SPDTLink("a", "b", 0, 30, 10, 100, 0)

    def test_user_sets_and_daily_counts_equal(self):
        cfg = SynthConfig(n_users=200, days=6, rng_seed=5, n_locations=15,
                          area_m=(900.0, 900.0), active_day_probability=0.35)
        parsed = ParsedTrace(updates=generate_trace(cfg))
        net = extract(segment_all(parsed), parsed, BuilderConfig(horizon_days=6))
        ldt, lst = make_ldt_lst(densify(net, 0))
        assert ldt.users == lst.users
        assert np.array_equal(ldt.day_link_counts(), lst.day_link_counts())


class TestDeltaBound:
    def test_no_link_outside_indirect_window(self):
        cfg = SynthConfig(n_users=150, days=4, rng_seed=11, n_locations=10,
                          area_m=(700.0, 700.0), active_day_probability=0.5)
        parsed = ParsedTrace(updates=generate_trace(cfg))
        for net in _variants(parsed, horizon=4):
            assert np.all(net.t_s_n < net.t_l + 200)
            assert np.all(net.t_l_n <= net.t_l + 200)
            assert np.all(net.t_l_n > net.t_s)


def _variants(parsed, horizon):
    net = extract(segment_all(parsed), parsed, BuilderConfig(horizon_days=horizon))
    ddt = densify(net, 0)
    ldt, lst = make_ldt_lst(ddt)
    return net, project_spst(net), ddt, project_spst(ddt), ldt, lst


class TestPersistence:
    def _sample_net(self):
        return DynamicContactNetwork.from_links([
            SPDTLink("a", "b", 0, 30, 10, 100, 0),
            SPDTLink("b", "a", 1500, 1540, 1500, 1520, 1),
        ], horizon=3)

    def test_round_trip(self, tmp_path):
        net = self._sample_net()
        path = tmp_path / "net.spdt"
        save_network(net, path)
        assert load_network(path) == net

    def test_header_format(self, tmp_path):
        path = tmp_path / "net.spdt"
        save_network(self._sample_net(), path)
        first = path.read_text().splitlines()[0]
        assert first == "spdt-net v1 horizon=3"

    def test_empty_network(self, tmp_path):
        net = DynamicContactNetwork.from_links([], horizon=4)
        path = tmp_path / "empty.spdt"
        save_network(net, path)
        loaded = load_network(path)
        assert loaded == net and loaded.n_links == 0

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "net.spdt"
        save_network(self._sample_net(), path)
        content = path.read_text()
        path.write_text(content[:-9])  # cut inside the final row
        with pytest.raises(ValueError):
            load_network(path)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "net.spdt"
        path.write_text("spdt-net v2 horizon=3\n")
        with pytest.raises(ValueError, match="version"):
            load_network(path)

    def test_garbage_header_rejected(self, tmp_path):
        path = tmp_path / "net.spdt"
        path.write_text("something else\n")
        with pytest.raises(ValueError, match="header"):
            load_network(path)

    def test_whitespace_user_id_rejected_on_save(self, tmp_path):
        net = DynamicContactNetwork.from_links(
            [SPDTLink("a b", "c", 0, 10, 5, 8, 0)], horizon=1)
        with pytest.raises(ValueError):
            save_network(net, tmp_path / "net.spdt")
