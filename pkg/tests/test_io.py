"""Tests for file formats: edge lists, JSON state, CSV tables, Senate data."""

import numpy as np
import pytest

from coevnet.core import DynamicNetwork
from coevnet.em import FitConfig, fit
from coevnet.estep import EStepConfig
from coevnet.generator import benchmark_config, generate_sequence
from coevnet.io import (
    SponsorshipRecord,
    build_cosponsorship_network,
    load_edge_sequence,
    load_fit_report,
    load_ground_truth,
    load_scores_csv,
    load_sponsorship_records,
    save_edge_sequence,
    save_fit_report,
    save_ground_truth,
    save_metrics_csv,
)


class TestEdgeSequence:
    def test_round_trip_preserves_adjacency_and_labels(self, tmp_path):
        truth = generate_sequence(benchmark_config(N=12, K=2, T=3, seed=2))
        path = tmp_path / "net.tsv"
        save_edge_sequence(path, truth.network)
        loaded = load_edge_sequence(path)
        np.testing.assert_array_equal(loaded.snapshots, truth.network.snapshots)
        assert loaded.node_labels == truth.network.node_labels

    def test_save_is_deterministic(self, tmp_path):
        truth = generate_sequence(benchmark_config(N=8, K=2, T=2, seed=5))
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        save_edge_sequence(a, truth.network)
        save_edge_sequence(b, truth.network)
        assert a.read_bytes() == b.read_bytes()

    def test_empty_file_is_rejected(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        with pytest.raises(ValueError, match="no snapshots"):
            load_edge_sequence(path)

    def test_duplicate_edges_collapse(self, tmp_path):
        path = tmp_path / "dup.tsv"
        path.write_text("0\ta\tb\n0\ta\tb\n")
        net = load_edge_sequence(path)
        assert net.snapshots.sum() == 1
        assert net.snapshots.shape == (1, 2, 2)
        assert net.node_labels == ["a", "b"]

    def test_headerless_nodes_indexed_by_first_appearance(self, tmp_path):
        path = tmp_path / "plain.tsv"
        path.write_text("0\tcarol\talice\n1\talice\tbob\n")
        net = load_edge_sequence(path)
        assert net.node_labels == ["carol", "alice", "bob"]
        assert net.snapshots.shape == (2, 3, 3)
        assert net.snapshots[0, 0, 1] == 1
        assert net.snapshots[1, 1, 2] == 1

    def test_space_separated_lines_accepted(self, tmp_path):
        path = tmp_path / "sp.tsv"
        path.write_text("0 a b\n")
        net = load_edge_sequence(path)
        assert net.snapshots.sum() == 1

    @pytest.mark.parametrize(
        "content,msg",
        [
            ("0\ta\n", "line 1: expected"),
            ("x\ta\tb\n", "line 1: bad timestamp"),
            ("-1\ta\tb\n", "line 1: negative"),
            ("0\ta\ta\n", "line 1: self-loop"),
            ("# snapshots=2 nodes=2\n5\ta\tb\n", "line 2: timestamp 5 outside"),
        ],
    )
    def test_malformed_lines_report_line_numbers(self, tmp_path, content, msg):
        path = tmp_path / "bad.tsv"
        path.write_text(content)
        with pytest.raises(ValueError, match=msg):
            load_edge_sequence(path)

    def test_gapped_header_indices_rejected(self, tmp_path):
        path = tmp_path / "gap.tsv"
        path.write_text("# snapshots=1 nodes=2\n# node 0 a\n# node 2 b\n0\ta\tb\n")
        with pytest.raises(ValueError, match="0..N-1"):
            load_edge_sequence(path)

    def test_declared_snapshots_pad_empty_steps(self, tmp_path):
        path = tmp_path / "pad.tsv"
        path.write_text("# snapshots=3 nodes=2\n# node 0 a\n# node 1 b\n0\ta\tb\n")
        net = load_edge_sequence(path)
        assert net.snapshots.shape == (3, 2, 2)
        assert net.snapshots[1:].sum() == 0


class TestGroundTruthFile:
    def test_round_trip(self, tmp_path):
        truth = generate_sequence(benchmark_config(N=6, K=2, T=2, seed=7))
        path = tmp_path / "truth.json"
        save_ground_truth(path, truth)
        back = load_ground_truth(path)
        np.testing.assert_array_equal(back["mu"], truth.memberships.mu)
        np.testing.assert_array_equal(back["pi"], truth.memberships.pi)
        np.testing.assert_array_equal(
            back["params"].B, truth.config.params.B
        )
        assert back["seed"] == 7
        assert back["n_nodes"] == 6 and back["n_roles"] == 2 and back["n_steps"] == 3

    def test_role_draws_use_minus_one_diagonal(self, tmp_path):
        truth = generate_sequence(benchmark_config(N=5, K=3, T=1, seed=1))
        path = tmp_path / "truth.json"
        save_ground_truth(path, truth)
        back = load_ground_truth(path)
        z = back["z_send"]
        assert z.shape == (2, 5, 5)
        assert np.all(z[:, np.eye(5, dtype=bool)] == -1)
        off = ~np.eye(5, dtype=bool)
        np.testing.assert_array_equal(
            z[:, off], truth.indicators.z_send.argmax(axis=3)[:, off]
        )

    def test_wrong_kind_rejected(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"kind":"something else"}\n')
        with pytest.raises(ValueError, match="ground-truth"):
            load_ground_truth(path)


class TestFitReportFile:
    def _small_report(self):
        truth = generate_sequence(benchmark_config(N=6, K=2, T=1, seed=3))
        return fit(
            truth.network,
            FitConfig(K=2, restarts=1, seed=0, max_em_iters=4,
                      estep=EStepConfig(max_sweeps=10)),
        )

    def test_round_trip_bit_exact(self, tmp_path):
        report = self._small_report()
        path = tmp_path / "fit.json"
        save_fit_report(path, report)
        back = load_fit_report(path)
        np.testing.assert_array_equal(back.trajectories, report.trajectories)
        np.testing.assert_array_equal(back.params.B, report.params.B)
        np.testing.assert_array_equal(back.params.beta, report.params.beta)
        np.testing.assert_array_equal(back.vs.gamma, report.vs.gamma)
        assert back.elbo_trace == report.elbo_trace
        assert back.converged == report.converged
        assert back.flags["chain_elbos"] == report.flags["chain_elbos"]
        # Writing the loaded report again reproduces the file byte for byte.
        path2 = tmp_path / "fit2.json"
        save_fit_report(path2, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_wrong_kind_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"kind":"ground_truth"}\n')
        with pytest.raises(ValueError, match="fit-report"):
            load_fit_report(path)


class TestMetricsCsv:
    def test_floats_round_trip_through_repr(self, tmp_path):
        path = tmp_path / "m.csv"
        vals = [1.0 / 3.0, 0.1 + 0.2, 1e-17]
        save_metrics_csv(path, ["t", "value"], [[i, v] for i, v in enumerate(vals)])
        lines = path.read_text().splitlines()
        assert lines[0] == "t,value"
        for line, v in zip(lines[1:], vals):
            assert float(line.split(",")[1]) == v


class TestScoresCsv:
    def _write(self, tmp_path, text):
        path = tmp_path / "scores.csv"
        path.write_text(text)
        return path

    def test_rescaled_to_unit_interval(self, tmp_path):
        path = self._write(
            tmp_path, "node,time,score\na,0,10\nb,0,20\nc,0,40\n"
        )
        out = load_scores_csv(path, ["a", "b", "c"], 1)
        np.testing.assert_allclose(out.values[0], [0.0, 1.0 / 3.0, 1.0])

    def test_missing_entries_are_nan(self, tmp_path):
        path = self._write(tmp_path, "a,0,1\nb,0,2\n")
        out = load_scores_csv(path, ["a", "b", "c"], 2)
        assert np.isnan(out.values[1]).all()
        assert np.isnan(out.values[0, 2])

    @pytest.mark.parametrize(
        "text,msg",
        [
            ("z,0,1\n", "unknown node"),
            ("a,x,1\n", "bad time or score"),
            ("a,0,oops\n", "bad time or score"),
            ("a,5,1\n", "time 5 outside"),
            ("a,0,1\na,0,2\n", "duplicate"),
        ],
    )
    def test_malformed_rows_rejected(self, tmp_path, text, msg):
        path = self._write(tmp_path, text)
        with pytest.raises(ValueError, match=msg):
            load_scores_csv(path, ["a", "b"], 2)

    def test_empty_and_constant_rejected(self, tmp_path):
        path = self._write(tmp_path, "node,time,score\n")
        with pytest.raises(ValueError, match="no entries"):
            load_scores_csv(path, ["a"], 1)
        path = self._write(tmp_path, "a,0,3\nb,0,3\n")
        with pytest.raises(ValueError, match="constant"):
            load_scores_csv(path, ["a", "b"], 1)


class TestSponsorshipRecords:
    def test_parses_fields_and_optional_cosponsors(self, tmp_path):
        path = tmp_path / "bills.tsv"
        path.write_text(
            "97\ts1\talice\tbob, carol\n"
            "97\ts2\tbob\n"
            "98\ts3\tcarol\talice\n"
        )
        records = load_sponsorship_records(path)
        assert len(records) == 3
        assert records[0].cosponsors == ["bob", "carol"]
        assert records[1].cosponsors == []

    def test_sponsor_cannot_cosponsor_own_bill(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("97\ts1\talice\talice,bob\n")
        with pytest.raises(ValueError, match="line 1.*own cosponsor"):
            load_sponsorship_records(path)

    def test_bad_time_reports_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("97\ts1\ta\tb\nxx\ts2\ta\tb\n")
        with pytest.raises(ValueError, match="line 2: bad time"):
            load_sponsorship_records(path)


def _record(time, bill, sponsor, cosponsors):
    return SponsorshipRecord(
        time=time, bill=bill, sponsor=sponsor, cosponsors=list(cosponsors)
    )


class TestCosponsorshipBuilder:
    def test_single_record_single_edge_at_threshold_one(self):
        net = build_cosponsorship_network([_record(5, "b1", "q", ["p"])], threshold=1)
        assert net.node_labels == ["p", "q"]
        assert net.snapshots.shape == (1, 2, 2)
        assert net.snapshots[0, 0, 1] == 1
        assert net.snapshots.sum() == 1

    def test_two_cosponsorships_below_threshold_three(self):
        records = [
            _record(1, "b1", "q", ["p"]),
            _record(1, "b2", "q", ["p"]),
            _record(1, "b3", "q", []),
        ]
        net = build_cosponsorship_network(records, threshold=3)
        assert net.snapshots.sum() == 0

    def test_only_persistent_nodes_kept(self):
        records = [
            _record(1, "b1", "q", ["p", "ghost"]),
            _record(2, "b2", "q", ["p"]),
        ]
        net = build_cosponsorship_network(records, threshold=1)
        assert net.node_labels == ["p", "q"]

    def test_matches_brute_force_counting(self):
        """Ten records over two sessions, counted by hand per ordered pair."""
        records = [
            _record(97, "b01", "q", ["p", "r"]),
            _record(97, "b02", "q", ["p"]),
            _record(97, "b03", "q", ["p", "r"]),
            _record(97, "b04", "r", ["p", "q"]),
            _record(97, "b05", "p", ["q"]),
            _record(98, "b06", "q", ["r"]),
            _record(98, "b07", "q", ["r", "p"]),
            _record(98, "b08", "r", ["q", "p"]),
            _record(98, "b09", "r", ["q"]),
            _record(98, "b10", "p", ["q", "r"]),
        ]
        net = build_cosponsorship_network(records, threshold=2)
        assert net.node_labels == ["p", "q", "r"]
        labels = {lab: i for i, lab in enumerate(net.node_labels)}
        counts = np.zeros((2, 3, 3), dtype=int)
        for rec in records:
            s = 0 if rec.time == 97 else 1
            for c in rec.cosponsors:
                counts[s, labels[c], labels[rec.sponsor]] += 1
        np.testing.assert_array_equal(net.snapshots, (counts >= 2).astype(np.uint8))
        # Spot checks: p cosponsored 3 of q's session-97 bills, r only 2 of
        # q's session-98 bills.
        assert net.snapshots[0, labels["p"], labels["q"]] == 1
        assert net.snapshots[1, labels["r"], labels["q"]] == 1
        assert net.snapshots[0, labels["r"], labels["q"]] == 1
        assert net.snapshots[1, labels["p"], labels["q"]] == 0

    def test_argument_validation(self):
        with pytest.raises(ValueError, match="threshold"):
            build_cosponsorship_network([_record(1, "b", "q", ["p"])], threshold=0)
        with pytest.raises(ValueError, match="no sponsorship"):
            build_cosponsorship_network([], threshold=1)


def test_edge_sequence_rejects_non_network_duplicates_cleanly(tmp_path):
    """A network built by hand still round-trips."""
    Y = np.zeros((2, 3, 3), dtype=np.uint8)
    Y[0, 0, 1] = Y[1, 2, 0] = 1
    net = DynamicNetwork(Y, node_labels=["x", "y", "z"])
    path = tmp_path / "hand.tsv"
    save_edge_sequence(path, net)
    back = load_edge_sequence(path)
    np.testing.assert_array_equal(back.snapshots, Y)
    assert back.node_labels == ["x", "y", "z"]
