"""Unit tests for the qutrit QKD harness."""

import logging

import numpy as np
import pytest
from timebin_gates.photonic_components import DEFAULT_LOSSES
from timebin_gates.protocols.qkd import CLICK_FLOOR, NO_CLICK, ChannelModel, click_table, qkd_run
from timebin_gates.qudit_core import QuditError

ROUNDS = 100_000


class TestChannelModel:
    """Unit tests for ChannelModel validation."""

    @pytest.mark.parametrize(
        "kwargs",
        [{"depolarizing": -0.1}, {"depolarizing": 1.5}, {"loss_db": -1.0}, {"efficiency": 1.1}],
    )
    def test_out_of_range(self, kwargs):
        """Should reject parameters outside their ranges."""
        with pytest.raises(QuditError):
            ChannelModel(**kwargs)


class TestClickTable:
    """Unit tests for click_table function."""

    def test_ideal_is_deterministic_on_matching_basis(self):
        """Should click only on the sent state's outcome when the bases match."""
        table = click_table(ChannelModel())

        for basis in range(4):
            for state in range(3):
                row = table[basis, 3 * basis + state]
                assert row[state] == pytest.approx(1.0, abs=1e-12)
                assert row.sum() == pytest.approx(1.0, abs=1e-12)
                assert np.count_nonzero(row) == 1

    def test_rounding_residue_zeroed(self):
        """Should keep no click probability between 0 and CLICK_FLOOR."""
        table = click_table(ChannelModel(loss_db=3.0, efficiency=0.9, hardware=DEFAULT_LOSSES))

        assert not np.any((table > 0) & (table < CLICK_FLOOR))

    def test_mismatched_basis_is_uniform(self):
        """Should give 1/3 per outcome across unbiased bases."""
        table = click_table(ChannelModel())

        assert np.allclose(table[2, 3 * 1 + 2], 1 / 3, atol=1e-12)

    def test_losses_scale_clicks(self):
        """Should scale click probabilities by channel and detector transmission."""
        table = click_table(ChannelModel(loss_db=10.0, efficiency=0.5))

        assert table[0, 0, 0] == pytest.approx(0.05, abs=1e-12)

    def test_hardware_losses(self):
        """Should lose light in the measurement circuits with the default profile."""
        table = click_table(ChannelModel(hardware=DEFAULT_LOSSES))

        assert table[1, 3].sum() < 1.0


class TestQkdRun:
    """Unit tests for qkd_run function."""

    def test_ideal_channel(self):
        """Should give zero QBER and a sift rate of one quarter."""
        session = qkd_run(ROUNDS, ChannelModel(), seed=1)

        assert session.errors == 0
        assert session.qber == 0.0
        assert session.sift_rate == pytest.approx(0.25, abs=0.01)

    def test_fully_depolarizing(self):
        """Should give a QBER of 2/3 at p = 1."""
        session = qkd_run(ROUNDS, ChannelModel(depolarizing=1.0), seed=2)

        assert session.qber == pytest.approx(2 / 3, abs=0.02)

    def test_partial_depolarizing(self):
        """Should give a QBER of 2p/3 at p = 0.1."""
        session = qkd_run(ROUNDS, ChannelModel(depolarizing=0.1), seed=3)

        assert session.qber == pytest.approx(0.0667, abs=0.01)

    def test_detector_efficiency(self):
        """Should halve the sift rate at efficiency 0.5."""
        session = qkd_run(ROUNDS, ChannelModel(efficiency=0.5), seed=4)

        assert session.sift_rate == pytest.approx(0.125, abs=0.01)
        assert session.qber == 0.0

    def test_per_basis_counts(self):
        """Should split sifted rounds and errors over the four bases."""
        session = qkd_run(ROUNDS, ChannelModel(depolarizing=0.3), seed=5)

        assert sum(stats.sifted for stats in session.per_basis.values()) == session.sifted
        assert sum(stats.errors for stats in session.per_basis.values()) == session.errors
        for stats in session.per_basis.values():
            assert stats.sifted > 0
            assert stats.qber == pytest.approx(0.2, abs=0.03)

    def test_reproducible(self):
        """Should give identical sessions for identical seeds."""
        first = qkd_run(20_000, ChannelModel(depolarizing=0.2), seed=42)
        second = qkd_run(20_000, ChannelModel(depolarizing=0.2), seed=42)
        other = qkd_run(20_000, ChannelModel(depolarizing=0.2), seed=43)

        assert (first.sifted, first.errors) == (second.sifted, second.errors)
        assert (first.sifted, first.errors) != (other.sifted, other.errors)

    def test_invalid_rounds(self):
        """Should reject fewer than one round."""
        with pytest.raises(QuditError):
            qkd_run(0, ChannelModel(), seed=1)

    def test_no_clicks(self, caplog):
        """Should report an undefined QBER and warn when nothing is sifted."""
        with caplog.at_level(logging.WARNING):
            session = qkd_run(1_000, ChannelModel(efficiency=0.0), seed=1)

        assert session.sifted == 0
        assert np.isnan(session.qber)
        assert "No sifted rounds" in caplog.text


class TestQkdRecords:
    """Unit tests for the per-round records."""

    def test_records_consistent(self):
        """Should keep one row per round agreeing with the totals."""
        session = qkd_run(5_000, ChannelModel(depolarizing=0.5), seed=8, keep_records=True)
        columns = session.records.columns

        assert len(session.records) == 5_000
        assert int(columns["sifted"].sum()) == session.sifted
        sifted = columns["sifted"].astype(bool)
        assert np.all(columns["alice_basis"][sifted] == columns["bob_basis"][sifted])
        assert np.all(columns["outcome"][sifted] != NO_CLICK)

    def test_no_records_by_default(self):
        """Should not keep records unless asked."""
        assert qkd_run(100, ChannelModel(), seed=1).records is None

    def test_csv(self, tmp_path):
        """Should write a header and one line per round."""
        session = qkd_run(50, ChannelModel(), seed=9, keep_records=True)
        path = tmp_path / "rounds.csv"

        session.records.to_csv(path)

        lines = path.read_text().splitlines()
        assert lines[0] == "alice_basis,alice_state,depolarized,bob_basis,outcome,sifted"
        assert len(lines) == 51

    def test_records_span_blocks(self, monkeypatch):
        """Should concatenate records across Monte Carlo blocks."""
        monkeypatch.setattr("timebin_gates.protocols.sampling.BLOCK_SIZE", 64)

        session = qkd_run(200, ChannelModel(), seed=10, keep_records=True)

        assert len(session.records) == 200
