import pytest
from hypothesis import given, strategies as st

from classdeck import oracle
from classdeck.analytics import ActivityTracker, ChartStore, rank_chart
from classdeck.errors import SessionNotStarted, UnknownRecord
from classdeck.ingest import AnalyticsEffect, Dimension
from conftest import db_with, make_record

Q1_THEMES = ("Q1", Dimension.KEY_DISCUSSION_THEMES)


def effect(kind, record_id, old=0, new=1, t=0):
    return AnalyticsEffect(
        kind=kind, record_id=record_id, chart_key=Q1_THEMES,
        group_id="g1", discussion_point="Q1", t_ms=t,
        old_frequency=old, new_frequency=new,
    )


class TestApplyRecord:
    def test_merge_tie_break_rank_change(self):
        # A at 4 (seen later), B at 3 (seen earlier); B's merge to 4 ties and
        # the earlier first_seen wins rank 1 (frozen via the scan oracle)
        a = make_record("A", frequency=4, first_seen=100, label="alpha")
        b = make_record("B", frequency=3, first_seen=50, label="beta")
        db = db_with(a, b)
        charts = ChartStore(db)
        charts.apply_record(effect("created", "A"))
        charts.apply_record(effect("created", "B"))
        b.frequency = 4
        delta = charts.apply_record(effect("merged", "B", old=3, new=4))
        assert oracle.rank_by_scan([a, b]) == ["B", "A"]
        rows = {r.record_id: r for r in delta.rows}
        assert rows["B"].old_rank == 2 and rows["B"].new_rank == 1
        assert rows["A"].old_rank == 1 and rows["A"].new_rank == 2

    def test_created_lands_at_tail_rank(self):
        a = make_record("A", frequency=5, first_seen=0)
        db = db_with(a)
        charts = ChartStore(db)
        charts.apply_record(effect("created", "A"))
        late = make_record("Z", frequency=1, first_seen=999)
        db.add(late)
        delta = charts.apply_record(effect("created", "Z"))
        z_row = next(r for r in delta.rows if r.record_id == "Z")
        assert z_row.new_rank == len(charts.snapshot(Q1_THEMES).entries)
        assert z_row.new_frequency == 1

    def test_discarded_is_empty_delta(self):
        charts = ChartStore(db_with())
        before = charts.snapshot(Q1_THEMES).version
        delta = charts.apply_record(
            AnalyticsEffect(kind="discarded", record_id=None, chart_key=None,
                            group_id="g1", discussion_point="Q1", t_ms=0)
        )
        assert delta.empty
        assert charts.snapshot(Q1_THEMES).version == before

    def test_unknown_record_raises(self):
        charts = ChartStore(db_with())
        with pytest.raises(UnknownRecord):
            charts.apply_record(effect("created", "ghost"))

    def test_versions_gap_free_and_increasing(self):
        db = db_with()
        charts = ChartStore(db)
        versions = []
        for i in range(6):
            rec = make_record(f"r{i}", frequency=1, first_seen=i)
            db.add(rec)
            delta = charts.apply_record(effect("created", f"r{i}"))
            versions.append(delta.version)
        assert versions == list(range(1, 7))


class TestRankChart:
    def test_tie_breaks_by_first_seen(self):
        a = make_record("A", frequency=5, first_seen=10, label="a")
        b = make_record("B", frequency=3, first_seen=20, label="b")
        c = make_record("C", frequency=3, first_seen=5, label="c")
        assert [r.record_id for r in rank_chart([a, b, c])] == ["A", "C", "B"]

    def test_single_entry(self):
        only = make_record("X")
        assert rank_chart([only]) == [only]

    def test_all_equal_frequencies_use_first_seen_order(self):
        records = [make_record(f"r{i}", frequency=2, first_seen=100 - i) for i in range(4)]
        ranked = [r.record_id for r in rank_chart(records)]
        assert ranked == ["r3", "r2", "r1", "r0"]

    @given(st.permutations(list(range(6))))
    def test_insertion_order_never_changes_ranking(self, order):
        freqs = [4, 4, 2, 7, 2, 1]
        seen = [9, 3, 5, 1, 5, 2]
        records = [
            make_record(f"r{i}", frequency=freqs[i], first_seen=seen[i], label=f"l{i}")
            for i in range(6)
        ]
        shuffled = [records[i] for i in order]
        assert [r.record_id for r in rank_chart(shuffled)] == oracle.rank_by_scan(records)


class TestActivity:
    def test_nine_group_session_zero_active(self):
        tracker = ActivityTracker(roster_size=9, duration_ms=600_000)
        tracker.start()
        signal = tracker.activity_level("Q1", 300_000)
        assert signal.active_group_fraction == 0.0
        assert signal.active_group_fraction < 0.10

    def test_all_groups_active(self):
        tracker = ActivityTracker(roster_size=3, duration_ms=600_000)
        for g in ("g1", "g2", "g3"):
            tracker.note("Q1", g, 10_000)
        assert tracker.activity_level("Q1", 20_000).active_group_fraction == 1.0

    def test_remaining_time_at_nine_minutes(self):
        tracker = ActivityTracker(roster_size=9, duration_ms=600_000)
        tracker.start()
        assert tracker.activity_level("Q1", 540_000).remaining_ms == 60_000

    def test_remaining_floors_at_zero(self):
        tracker = ActivityTracker(roster_size=2, duration_ms=600_000)
        tracker.start()
        assert tracker.activity_level("Q1", 700_000).remaining_ms == 0

    def test_window_excludes_old_utterances(self):
        tracker = ActivityTracker(roster_size=2, duration_ms=600_000, window_ms=60_000)
        tracker.note("Q1", "g1", 10_000)
        assert tracker.activity_level("Q1", 69_000).active_group_fraction == 0.5
        assert tracker.activity_level("Q1", 71_000).active_group_fraction == 0.0

    def test_not_started_raises(self):
        tracker = ActivityTracker(roster_size=2, duration_ms=600_000)
        with pytest.raises(SessionNotStarted):
            tracker.activity_level("Q1", 0)


class TestVisibility:
    def test_default_visible_charts(self, engine):
        from conftest import say

        say(engine, 1_000, "g1", "Q1",
            "training data with bias shapes every model decision pipeline")
        visible = {
            s.dimension for s in engine.charts.snapshots() if s.visible_by_default
        }
        hidden = {
            s.dimension for s in engine.charts.snapshots() if not s.visible_by_default
        }
        assert Dimension.KEY_DISCUSSION_THEMES in visible
        assert Dimension.TECH_TOPICS in visible
        assert Dimension.ETHICAL_CONCEPTS in visible
        assert hidden <= {Dimension.ETHICAL_FRAMEWORKS_USED, Dimension.DIMENSIONS_OF_ANALYSIS}
