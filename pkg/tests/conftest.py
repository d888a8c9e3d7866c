import numpy as np
import pytest

from classdeck.config import DiscussionPoint, SessionConfig
from classdeck.engine import Engine
from classdeck.ingest import AnalyticsDB, AnalyticsRecord, Dimension, DiscourseAttrs


def small_config(**overrides) -> SessionConfig:
    defaults = dict(
        session_id="t1",
        title="unit test session",
        duration_min=10,
        roster=("g1", "g2", "g3"),
        discussion_points=(DiscussionPoint("Q1"), DiscussionPoint("Q2"), DiscussionPoint("Q3")),
    )
    defaults.update(overrides)
    return SessionConfig(**defaults)


@pytest.fixture
def config() -> SessionConfig:
    return small_config()


@pytest.fixture
def engine(config) -> Engine:
    return Engine(config)


def make_record(
    record_id: str,
    *,
    point: str = "Q1",
    dimension: Dimension = Dimension.KEY_DISCUSSION_THEMES,
    label: str = "",
    frequency: int = 1,
    time_ms: int = 1_000,
    groups=("g1",),
    first_seen: int = 0,
    cs=(),
    ethics=(),
    **attr_flags,
) -> AnalyticsRecord:
    return AnalyticsRecord(
        record_id=record_id,
        discussion_point=point,
        dimension=dimension,
        topic_label=label or f"topic {record_id}",
        embedding=np.zeros(8),
        frequency=frequency,
        cumulative_time_ms=time_ms,
        contributing_groups=set(groups),
        attrs=DiscourseAttrs(**attr_flags),
        cs_keywords=set(cs),
        ethics_keywords=set(ethics),
        first_seen_ms=first_seen,
    )


def db_with(*records: AnalyticsRecord) -> AnalyticsDB:
    db = AnalyticsDB()
    for r in records:
        db.add(r)
    return db


def say(engine: Engine, t_ms: int, group: str, point: str, text: str, token_count=None):
    payload = {"t_ms": t_ms, "group": group, "q": point, "text": text}
    if token_count is not None:
        payload["token_count"] = token_count
    return engine.ingest(payload)
