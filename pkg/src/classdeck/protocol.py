"""Wire protocol: message kinds and framing.

Messages are JSON objects with a ``kind`` field. Over WebSocket each
message is one text frame; over raw TCP (headless tests) each message is
one line of JSON. docs/protocol.md documents every payload.
"""

from __future__ import annotations

import json

from classdeck.errors import ProtocolViolation

PROTOCOL_VERSION = 1

# server -> client
SERVER_KINDS = frozenset(
    {
        "SnapshotSync",
        "ChartUpdate",
        "BindingEvent",
        "DeckDelta",
        "SuggestionAvailable",
        "SuggestionResolved",
        "Toast",
        "CommandResult",
        "Error",
    }
)

# client -> server
CLIENT_KINDS = frozenset(
    {
        "Hello",
        "Command",
        "Edit",
        "History",
        "ResolveSuggestion",
        "ToggleBinding",
        "Viewport",
        "Utterance",
        "Playback",
        "Resync",
    }
)


def encode(message: dict) -> str:
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


def decode(raw: str | bytes) -> dict:
    try:
        message = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"not JSON: {exc}") from exc
    if not isinstance(message, dict) or "kind" not in message:
        raise ProtocolViolation("message must be an object with a 'kind'")
    if message["kind"] not in CLIENT_KINDS and message["kind"] not in SERVER_KINDS:
        raise ProtocolViolation(f"unknown message kind {message['kind']!r}")
    return message
