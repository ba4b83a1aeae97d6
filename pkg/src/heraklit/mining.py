"""Counting statistics over recorded runs of the service system.

Durations are measured in logical steps: differences of event indices in the
recorder's firing order.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from heraklit.runs import ConcurrentRun, event_record

SERVED, TURNED_AWAY = "served", "turned-away"


@dataclass(frozen=True)
class LogRecord:
    index: int
    transition: str
    binding: Mapping[str, str]
    consumed: tuple[tuple[str, str], ...] = ()
    produced: tuple[tuple[str, str], ...] = ()

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "transition": self.transition,
            "binding": dict(sorted(self.binding.items())),
            "consumed": [list(p) for p in self.consumed],
            "produced": [list(p) for p in self.produced],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "LogRecord":
        return cls(
            int(doc["index"]),
            doc["transition"],
            dict(doc.get("binding", {})),
            tuple(tuple(p) for p in doc.get("consumed", ())),
            tuple(tuple(p) for p in doc.get("produced", ())),
        )


@dataclass(frozen=True)
class EventLog:
    records: tuple[LogRecord, ...] = ()
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        idx = [r.index for r in self.records]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("log indices must be strictly increasing")

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str, provenance: Mapping[str, object] | None = None) -> "EventLog":
        recs = [LogRecord.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]
        return cls(tuple(recs), dict(provenance or {}))

    @classmethod
    def from_records(cls, docs: Iterable[Mapping], provenance: Mapping[str, object] | None = None) -> "EventLog":
        return cls(tuple(LogRecord.from_json(d) for d in docs), dict(provenance or {}))


def export_log(run: ConcurrentRun, provenance: Mapping[str, object] | None = None) -> EventLog:
    """Recorder-order event log with literal bindings and token flow."""
    return EventLog.from_records((event_record(run, ev) for ev in run.events), provenance)


@dataclass(frozen=True)
class MiningProfile:
    """Which transitions and variables play which role in the analysed net."""

    arrival: str = "a"
    request: str = "b"
    served: str = "d"
    departed_unserved: str = "c"
    rejection: str = "k"
    engage: str = "f"
    release: str = "g"
    client_var: str = "c"
    service_var: str = "s"
    expert_var: str = "e"


SERVICE_PROFILE = MiningProfile()


@dataclass
class MiningReport:
    request_frequency: dict[str, int] = field(default_factory=dict)
    waiting_times: dict[str, list[dict]] = field(default_factory=dict)
    turned_away_count: int = 0
    open_requests: list[dict] = field(default_factory=list)
    expert_utilization: dict[str, float] = field(default_factory=dict)
    request_count: int = 0

    @property
    def served_count(self) -> int:
        return sum(1 for ws in self.waiting_times.values() for w in ws if w["outcome"] == SERVED)

    @property
    def departed_unserved_count(self) -> int:
        return sum(1 for ws in self.waiting_times.values() for w in ws if w["outcome"] == TURNED_AWAY)

    def to_json(self) -> dict:
        return {
            "requestFrequency": dict(sorted(self.request_frequency.items())),
            "waitingTimes": {c: list(ws) for c, ws in sorted(self.waiting_times.items())},
            "turnedAwayCount": self.turned_away_count,
            "servedCount": self.served_count,
            "requestCount": self.request_count,
            "openRequests": list(self.open_requests),
            "expertUtilization": {e: round(u, 6) for e, u in sorted(self.expert_utilization.items())},
        }

    def to_table(self) -> str:
        rows = [("section", "key", "value")]
        for s, n in sorted(self.request_frequency.items()):
            rows.append(("requests", s, str(n)))
        for c, ws in sorted(self.waiting_times.items()):
            for w in ws:
                rows.append(("waiting", c, f"{w['service']} {w['duration']} steps {w['outcome']}"))
        for o in self.open_requests:
            rows.append(("open", o["client"], f"{o['service']} since {o['since']}"))
        rows.append(("summary", "turned away", str(self.turned_away_count)))
        rows.append(("summary", "served", str(self.served_count)))
        rows.append(("summary", "requests", str(self.request_count)))
        for e, u in sorted(self.expert_utilization.items()):
            rows.append(("utilization", e, f"{u:.3f}"))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def analyze(log: EventLog, profile: MiningProfile = SERVICE_PROFILE) -> MiningReport:
    """Single pass over the log.

    A request (``b``) of client c is resolved by the next ``d`` (served) or
    ``c`` (sent away) of the same client; its waiting time is the index
    difference. Utilization of an expert is the share of the log span
    between its engagements (``f``) and releases (``g``); engagements still
    running at the end of the log count up to the last index.
    """
    p = profile
    report = MiningReport()
    freq: Counter = Counter()
    pending: dict[str, deque] = {}
    busy_since: dict[str, int] = {}
    busy: Counter = Counter()
    for rec in log.records:
        b = rec.binding
        t = rec.transition
        if t == p.arrival:
            freq[b[p.service_var]] += 1
        elif t == p.request:
            report.request_count += 1
            pending.setdefault(b[p.client_var], deque()).append((rec.index, b.get(p.service_var)))
        elif t in (p.served, p.departed_unserved):
            client = b[p.client_var]
            queue = pending.get(client)
            if queue:
                since, service = queue.popleft()
                report.waiting_times.setdefault(client, []).append(
                    {
                        "service": service,
                        "duration": rec.index - since,
                        "outcome": SERVED if t == p.served else TURNED_AWAY,
                    }
                )
        if t == p.rejection:
            report.turned_away_count += 1
        if t == p.engage:
            busy_since[b[p.expert_var]] = rec.index
        elif t == p.release:
            expert = b[p.expert_var]
            if expert in busy_since:
                busy[expert] += rec.index - busy_since.pop(expert)
    report.request_frequency = dict(freq)
    for client, queue in sorted(pending.items()):
        for since, service in queue:
            report.open_requests.append({"client": client, "service": service, "since": since})
    if log.records:
        first, last = log.records[0].index, log.records[-1].index
        for expert, since in busy_since.items():
            busy[expert] += last - since
        span = last - first
        report.expert_utilization = {e: (n / span if span else 0.0) for e, n in busy.items()}
    return report
