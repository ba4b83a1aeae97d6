import pytest

from heraklit.mining import EventLog, LogRecord, MiningProfile, analyze, export_log
from heraklit.runs import simulate

from casestudy import HAPPY, REJECTION, REJECTION_ROOMS, arrivals, flat_net

NET = flat_net()


def recount(run):
    """Statistics straight from the run's events, without the single-pass analyzer."""
    evs = [(e.index, e.transition, {n: v.name for n, v in e.binding.items()}) for e in run.events]
    used = set()
    waits = {}
    for i, t, b in evs:
        if t != "b":
            continue
        for j, u, b2 in evs:
            if j > i and j not in used and u in ("c", "d") and b2["c"] == b["c"]:
                used.add(j)
                waits.setdefault(b["c"], []).append(
                    {"service": b["s"], "duration": j - i, "outcome": "served" if u == "d" else "turned-away"}
                )
                break
    span = evs[-1][0] - evs[0][0] if evs else 0
    busy = {}
    for i, t, b in evs:
        if t == "f":
            end = next((j for j, u, b2 in evs if j > i and u == "g" and b2["e"] == b["e"]), evs[-1][0])
            busy[b["e"]] = busy.get(b["e"], 0) + end - i
    services = [b["s"] for _, t, b in evs if t == "a"]
    return {
        "turned_away": sum(1 for _, t, _ in evs if t == "k"),
        "frequency": {s: services.count(s) for s in set(services)},
        "waits": waits,
        "utilization": {e: n / span for e, n in busy.items()} if span else {},
    }


def check_against_recount(run):
    report = analyze(export_log(run))
    expected = recount(run)
    assert report.turned_away_count == expected["turned_away"]
    assert report.request_frequency == expected["frequency"]
    assert report.waiting_times == expected["waits"]
    assert report.expert_utilization == pytest.approx(expected["utilization"])
    return report


def test_one_client_served():
    run = simulate(NET, HAPPY).run
    report = check_against_recount(run)
    assert report.request_frequency == {"s1": 1}
    assert report.turned_away_count == 0
    assert report.waiting_times == {"c1": [{"service": "s1", "duration": 3, "outcome": "served"}]}
    assert report.expert_utilization == {"e1": 0.5}
    assert report.open_requests == []


def test_second_s1_client_turned_away():
    """Seed 0: c2's request is decided while e1 is consulting c1."""
    run = simulate(NET, arrivals(("c1", "s1"), ("c2", "s1"), seed=0)).run
    report = check_against_recount(run)
    assert report.turned_away_count == 1
    assert report.served_count == 1 and report.departed_unserved_count == 1
    assert report.request_frequency == {"s1": 2}


def test_rejection_scenario_counts_match_k():
    run = simulate(flat_net(REJECTION_ROOMS), REJECTION).run
    report = check_against_recount(run)
    assert report.turned_away_count == [e.transition for e in run.events].count("k") == 1


@pytest.mark.parametrize("seed", range(15))
def test_random_runs_agree_with_recount(seed):
    scenario = arrivals(("c1", "s2"), ("c2", "s1"), ("c3", "s2"), seed=seed)
    check_against_recount(simulate(flat_net(REJECTION_ROOMS), scenario).run)


def test_empty_log_is_all_zero():
    report = analyze(EventLog())
    assert report.to_json() == {
        "expertUtilization": {},
        "openRequests": [],
        "requestCount": 0,
        "requestFrequency": {},
        "servedCount": 0,
        "turnedAwayCount": 0,
        "waitingTimes": {},
    }


def test_orphaned_request_is_open():
    run = simulate(NET, arrivals(("c1", "s1"), max_steps=2)).run  # a, b and nothing more
    report = analyze(export_log(run))
    assert report.open_requests == [{"client": "c1", "service": "s1", "since": 1}]
    assert report.waiting_times == {}
    assert report.request_count == 1


def test_jsonl_round_trip():
    log = export_log(simulate(NET, HAPPY).run, {"seed": 7})
    back = EventLog.from_jsonl(log.to_jsonl(), log.provenance)
    assert back == log
    assert len(back.records) == 9


def test_indices_must_increase():
    with pytest.raises(ValueError, match="strictly increasing"):
        EventLog((LogRecord(1, "a", {}), LogRecord(1, "b", {})))


def test_custom_profile():
    log = EventLog((LogRecord(0, "arrive", {"who": "x", "what": "q"}),))
    profile = MiningProfile(arrival="arrive", client_var="who", service_var="what")
    assert analyze(log, profile).request_frequency == {"q": 1}


def test_table_rendering():
    table = analyze(export_log(simulate(NET, HAPPY).run)).to_table()
    lines = table.splitlines()
    assert lines[0].split() == ["section", "key", "value"]
    assert "waiting      c1           s1 3 steps served" in table
    assert lines[-1].split() == ["utilization", "e1", "0.500"]
