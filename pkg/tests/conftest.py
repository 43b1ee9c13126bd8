from __future__ import annotations

import pytest

from chatnet.backend import BackendBinding, ReplayList, make_policy
from chatnet.session import make_sessions
from chatnet.tasks.dmc import DmcTask
from chatnet.topology import NodeRef, build_network
from chatnet.trainer import Network

ACCEPTANCE: dict[int, dict] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None and (report.when == "call" or not report.passed):
        number, title = mark.args
        entry = ACCEPTANCE.setdefault(number, {"title": title, "verdicts": [], "details": []})
        entry["verdicts"].append("SKIP" if report.skipped else ("PASS" if report.passed else "FAIL"))
        entry["details"] += [str(v) for k, v in item.user_properties if k == "detail"]
        if report.skipped and isinstance(report.longrepr, tuple):
            entry["details"].append(report.longrepr[-1].removeprefix("Skipped: "))
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        e = ACCEPTANCE[number]
        v = e["verdicts"]
        verdict = "FAIL" if "FAIL" in v else ("PASS" if "PASS" in v else "SKIP")
        suffix = f" ({'; '.join(e['details'])})" if e["details"] else ""
        terminalreporter.write_line(f"[{verdict}] {number:>2}. {e['title']}{suffix}")


def scripted(name: str, seed: int = 0, **params) -> BackendBinding:
    return BackendBinding.scripted_policy(make_policy(name, **params), seed)


def replay(*replies: str, label: str = "replay") -> BackendBinding:
    return BackendBinding.scripted_policy(ReplayList(list(replies), label=label))


def make_net(widths, rate, bindings: dict, instruction: str | None = None, **opts) -> Network:
    topo = build_network(list(widths), rate)
    bound = {}
    for n in topo:
        b = bindings.get(n) or bindings.get(n.key()) or bindings.get("default")
        bound[n] = b() if callable(b) else b
    return Network(topo, make_sessions(topo, bound, "network", instruction), **opts)


@pytest.fixture
def task() -> DmcTask:
    return DmcTask()


N = NodeRef
