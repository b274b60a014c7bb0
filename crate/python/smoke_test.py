"""Smoke test for the labbench Python bindings.

Build and install first:
    pip install --no-build-isolation -e crates/py
then run with pytest or plain python.
"""

import pathlib
import tempfile

import labbench

ROOT = pathlib.Path(__file__).resolve().parent.parent
CAMPUS = ROOT / "scenarios" / "campus"

PAIR = """\
device A host
 interface eth0
  ip address 10.0.0.1 255.255.255.0
device B host
 interface eth0
  ip address 10.0.0.2 255.255.255.0
link A:eth0 B:eth0 bandwidth 10mbps delay 0ms queue 64
"""


def test_topology_round_trip():
    topo = labbench.Topology.parse((CAMPUS / "topology.cfg").read_text())
    assert labbench.Topology.parse(topo.emit()) == topo
    subs = {name: (addr, vlan) for name, addr, vlan in topo.interfaces("R1") if vlan}
    assert subs["FastEthernet0/1.101"] == ("192.168.101.1/24", 101)
    warnings, routes = topo.validate()
    assert "R1" in dict(routes)


def test_bad_topology_raises():
    try:
        labbench.Topology.parse("device R1 router\n bogus\n")
    except ValueError as e:
        assert "line 2" in str(e)
    else:
        raise AssertionError("expected ValueError")


def test_one_frame_takes_1_2_ms():
    w = labbench.Workload.generate(1500, 1, interval=1.0, src="A", dst="B")
    engine = labbench.Scenario(PAIR, w.emit()).engine(interval=None)
    engine.run(1.0)
    [(fid, status, latency, reason, delivered)] = engine.flows()
    assert (fid, status, latency, delivered) == (0, "completed", 0.0012, 1500)


def test_generation_is_seeded():
    a = labbench.Workload.generate([100, 200, 200], 50, rate=2.0, seed=42)
    b = labbench.Workload.generate([100, 200, 200], 50, rate=2.0, seed=42)
    c = labbench.Workload.generate([100, 200, 200], 50, rate=2.0, seed=43)
    assert a == b and a != c
    assert len(a) == 50 and a.seed == 42
    assert labbench.Workload.parse(a.emit()) == a


def test_campus_run_from_files():
    with tempfile.TemporaryDirectory() as out:
        summary = labbench.run_scenario(
            str(CAMPUS / "topology.cfg"),
            str(CAMPUS / "workload.txt"),
            out,
            120.0,
            control=str(CAMPUS / "control.ctl"),
        )
        assert summary.splitlines()[-1].startswith("conservation: PASS")
        rows = labbench.read_stats((pathlib.Path(out) / "stats.csv").read_text())
        net = [r for r in rows if r[1] == "net" and r[2] == "flows_completed"]
        assert net[-1][3] == 100.0


def test_engine_matches_file_run():
    scenario = labbench.Scenario(
        (CAMPUS / "topology.cfg").read_text(),
        (CAMPUS / "workload.txt").read_text(),
        (CAMPUS / "control.ctl").read_text(),
    )
    engine = scenario.simulate(120.0)
    counters = engine.counters()
    assert counters["injected"] == counters["delivered"] + counters["dropped"] + counters["in_flight"]
    passed, verdict = engine.conservation()
    assert passed, verdict
    # stats.csv keeps six fractional digits
    rounded = [(round(t, 6), o, m, round(v, 6)) for t, o, m, v in engine.samples()]
    assert labbench.read_stats(engine.stats_csv()) == rounded


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"{name}: ok")
