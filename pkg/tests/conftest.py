import json
import subprocess
import sys

import pytest

from magfold.chain import SimParams, settle
from magfold.control import beta_start, bench_environment, execute, fig3_script
from magfold.scenarios import calibrated_model


@pytest.fixture(scope="session")
def folding_run():
    """One shared execution of the built-in folding sequence (~1 min).

    Starts from the settled flat state.  Reused by the control and
    acceptance suites so the long run happens once per test session.
    """
    model = calibrated_model()
    script = fig3_script()
    env = bench_environment()
    q0, _, _ = settle(model, beta_start(model), env)
    samples, report = execute(script, model, q0, params=SimParams(), environment=env)
    return {"model": model, "script": script, "q0": q0, "environment": env,
            "samples": samples, "report": report}


@pytest.fixture(scope="session")
def teleop_pilot(tmp_path_factory):
    """One shared teleoperated folding session over the WebSocket transport.

    A synthetic client pilots the rig from the flat state to the latched
    loop while recording, downloads the recorded script, and replays it
    through the command line.  Several minutes of compute, so the run is
    shared by the teleop and acceptance suites.
    """
    from starlette.testclient import TestClient

    from magfold.teleop import create_app
    from tests_support import pilot_phases

    out = tmp_path_factory.mktemp("teleop-pilot")
    seq = 0
    with TestClient(create_app(realtime=False)) as client:
        with client.websocket_connect("/ws") as ws:
            hello = ws.receive_json()

            def send(kind, payload=None):
                nonlocal seq
                seq += 1
                ws.send_json({"type": kind, "payload": payload or {},
                              "client_seq": seq})
                reply = ws.receive_json()
                snap = ws.receive_json()
                assert snap["type"] == "snapshot", snap
                return reply, snap

            reply, snap = send("start_recording")
            assert reply["type"] == "ack", reply
            for n, lin, ang in pilot_phases():
                reply, snap = send("set_epm_velocity",
                                   {"linear": list(lin), "angular": list(ang)})
                assert reply["type"] == "ack", reply
                for _ in range(n - 1):
                    _, snap = send("resume")
            send("set_epm_velocity", {"linear": [0, 0, 0], "angular": [0, 0, 0]})
            reply, snap = send("stop_recording", {"name": "pilot"})
            assert reply["type"] == "ack", reply
            script_doc = reply["payload"]["script"]
            final_snapshot = snap

    script_path = out / "pilot.json"
    script_path.write_text(json.dumps(script_doc, indent=2))
    cli = subprocess.run(
        [sys.executable, "-m", "magfold", "sequence",
         "--script", str(script_path), "--out", str(out / "runs")],
        capture_output=True, text=True)
    return {
        "hello": hello,
        "final_snapshot": final_snapshot,
        "script_doc": script_doc,
        "script_path": script_path,
        "cli": cli,
        "out": out,
    }
