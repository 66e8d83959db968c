"""Tests for the out-of-process authority adapter bridge."""

import dataclasses
import json
import socketserver
import threading

import pytest

from vesselsim.config import OperatorConfig, PolicyConfig, RunConfig, TaskConfig
from vesselsim.control import ExternalPolicy
from vesselsim.errors import AdapterTimeoutError, MalformedReplyError
from vesselsim.phantom import SafetySnapshot
from vesselsim.simulate import run_trial

SAFE = SafetySnapshot(min_wall_dist=5.0, occlusion_iou=1.0, curvature=0.0, bifurcation_dist=1e6)


class _AdapterHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                return
            request = json.loads(line)
            reply = self.server.reply_fn(request)
            if reply is None:
                return  # go silent: simulate a hung adapter
            self.wfile.write((json.dumps(reply) + "\n").encode())
            self.wfile.flush()


class AdapterServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, reply_fn):
        super().__init__(("127.0.0.1", 0), _AdapterHandler)
        self.reply_fn = reply_fn


@pytest.fixture()
def adapter():
    servers = []

    def start(reply_fn):
        server = AdapterServer(reply_fn)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return server.server_address[1]

    yield start
    for s in servers:
        s.shutdown()
        s.server_close()


def relaxed_intent():
    from vesselsim.control import IntentPipeline

    return IntentPipeline(f_baseline=1.0, f_override=5.0).update((1.0, 1.0), 0.033)


class TestExternalPolicy:
    def test_echo_constant_chunk(self, adapter):
        port = adapter(lambda req: {"chunk": [[0.3, 0.3]] * 5})
        policy = ExternalPolicy(port=port, timeout_ms=500)
        chunk = policy.step(SAFE, relaxed_intent(), 10.0, 0)
        assert (chunk.values == 0.3).all()
        assert policy.drain_warnings() == []
        policy.close()

    def test_request_schema(self, adapter):
        seen = {}

        def reply(req):
            seen.update(req)
            return {"chunk": [[0.1, 0.2]] * 5}

        port = adapter(reply)
        policy = ExternalPolicy(port=port, timeout_ms=500)
        policy.step(SAFE, relaxed_intent(), 12.5, 7)
        policy.close()
        assert seen["tick"] == 7
        assert seen["goal_dist"] == 12.5
        assert set(seen["safety"]) == {"d_min", "iou", "curvature", "bifurcation_dist"}
        assert len(seen["intent"]) == 2
        assert set(seen["intent"][0]) == {"f", "df", "sigma"}

    def test_out_of_bound_reply_rejected(self, adapter):
        port = adapter(lambda req: {"chunk": [[1.2, 0.0]] * 5})
        policy = ExternalPolicy(port=port, timeout_ms=500)
        with pytest.raises(MalformedReplyError):
            policy.step(SAFE, relaxed_intent(), 10.0, 0)
        policy.close()

    def test_wrong_shape_rejected(self, adapter):
        port = adapter(lambda req: {"chunk": [0.3, 0.3]})
        policy = ExternalPolicy(port=port, timeout_ms=500)
        with pytest.raises(MalformedReplyError):
            policy.step(SAFE, relaxed_intent(), 10.0, 0)
        policy.close()

    def test_silent_adapter_falls_back_with_warning(self, adapter):
        port = adapter(lambda req: None)  # never answers
        policy = ExternalPolicy(port=port, timeout_ms=50)
        chunk = policy.step(SAFE, relaxed_intent(), 10.0, 3)
        assert (chunk.values == 0.5).all()  # fixed-baseline fallback
        warnings = policy.drain_warnings()
        assert len(warnings) == 1 and "tick 3" in warnings[0]
        assert policy.drain_warnings() == []
        policy.close()

    def test_unreachable_adapter_raises_at_connect(self):
        with pytest.raises(AdapterTimeoutError):
            ExternalPolicy(port=1, timeout_ms=50)

    def test_trial_logs_fallback_warning_events(self, adapter):
        calls = {"n": 0}

        def flaky(req):
            calls["n"] += 1
            if calls["n"] == 5:
                return None  # hang exactly once
            return {"chunk": [[0.4, 0.4]] * 5}

        port = adapter(flaky)
        cfg = dataclasses.replace(
            RunConfig(),
            policy=PolicyConfig(id="external", adapter_port=port, adapter_timeout_ms=100),
            operator=OperatorConfig(noise_std=0.0, noise_corr_s=0.0),
            task=TaskConfig(tier="easy"),
        )
        log = run_trial(cfg)
        warnings = [
            e for r in log.records for e in r.events if e.get("type") == "warning"
        ]
        assert warnings and "fell back" in warnings[0]["message"]
