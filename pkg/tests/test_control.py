import time

import pytest

from ibsync import SynthConfig
from ibsync.control import ControlChannelServer, accept_key
from ibsync.engine import Engine
from ibsync.pipeline import EngineConfig

from wsclient import WsTestClient


def test_accept_key_matches_rfc_example():
    # Handshake vector from the protocol's own specification document.
    assert accept_key("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo="


@pytest.fixture()
def live_engine():
    engine = Engine(EngineConfig())
    server = ControlChannelServer(engine, port=0).start()
    engine.start_synth(SynthConfig(duration_s=30.0, coupling=0.0), seed=1, speed=10.0,
                       dispatch=False)
    yield engine, server
    engine.stop()
    server.stop()


class TestControlChannel:
    def test_hello_then_updates_flow(self, live_engine):
        _, server = live_engine
        client = WsTestClient(server.port)
        hello = client.recv_json()
        assert hello["type"] == "hello"
        assert hello["state"]["condition"] == "No Feedback"
        update = client.recv_until(lambda m: m["type"] == "update")
        assert update["level"] in range(1, 6)
        assert "value" in update and "epoch_start_us" in update
        client.close()

    def test_set_condition_ack_and_rejection_mid_trial(self, live_engine):
        _, server = live_engine
        client = WsTestClient(server.port)
        client.send_json({"cmd": "set_condition", "condition": "Auditory"})
        ack = client.recv_until(lambda m: m["type"] == "ack")
        assert ack["ok"] and ack["state"]["condition"] == "Auditory"
        assert ack["state"]["modality"] == "auditory"

        client.send_json({"cmd": "mark_trial", "action": "start"})
        ack = client.recv_until(lambda m: m["type"] == "ack")
        assert ack["ok"] and ack["state"]["trial_open"]

        client.send_json({"cmd": "set_condition", "condition": "Visual"})
        ack = client.recv_until(lambda m: m["type"] == "ack")
        assert not ack["ok"]
        assert "trial" in ack["error"]
        assert ack["state"]["condition"] == "Auditory"  # unchanged
        client.close()

    def test_set_synth_coupling_acknowledged(self, live_engine):
        engine, server = live_engine
        client = WsTestClient(server.port)
        client.send_json({"cmd": "set_synth_coupling", "value": 0.9})
        ack = client.recv_until(lambda m: m["type"] == "ack")
        assert ack["ok"]
        assert ack["state"]["coupling"] == 0.9
        assert engine.synth_source.coupling == 0.9
        client.close()

    def test_unknown_command_rejected(self, live_engine):
        _, server = live_engine
        client = WsTestClient(server.port)
        client.send_json({"cmd": "self_destruct"})
        ack = client.recv_until(lambda m: m["type"] == "ack")
        assert not ack["ok"]
        client.close()

    def test_invalid_coupling_rejected(self, live_engine):
        _, server = live_engine
        client = WsTestClient(server.port)
        client.send_json({"cmd": "set_synth_coupling", "value": 7})
        ack = client.recv_until(lambda m: m["type"] == "ack")
        assert not ack["ok"]
        client.close()

    def test_reconnect_gets_snapshot(self, live_engine):
        _, server = live_engine
        first = WsTestClient(server.port)
        first.recv_until(lambda m: m["type"] == "update")
        first.close()
        time.sleep(0.3)
        second = WsTestClient(server.port)
        hello = second.recv_json()
        assert hello["type"] == "hello"
        # last published update replays immediately on connect
        update = second.recv_until(lambda m: m["type"] == "update")
        assert update["epoch_start_us"] >= 0
        second.close()

    def test_two_clients_both_receive_broadcasts(self, live_engine):
        _, server = live_engine
        c1, c2 = WsTestClient(server.port), WsTestClient(server.port)
        u1 = c1.recv_until(lambda m: m["type"] == "update")
        u2 = c2.recv_until(lambda m: m["type"] == "update")
        assert u1["type"] == u2["type"] == "update"
        c1.close()
        c2.close()
