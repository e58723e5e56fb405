import json

import httpx
import pytest

from vadtree.backends import (BackendRequest, EndpointConfig, FixtureBackend, HttpBackend,
                              MockBackend, make_backend)
from vadtree.errors import (BackendUnavailable, FixtureMiss, InvalidInput, RequestRejected)

from stub_server import chat_body, stub_server


def http_backend(base, **kw):
    sleeps = []
    cfg = EndpointConfig(base_url=base, api_key="k", caption_model="vlm", score_model="llm",
                         timeout=5, **kw)
    return HttpBackend(cfg, sleep=sleeps.append), sleeps


SCORE = BackendRequest("score", "rate this", video_id="v", node_id="v:1-5")


class TestHttpBackend:
    def test_payload_and_headers(self):
        with stub_server(lambda i, p: (200, chat_body("[0.3]"))) as (base, log):
            b, _ = http_backend(base)
            resp = b.complete(SCORE)
        assert resp.text == "[0.3]" and resp.backend_name == "http"
        assert resp.token_usage == {"prompt_tokens": 3, "completion_tokens": 1}
        req = log[0]
        assert req["path"] == "/v1/chat/completions"
        assert req["headers"]["Authorization"] == "Bearer k"
        assert req["json"]["model"] == "llm"
        assert req["json"]["temperature"] == 0.0
        assert [m["role"] for m in req["json"]["messages"]] == ["system", "user"]
        assert req["json"]["messages"][1]["content"] == "rate this"

    def test_caption_uses_vision_model_and_attaches_frames(self, tmp_path):
        frames = []
        for i in (1, 3):
            f = tmp_path / f"{i:06d}.jpg"
            f.write_bytes(b"\xff\xd8jpeg")
            frames.append(str(f))
        req = BackendRequest("caption", "describe", frames, video_id="v", node_id="v:1-3")
        with stub_server(lambda i, p: (200, chat_body("a street"))) as (base, log):
            b, _ = http_backend(base)
            b.complete(req)
        body = log[0]["json"]
        assert body["model"] == "vlm"
        parts = body["messages"][1]["content"]
        assert parts[0] == {"type": "text", "text": "describe"}
        assert all(p["image_url"]["url"].startswith("data:image/jpeg;base64,") for p in parts[1:])
        assert len(parts) == 3

    def test_retry_on_429(self):
        script = lambda i, p: (429, {"error": "slow down"}) if i < 2 else (200, chat_body("[1]"))
        with stub_server(script) as (base, log):
            b, sleeps = http_backend(base)
            assert b.complete(SCORE).text == "[1]"
        assert len(log) == 3 and sleeps == [1.0, 4.0]

    def test_no_retry_on_401(self):
        with stub_server(lambda i, p: (401, {"error": "bad key"})) as (base, log):
            b, sleeps = http_backend(base)
            with pytest.raises(RequestRejected) as err:
                b.complete(SCORE)
        assert err.value.status_code == 401
        assert len(log) == 1 and sleeps == []

    def test_gives_up_after_backoff_schedule(self):
        with stub_server(lambda i, p: (503, {})) as (base, log):
            b, sleeps = http_backend(base)
            with pytest.raises(BackendUnavailable, match="4 attempts"):
                b.complete(SCORE)
        assert len(log) == 4 and sleeps == [1.0, 4.0, 16.0]

    def test_transport_error_retried(self):
        calls = []

        def handler(request):
            calls.append(request)
            if len(calls) == 1:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json=chat_body("[0.5]"))

        sleeps = []
        b = HttpBackend(EndpointConfig(base_url="http://x/v1"),
                        client=httpx.Client(transport=httpx.MockTransport(handler)),
                        sleep=sleeps.append)
        assert b.complete(SCORE).text == "[0.5]"
        assert sleeps == [1.0]

    def test_malformed_body(self):
        with stub_server(lambda i, p: (200, {"nope": 1})) as (base, _):
            b, _ = http_backend(base, backoff=())
            with pytest.raises(BackendUnavailable, match="malformed"):
                b.complete(SCORE)

    def test_needs_base_url(self):
        with pytest.raises(InvalidInput):
            HttpBackend(EndpointConfig())

    def test_env_config(self):
        cfg = EndpointConfig.from_env({"VADTREE_API_BASE": "http://h/v1",
                                       "VADTREE_MODEL_SCORE": "m"}, timeout=3.0)
        assert (cfg.base_url, cfg.score_model, cfg.timeout) == ("http://h/v1", "m", 3.0)


class TestOfflineBackends:
    def test_mock_is_deterministic(self):
        a = MockBackend().complete(SCORE).text
        assert a == MockBackend().complete(SCORE).text
        assert a.startswith("[") and a.endswith("]")
        cap = BackendRequest("caption", "describe", video_id="v", node_id="v:12-40")
        assert MockBackend().complete(cap).text == "segment 12-40 synthetic caption"

    def test_fixture_file_and_miss(self, tmp_path):
        p = tmp_path / "f.json"
        p.write_text(json.dumps({"replies": {"v": {"v:1-5": {"score": "[0.2]"}}}}))
        b = make_backend("fixture", p)
        assert b.complete(SCORE).text == "[0.2]"
        with pytest.raises(FixtureMiss):
            b.complete(BackendRequest("caption", "x", video_id="v", node_id="v:1-5"))
        assert b.identity() == FixtureBackend.from_file(p).identity()

    def test_request_validation(self):
        with pytest.raises(InvalidInput):
            BackendRequest("score", "x", frame_refs=["a.jpg"])
        with pytest.raises(InvalidInput):
            BackendRequest("embed", "x")
        with pytest.raises(InvalidInput):
            make_backend("grpc")
