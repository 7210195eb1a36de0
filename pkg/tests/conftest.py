import json
import socket
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from oracle_align.alignment import Mapping, Relation
from oracle_align.ontology import load_ontology

FIXTURES = Path(__file__).parent / "fixtures"
MOUSE = "http://mouse.owl#"
NCI = "http://ncicb.nci.nih.gov/xml/owl/EVS/Thesaurus.owl#"


@pytest.fixture(scope="session")
def mouse():
    return load_ontology(FIXTURES / "mouse_mini.owl")


@pytest.fixture(scope="session")
def human():
    return load_ontology(FIXTURES / "human_mini.owl")


@pytest.fixture
def alveolus_mapping():
    return Mapping(MOUSE + "MA_0001771", NCI + "Alveolar_Epithelium", Relation.EQUIVALENCE, 0.8)


def listing(name: str) -> str:
    text = (FIXTURES / "listings" / f"{name}.txt").read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


def completion(content, prompt_tokens=50, completion_tokens=3) -> dict:
    return {
        "id": "cmpl-test",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


class MockChatServer:
    """Chat-completions stand-in.

    Replies come from ``script`` (a queue of (status, body, headers)) while it
    lasts, then from ``default(request_body)``. Every request body is recorded.
    """

    def __init__(self):
        self.script = deque()
        self.requests = []
        self.lock = threading.Lock()
        self.default = self.answer_by_parity
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("content-length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with server.lock:
                    server.requests.append({"path": self.path, "body": body,
                                            "auth": self.headers.get("authorization")})
                    item = server.script.popleft() if server.script else None
                status, payload, headers = item if item is not None else server.default(body)
                data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("content-type", "application/json")
                self.send_header("content-length", str(len(data)))
                for k, v in (headers or {}).items():
                    self.send_header(k, v)
                self.end_headers()
                self.wfile.write(data)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @staticmethod
    def answer_by_parity(body):
        """Deterministic stand-in for a model: accept prompts of even length."""
        text = body["messages"][-1]["content"]
        return 200, completion(json.dumps({"answer": len(text) % 2 == 0})), None

    def push(self, status, payload, headers=None):
        self.script.append((status, payload, headers))

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def chat_server():
    with MockChatServer() as server:
        yield server


@pytest.fixture
def no_network(monkeypatch):
    """Any attempt to open a socket fails the test."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
