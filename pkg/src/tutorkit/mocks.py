"""Deterministic offline stand-ins for chat/embedding providers.

Two flavors: in-process providers (used by ``--mock-providers``) and a
threaded OpenAI-compatible HTTP server that records every request body, so
integration tests can assert exact wire payloads and count calls.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Sequence

from .providers import Message

# re-exported for convenience: the deterministic embedding mock lives with
# the embedding code it stands in for.
from .embedding import DeterministicEmbeddingProvider  # noqa: F401


class ScriptedChatProvider:
    """Chat provider that replays a queue of replies (or calls a handler).

    With neither queue nor handler it echoes a short deterministic summary
    of the last user message. Thread-safe; records every call.
    """

    def __init__(
        self,
        replies: Sequence[str] | None = None,
        handler: Callable[[list[Message]], str] | None = None,
        *,
        cycle: bool = False,
    ):
        self._replies = list(replies) if replies else []
        self._handler = handler
        self._cycle = cycle
        self._lock = threading.Lock()
        self.calls: list[list[Message]] = []

    def complete(
        self,
        model: str,
        messages: Sequence[Message],
        *,
        temperature: float | None = None,
        top_p: float | None = None,
        max_tokens: int | None = None,
        extra: dict | None = None,
    ) -> str:
        with self._lock:
            self.calls.append(list(messages))
            if self._replies:
                if self._cycle:
                    reply = self._replies[(len(self.calls) - 1) % len(self._replies)]
                else:
                    reply = self._replies.pop(0)
                return reply
        if self._handler is not None:
            return self._handler(list(messages))
        last_user = next(
            (m["content"] for m in reversed(messages) if m["role"] == "user"), ""
        )
        return f"(mock reply to: {last_user[:60]})"

    def is_reachable(self) -> bool:
        return True


_CONTEXT_VIDEO = re.compile(r"^Video (\d+), time (\d{1,4}:[0-5]\d):$", re.MULTILINE)
_CONTEXT_SECTION = re.compile(r"^Section (\d+) \((.*)\):$", re.MULTILINE)


def mock_expert_handler(messages: list[Message]) -> str:
    query = next(
        (m["content"] for m in reversed(messages) if m["role"] == "user"), ""
    )
    return (
        "In this course we approach the question as follows. "
        f"Regarding '{query.strip()}': start from the weak form and build up the "
        "discrete system step by step, as done in lecture."
    )


def mock_synthesis_handler(messages: list[Message]) -> str:
    """Answer citing the first video/section context blocks, or refuse with
    the insufficiency sentinel when no context blocks are present."""
    user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
    videos = _CONTEXT_VIDEO.findall(user)
    sections = _CONTEXT_SECTION.findall(user)
    refs = []
    if videos:
        number, stamp = videos[0]
        refs.append(f"Video {number}, time {stamp}")
    if sections:
        number, _title = sections[0]
        refs.append(f"Section {number}")
    if not refs:
        return (
            "NOT_ENOUGH_INFO The provided context doesn't contain enough "
            "information to fully answer this question. You may want to "
            "increase the number of relevant context passages or adjust the "
            "options and try again."
        )
    joined = "; ".join(refs)
    return (
        "Based on the course material, the key idea is developed directly "
        f"from the referenced passages [**{joined}**]."
    )


def mock_question_handler(messages: list[Message]) -> str:
    source = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
    tag = hashlib.sha256(source.encode("utf-8")).hexdigest()[:8]
    items = [
        {
            "question": f"Explain the main concept discussed in passage {tag} "
            "and how it is applied.",
            "coverage": 90,
        },
        {
            "question": f"What assumptions underlie the derivation in passage {tag}?",
            "coverage": 60,
        },
    ]
    return json.dumps(items)


def mock_answer_handler(messages: list[Message]) -> str:
    user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
    snippet = " ".join(user.split()[:24])
    return f"Based exclusively on the provided context: {snippet} ..."


def mock_coding_qa_handler(messages: list[Message]) -> str:
    user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
    tag = hashlib.sha256(user.encode("utf-8")).hexdigest()[:8]
    return (
        f"Q: For the assignment context {tag}, what does the class constructor "
        "look like when solving the problem with the finite element library?\n"
        "A: The constructor wires the basis order and problem id:\n"
        "```\n"
        "FEM<dim>::FEM(unsigned int order, unsigned int problem)\n"
        "  : fe(order), dof_handler(triangulation) {}\n"
        "```\n"
        "\n"
        f"Q: Which member function of the solver {tag} applies the boundary "
        "conditions before the solve step?\n"
        "A: The apply_boundary_conditions() member fixes the constrained rows "
        "and moves known values to the right-hand side.\n"
    )


def mock_judge_handler(messages: list[Message]) -> str:
    user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
    pick = ["model 1", "model 2", "both", "neither"][
        int(hashlib.sha256(user.encode("utf-8")).hexdigest(), 16) % 4
    ]
    return json.dumps({"winner": pick, "justification": "deterministic mock verdict"})


@dataclass
class CapturedRequest:
    path: str
    body: dict
    headers: dict = field(default_factory=dict)


class MockOpenAIServer:
    """Threaded OpenAI-compatible server for chat completions and embeddings.

    Chat replies come from a scripted queue, then a handler, then a default
    echo. ``fail_next(n)`` makes the next n requests return HTTP 500 so
    retry/outage paths can be exercised.
    """

    def __init__(
        self,
        chat_handler: Callable[[list[Message]], str] | None = None,
        embedding_dim: int = 8,
    ):
        self.requests: list[CapturedRequest] = []
        self._chat_replies: list[str] = []
        self._chat_handler = chat_handler
        self._failures_left = 0
        self._embedding = DeterministicEmbeddingProvider(dim=embedding_dim)
        self._lock = threading.Lock()
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- scripting --------------------------------------------------------

    def script_chat_replies(self, replies: Sequence[str]) -> None:
        with self._lock:
            self._chat_replies.extend(replies)

    def fail_next(self, n: int) -> None:
        with self._lock:
            self._failures_left = n

    def request_count(self, path_suffix: str | None = None) -> int:
        if path_suffix is None:
            return len(self.requests)
        return sum(1 for r in self.requests if r.path.endswith(path_suffix))

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "MockOpenAIServer":
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                with server._lock:
                    server.requests.append(
                        CapturedRequest(self.path, body, dict(self.headers))
                    )
                    if server._failures_left > 0:
                        server._failures_left -= 1
                        self._respond(500, {"error": "scripted failure"})
                        return
                if self.path.endswith("/embeddings"):
                    values = server._embedding.embed_text(
                        body.get("model", ""), body.get("input", "")
                    )
                    self._respond(200, {"data": [{"embedding": values}]})
                elif self.path.endswith("/chat/completions"):
                    reply = server._next_chat_reply(body.get("messages", []))
                    self._respond(
                        200,
                        {
                            "choices": [
                                {"message": {"role": "assistant", "content": reply}}
                            ]
                        },
                    )
                else:
                    self._respond(404, {"error": f"unknown path {self.path}"})

            def do_HEAD(self) -> None:  # noqa: N802
                self.send_response(200)
                self.end_headers()

            def _respond(self, status: int, payload: dict) -> None:
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args) -> None:  # silence request logging
                pass

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def _next_chat_reply(self, messages: list[Message]) -> str:
        with self._lock:
            if self._chat_replies:
                return self._chat_replies.pop(0)
        if self._chat_handler is not None:
            return self._chat_handler(messages)
        last_user = next(
            (m["content"] for m in reversed(messages) if m.get("role") == "user"), ""
        )
        return f"(mock reply to: {last_user[:60]})"

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    @property
    def base_url(self) -> str:
        assert self._httpd is not None, "server not started"
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def chat_url(self) -> str:
        return f"{self.base_url}/v1/chat/completions"

    @property
    def embeddings_url(self) -> str:
        return f"{self.base_url}/v1/embeddings"

    def __enter__(self) -> "MockOpenAIServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
