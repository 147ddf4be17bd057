"""HTTP service exposing a live detection stream to the analyst console.

Three JSON endpoints:

* ``GET /state?since=N``  -- records with timestep > N, in order, plus the
  stream head and run status.  Records are never mutated once emitted.
* ``GET /queries``        -- pending feedback queries (label-efficient
  mode): unanswered and unexpired, at most one per timestep.
* ``POST /feedback``      -- submit a label.  Body: ``{"id": "q17", "y": 1,
  "submitter": "analyst"}`` in label mode, or ``{"t": 17, "y": -1, ...}``
  in arbitrary mode.  The ack carries whether the threshold update was
  applied and the post-update threshold.  Duplicate ids are rejected, so
  retries cannot double-apply.

Concurrency: the detection loop owns the filter and threshold state.
Request handlers communicate with it only through thread-safe structures:
answered-query events and a submission queue the loop drains between
steps.  In label mode the loop blocks on each query up to
``feedback.timeout`` seconds (config), then proceeds without an update --
an unanswered query behaves exactly like withheld feedback.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse

import numpy as np

from .config import RunConfig
from .channels import corrupt
from .families import certify_box
from .filtering import FilterRun
from .harness import generate_stream, make_experiment_spec, PiecewiseSpec
from .hedging import (
    HedgeState,
    decide,
    new_hedge_state,
    query_probability,
    update_full,
    zeta_from_log,
)
from .pipeline import build_transform
from .records import StreamRecord, record_to_dict, record_to_json

__all__ = ["DetectionService", "serve"]


@dataclass
class PendingQuery:
    id: str
    t: int
    z_summary: dict
    log_belief: float
    zeta: float
    tau: float
    y_hat: int
    created_at: float
    deadline: float
    answered: bool = False
    answer: Optional[int] = None
    resolved: bool = False  # worker finished waiting; late answers rejected
    event: threading.Event = field(default_factory=threading.Event)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "t": self.t,
            "z_summary": self.z_summary,
            "log_belief": self.log_belief,
            "zeta": self.zeta,
            "tau": self.tau,
            "y_hat": self.y_hat,
            "created_at": self.created_at,
            "deadline": self.deadline,
        }


@dataclass
class _Submission:
    key: str
    t: Optional[int]
    y: int
    submitter: str
    done: threading.Event = field(default_factory=threading.Event)
    applied: bool = False
    tau: float = 0.0
    error: Optional[str] = None


class DetectionService:
    """Owns one detection run and its feedback bookkeeping."""

    def __init__(self, cfg: RunConfig):
        if cfg.mode not in ("label", "arbitrary"):
            raise ValueError("service runs in label or arbitrary mode")
        if cfg.calibrate > 0:
            raise ValueError("service needs a fixed transform (hedge.calibrate = 0)")
        self.cfg = cfg
        self.box = certify_box(cfg.model, cfg.box, user_H=cfg.user_h)
        self.run = FilterRun(
            cfg.model, self.box, cfg.channel, cfg.schedule, cfg.theta_init
        )
        self.transform = build_transform(cfg)
        self.state: Optional[HedgeState] = None
        self.query_rng = np.random.default_rng([13, cfg.seed])

        self.lock = threading.Lock()
        self.records: list[StreamRecord] = []
        self.decisions: dict[int, int] = {}  # t -> y_hat, for late feedback
        self.pending: dict[str, PendingQuery] = {}
        self.seen_keys: set[str] = set()
        self.submissions: "queue.Queue[_Submission]" = queue.Queue()
        self.running = False
        self.finished = False
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self.log_path = None

    # ------------------------------------------------------------------
    # data source
    # ------------------------------------------------------------------

    def _observations(self):
        cfg = self.cfg
        if cfg.source.startswith("preset:"):
            spec = make_experiment_spec(cfg.seed)
            x_rows, _ = generate_stream(spec)
            rng = np.random.default_rng([11, cfg.seed])
            for x in x_rows:
                yield corrupt(cfg.channel, cfg.model, x, rng)
        elif cfg.source.startswith("spec:"):
            spec = PiecewiseSpec.load(cfg.source.split(":", 1)[1])
            x_rows, _ = generate_stream(spec)
            rng = np.random.default_rng([11, cfg.seed])
            for x in x_rows:
                yield corrupt(cfg.channel, cfg.model, x, rng)
        elif cfg.source.startswith("jsonl:"):
            with open(cfg.source.split(":", 1)[1]) as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        yield np.asarray(json.loads(line)["z"], dtype=np.float64)
        else:
            raise ValueError(f"service cannot stream from source '{cfg.source}'")

    # ------------------------------------------------------------------
    # worker loop
    # ------------------------------------------------------------------

    def start(self, log_path=None) -> None:
        self.log_path = log_path
        self.running = True
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def stop(self, timeout: float = 10.0) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout)
        self.running = False

    def join(self, timeout: Optional[float] = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def _log(self, kind: str, payload: dict) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps({"kind": kind, **payload}) + "\n")

    def _loop(self) -> None:
        cfg = self.cfg
        try:
            for z in self._observations():
                if self._stop.is_set():
                    break
                self._drain_submissions()
                rec = self.run.step(z)
                zeta_t = zeta_from_log(self.transform, rec["log_belief"])
                if self.state is None:
                    tau_init = zeta_t if cfg.tau_init_mode == "first_belief" else None
                    self.state = new_hedge_state(
                        cfg.tau_min, cfg.tau_max, eta=cfg.eta,
                        horizon=cfg.horizon, tau_init=tau_init,
                    )
                tau_t = self.state.tau
                y_hat = decide(self.state, zeta_t)
                queried = False
                feedback = None
                if cfg.mode == "label":
                    prob = query_probability(zeta_t, tau_t)
                    if self.query_rng.random() < prob:
                        queried = True
                        feedback = self._ask_user(rec, zeta_t, tau_t, y_hat)
                    if feedback is not None:
                        self.state = update_full(self.state, y_hat, feedback)
                    else:
                        self.state = replace(self.state, t=self.state.t + 1)
                else:
                    # volunteered feedback is applied asynchronously by t
                    self.state = replace(self.state, t=self.state.t + 1)
                record = StreamRecord(
                    t=rec["t"],
                    filtering_loss=rec["filtering_loss"],
                    log_belief=rec["log_belief"],
                    zeta=zeta_t,
                    tau=tau_t,
                    y_hat=int(y_hat),
                    queried=queried,
                    feedback=feedback,
                    z=list(map(float, z)) if cfg.store_observations else None,
                )
                with self.lock:
                    self.records.append(record)
                    self.decisions[record.t] = int(y_hat)
                self._log("record", record_to_dict(record))
                if cfg.step_delay > 0:
                    deadline = time.monotonic() + cfg.step_delay
                    while time.monotonic() < deadline and not self._stop.is_set():
                        self._drain_submissions(poll=0.02)
            # stream exhausted: keep serving state and late feedback
            while not self._stop.is_set():
                self._drain_submissions(poll=0.1)
        finally:
            self.finished = True
            self.running = False

    def _ask_user(self, rec, zeta_t, tau_t, y_hat) -> Optional[int]:
        cfg = self.cfg
        qid = f"q{rec['t']}"
        z_summary = {"dim": self.cfg.model.dim, "norm": float(np.linalg.norm(rec["h"]))}
        q = PendingQuery(
            id=qid,
            t=rec["t"],
            z_summary=z_summary,
            log_belief=float(rec["log_belief"]),
            zeta=float(zeta_t),
            tau=float(tau_t),
            y_hat=int(y_hat),
            created_at=time.time(),
            deadline=time.time() + cfg.timeout,
        )
        with self.lock:
            self.pending[qid] = q
        self._log("query", q.to_dict())
        q.event.wait(cfg.timeout)
        with self.lock:
            self.pending.pop(qid, None)
            q.resolved = True
            answered, answer = q.answered, q.answer
        return answer if answered else None

    def _drain_submissions(self, poll: float = 0.0) -> None:
        """Apply queued arbitrary-mode submissions; runs on the loop thread."""
        while True:
            try:
                sub = self.submissions.get(timeout=poll) if poll else self.submissions.get_nowait()
            except queue.Empty:
                return
            self._apply_submission(sub)
            poll = 0.0  # only the first get may block

    def _apply_submission(self, sub: _Submission) -> None:
        with self.lock:
            y_hat = self.decisions.get(sub.t)
            head = self.records[-1].t if self.records else 0
        if self.state is None or y_hat is None:
            sub.error = f"unknown timestep {sub.t}"
        elif head - sub.t >= self.cfg.feedback_window:
            sub.error = f"timestep {sub.t} is outside the feedback window"
        else:
            # the threshold move of update_full, without advancing the clock
            # (the round counter belongs to the stream, not to late feedback)
            tau = self.state.tau
            if y_hat != sub.y:
                tau += self.state.eta_at(self.state.t) * sub.y
                tau = min(max(tau, self.state.tau_min), self.state.tau_max)
            self.state = replace(self.state, tau=tau)
            sub.applied = True
            sub.tau = tau
            self._log(
                "feedback",
                {"t": sub.t, "y": sub.y, "submitter": sub.submitter, "tau": sub.tau},
            )
        sub.done.set()

    # ------------------------------------------------------------------
    # handler-side API
    # ------------------------------------------------------------------

    def get_state(self, since: int) -> dict:
        with self.lock:
            records = [record_to_dict(r) for r in self.records if r.t > since]
            head = self.records[-1].t if self.records else 0
        return {
            "head": head,
            "mode": self.cfg.mode,
            "running": self.running and not self.finished,
            "records": records,
        }

    def get_queries(self) -> dict:
        now = time.time()
        with self.lock:
            queries = [
                q.to_dict()
                for q in self.pending.values()
                if not q.answered and q.deadline > now
            ]
        return {"mode": self.cfg.mode, "queries": queries}

    def submit_feedback(self, body: dict) -> dict:
        y = body.get("y")
        if y not in (-1, 1):
            return {"applied": False, "error": "y must be -1 or +1"}
        submitter = str(body.get("submitter", "anonymous"))
        if self.cfg.mode == "label":
            qid = body.get("id")
            if not isinstance(qid, str):
                return {"applied": False, "error": "label mode needs a query id"}
            with self.lock:
                if qid in self.seen_keys:
                    return {"applied": False, "error": "duplicate submission"}
                q = self.pending.get(qid)
                if q is None or q.resolved or q.answered or q.deadline <= time.time():
                    return {"applied": False, "error": f"no pending query {qid}"}
                self.seen_keys.add(qid)
                q.answered = True
                q.answer = int(y)
            q.event.set()
            # the loop applies the update right after waking; give it a moment
            deadline = time.monotonic() + 5.0
            while time.monotonic() < deadline:
                if self.state is not None and self.state.t > q.t:
                    break
                time.sleep(0.005)
            self._log(
                "feedback",
                {"id": qid, "t": q.t, "y": int(y), "submitter": submitter,
                 "tau": self.state.tau if self.state else None},
            )
            return {
                "applied": True,
                "tau": self.state.tau if self.state else None,
            }
        # arbitrary mode: keyed by timestep
        t = body.get("t")
        if not isinstance(t, int) or t < 1:
            return {"applied": False, "error": "arbitrary mode needs a timestep t"}
        key = f"t{t}"
        with self.lock:
            if key in self.seen_keys:
                return {"applied": False, "error": "duplicate submission"}
            self.seen_keys.add(key)
        sub = _Submission(key=key, t=t, y=int(y), submitter=submitter)
        self.submissions.put(sub)
        if not sub.done.wait(max(5.0, self.cfg.step_delay * 3)):
            return {"applied": False, "error": "loop did not pick up the submission"}
        if sub.error:
            return {"applied": False, "error": sub.error}
        return {"applied": True, "tau": sub.tau}


class _Handler(BaseHTTPRequestHandler):
    service: DetectionService = None  # set by serve()

    def _send(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass

    def do_OPTIONS(self):
        self._send(200, {})

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/state":
            params = parse_qs(url.query)
            since = int(params.get("since", ["0"])[0])
            self._send(200, self.service.get_state(since))
        elif url.path == "/queries":
            self._send(200, self.service.get_queries())
        else:
            self._send(404, {"error": f"unknown path {url.path}"})

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/feedback":
            self._send(404, {"error": f"unknown path {url.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError) as exc:
            self._send(400, {"applied": False, "error": f"bad body: {exc}"})
            return
        result = self.service.submit_feedback(body)
        self._send(200 if result.get("applied") else 400, result)


def make_server(service: DetectionService, host: str, port: int) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve(cfg: RunConfig, host: str, port: int) -> None:
    """Run a detection session behind the HTTP endpoints until interrupted."""
    service = DetectionService(cfg)
    server = make_server(service, host, port)
    from pathlib import Path

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    service.start(log_path=out / "service_log.jsonl")
    print(f"serving on http://{host}:{port}  (/state /queries /feedback)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
        server.shutdown()
