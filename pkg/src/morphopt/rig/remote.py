"""Newline-delimited JSON client for an external rig, plus a reference server.

Client to rig::

    {"cmd": "set_shape", "theta_deg": [a, b, c]}
    {"cmd": "acquire", "duration_s": N}
    {"cmd": "calibrate"}

Rig to client::

    {"ok": true, "samples": [...], "rate_hz": 600}
    {"ok": false, "error": "..."}
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading

import numpy as np

from ..exceptions import ConfigurationError, EvaluatorError
from ..geometry import MorphShape, indices_from_angles
from ..traces import ForceTrace, RigConditions
from .base import FitnessEvaluator
from .synthetic import SyntheticRig


class RemoteRig(FitnessEvaluator):
    """Drive a rig over TCP. One command is in flight at a time."""

    supports_concurrent = False

    def __init__(self, host: str = "127.0.0.1", port: int = 5555, mode: str = "delta",
                 averaging_window: float = 10.0, timeout: float = 60.0,
                 conditions: RigConditions | None = None):
        if mode not in ("absolute", "delta"):
            raise ConfigurationError("mode must be 'absolute' or 'delta'")
        self.host = host
        self.port = port
        self.mode = mode
        self.averaging_window = averaging_window
        self.timeout = timeout
        self.conditions = conditions or RigConditions()
        self.calibration_reference = 0.0
        self.tared = False
        self.n_evaluations = 0
        self._lock = threading.Lock()
        self._sock: socket.socket | None = None
        self._reader = None

    def connect(self) -> None:
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as exc:
            raise EvaluatorError(f"rig at {self.host}:{self.port} unreachable: {exc}") from exc
        self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
        if self._sock is not None:
            self._sock.close()
        self._sock = self._reader = None

    def __enter__(self):
        self.connect()
        return self

    def __exit__(self, *exc):
        self.close()

    def _request(self, payload: dict) -> dict:
        with self._lock:
            if self._sock is None:
                self.connect()
            try:
                self._sock.sendall((json.dumps(payload) + "\n").encode("utf-8"))
                line = self._reader.readline()
            except (OSError, socket.timeout) as exc:
                raise EvaluatorError(f"rig communication failed: {exc}") from exc
        if not line:
            raise EvaluatorError("rig closed the connection")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluatorError(f"malformed rig reply: {line!r}") from exc
        if not reply.get("ok", False):
            raise EvaluatorError(f"rig error: {reply.get('error', 'unknown')}")
        return reply

    def set_shape(self, shape: MorphShape) -> None:
        self._request({"cmd": "set_shape", "theta_deg": [float(t) for t in shape.theta]})

    def acquire(self, duration: float) -> ForceTrace:
        reply = self._request({"cmd": "acquire", "duration_s": duration})
        return ForceTrace(np.asarray(reply["samples"], dtype=float), sample_rate=float(reply.get("rate_hz", 600)),
                          conditions=self.conditions, metadata={"source": f"remote:{self.host}:{self.port}"})

    def calibrate(self) -> None:
        self._request({"cmd": "calibrate"})
        self.tared = True

    def recalibrate_neutral(self, duration: float = 10.0) -> float:
        self.set_shape(MorphShape.neutral())
        self.calibration_reference = self.acquire(duration).mean()
        return self.calibration_reference

    def begin_generation(self, index: int) -> None:
        if not self.tared:
            self.calibrate()
        if self.mode == "delta":
            self.recalibrate_neutral()

    def measure(self, shape: MorphShape) -> tuple[float, ForceTrace]:
        self.set_shape(shape)
        trace = self.acquire(self.averaging_window)
        reference = self.calibration_reference if self.mode == "delta" else 0.0
        self.n_evaluations += 1
        out = trace.with_samples(trace.samples - reference, mode=self.mode, calibration_reference=reference)
        return out.mean(), out

    def evaluate(self, shape: MorphShape) -> float:
        return self.measure(shape)[0]


class _RigHandler(socketserver.StreamRequestHandler):
    def handle(self):
        rig: SyntheticRig = self.server.rig
        for raw in self.rfile:
            try:
                request = json.loads(raw)
                reply = self.server.dispatch(rig, request)
            except Exception as exc:  # the wire protocol reports every failure in-band
                reply = {"ok": False, "error": str(exc)}
            self.wfile.write((json.dumps(reply) + "\n").encode("utf-8"))
            self.wfile.flush()


class RigServer(socketserver.TCPServer):
    """Serve a :class:`SyntheticRig` over the wire protocol, one client at a time."""

    allow_reuse_address = True

    def __init__(self, rig: SyntheticRig, address=("127.0.0.1", 0)):
        self.rig = rig
        rig.mode = "absolute"
        super().__init__(address, _RigHandler)

    @staticmethod
    def dispatch(rig: SyntheticRig, request: dict) -> dict:
        cmd = request.get("cmd")
        if cmd == "set_shape":
            theta = tuple(float(t) for t in request["theta_deg"])
            if len(theta) != 3:
                raise ValueError("theta_deg needs three angles")
            rig.set_shape(MorphShape(theta, indices_from_angles(theta)))
            return {"ok": True}
        if cmd == "acquire":
            duration = float(request["duration_s"])
            if duration <= 0:
                raise ValueError("duration_s must be positive")
            trace = rig.acquire(duration)
            samples = trace.samples - rig.wind_off_reference
            return {"ok": True, "samples": samples.tolist(), "rate_hz": trace.sample_rate}
        if cmd == "calibrate":
            return {"ok": True, "reference_N": rig.tare()}
        raise ValueError(f"unknown command {cmd!r}")

    def serve_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
