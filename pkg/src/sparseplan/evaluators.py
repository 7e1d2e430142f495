"""Profile evaluators: the scoring contract, a memoizing cache, and an
external-process evaluator speaking line-delimited JSON.

Scores are "lower is better" everywhere. Evaluators that naturally measure
accuracy must negate it before returning.

Wire protocol (one UTF-8 JSON object per line, synchronous):

    parent: {"type": "init", "layers": [names...], "grid": [sparsities...]}
    child:  {"type": "ready", "layers": L, "levels": n}
    parent: {"type": "eval", "id": k, "choices": [int...]}
    child:  {"type": "loss", "id": k, "loss": float}
    parent: {"type": "close"}

A child reports problems as {"type": "error", "message": ...} and keeps
serving.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass, field

from .core import Profile, SparsityGrid
from .exceptions import EvaluationError

DEFAULT_EVAL_TIMEOUT = 300.0


class Evaluator:
    """Scores a full sparsity profile; lower is better.

    Subclasses set num_layers/grid and implement evaluate(). concurrent_safe
    declares whether callers may issue evaluations from multiple threads.
    """

    num_layers: int
    grid: SparsityGrid
    concurrent_safe: bool = False

    def evaluate(self, profile: Profile) -> float:
        raise NotImplementedError

    def close(self) -> None:
        """Release external resources, if any."""


@dataclass
class EvalCache(Evaluator):
    """Memoizing wrapper: identical profiles hit the underlying evaluator once.

    Safe for concurrent use when the inner evaluator is: insertion is
    single-winner, and a racing loser discards its duplicate score in favor
    of the cached one.
    """

    inner: Evaluator
    hits: int = 0
    misses: int = 0
    _scores: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.num_layers = self.inner.num_layers
        self.grid = self.inner.grid
        self.concurrent_safe = self.inner.concurrent_safe

    def evaluate(self, profile: Profile) -> float:
        key = profile.choices
        with self._lock:
            if key in self._scores:
                self.hits += 1
                return self._scores[key]
            self.misses += 1
        score = self.inner.evaluate(profile)
        with self._lock:
            return self._scores.setdefault(key, score)

    @property
    def underlying_calls(self) -> int:
        """Evaluations that reached the inner evaluator."""
        return self.misses

    def contains(self, profile: Profile) -> bool:
        with self._lock:
            return profile.choices in self._scores

    def close(self) -> None:
        self.inner.close()


class ExternalEvaluator(Evaluator):
    """Evaluator backed by a child process speaking the wire protocol.

    Serial-only: requests are strictly interleaved request/response. A
    timeout or protocol violation poisons the instance — later calls fail
    fast — because the stream position is no longer trustworthy.
    """

    concurrent_safe = False

    def __init__(
        self,
        command: list[str],
        layer_names: tuple[str, ...],
        grid: SparsityGrid,
        timeout: float = DEFAULT_EVAL_TIMEOUT,
    ):
        self.num_layers = len(layer_names)
        self.grid = grid
        self.timeout = float(timeout)
        self._next_id = 0
        self._broken: str | None = None
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise EvaluationError(f"cannot launch evaluator {command!r}: {e}") from e
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            reply = self._request(
                {"type": "init", "layers": list(layer_names), "grid": [float(s) for s in grid.levels]}
            )
            if reply.get("type") != "ready":
                raise EvaluationError(f"expected ready, got {reply!r}")
            if reply.get("layers") != self.num_layers or reply.get("levels") != len(grid):
                raise EvaluationError(
                    f"handshake mismatch: child reported layers={reply.get('layers')} "
                    f"levels={reply.get('levels')}, expected {self.num_layers}/{len(grid)}"
                )
        except EvaluationError:
            self._terminate()
            raise

    def _pump(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        except ValueError:
            pass  # stdout closed mid-read
        self._lines.put(None)

    def _request(self, obj: dict) -> dict:
        if self._broken is not None:
            raise EvaluationError(f"evaluator unusable after earlier failure: {self._broken}")
        try:
            self._proc.stdin.write(json.dumps(obj) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as e:
            self._broken = f"write failed: {e}"
            raise EvaluationError(self._broken) from e
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._broken = f"no response within {self.timeout} s"
            self._terminate()
            raise EvaluationError(self._broken) from None
        if line is None:
            self._broken = "evaluator process closed its output"
            raise EvaluationError(self._broken)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as e:
            self._broken = f"malformed response line {line.rstrip()!r}: {e}"
            raise EvaluationError(self._broken) from e
        if not isinstance(reply, dict):
            self._broken = f"malformed response line {line.rstrip()!r}: not an object"
            raise EvaluationError(self._broken)
        if reply.get("type") == "error":
            raise EvaluationError(f"evaluator error: {reply.get('message')}")
        return reply

    def evaluate(self, profile: Profile) -> float:
        req_id = self._next_id
        self._next_id += 1
        reply = self._request({"type": "eval", "id": req_id, "choices": list(profile.choices)})
        if reply.get("type") != "loss" or reply.get("id") != req_id:
            self._broken = f"out-of-order or ill-typed reply {reply!r} to request {req_id}"
            raise EvaluationError(self._broken)
        loss = reply.get("loss")
        if not isinstance(loss, (int, float)) or isinstance(loss, bool):
            self._broken = f"non-numeric loss in {reply!r}"
            raise EvaluationError(self._broken)
        return float(loss)

    def _terminate(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None or proc.poll() is not None:
            return
        proc.terminate()
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        if proc.poll() is None and self._broken is None:
            try:
                proc.stdin.write('{"type": "close"}\n')
                proc.stdin.flush()
                proc.stdin.close()
                proc.wait(timeout=2.0)
            except (OSError, ValueError, subprocess.TimeoutExpired):
                pass
        self._terminate()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self._terminate()
        except Exception:
            pass


def spawn_external(
    command: list[str],
    layer_names: tuple[str, ...],
    grid: SparsityGrid,
    timeout: float = DEFAULT_EVAL_TIMEOUT,
) -> ExternalEvaluator:
    """Launch `command`, perform the init handshake, and return the evaluator."""
    return ExternalEvaluator(command, layer_names, grid, timeout=timeout)
