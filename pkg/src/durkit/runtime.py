"""Message-passing runtimes shared by both engines.

Actors are single-threaded state machines addressed by name. The same actor
code runs under two schedulers:

* SimRuntime: single-threaded and fully deterministic. Messages sit in
  per-(sender, receiver) FIFO links; a seeded RNG picks which nonempty link
  delivers next, so one seed reproduces one interleaving exactly.
* RtRuntime: one OS thread and one mailbox queue per actor. Per-sender FIFO
  still holds; the interleaving across senders is real-time.

There is no shared mutable state between actors in either mode; everything
travels by message.
"""

from __future__ import annotations

import queue
import random
import threading
import time
from collections import deque
from typing import Any, Callable, Protocol


class Actor(Protocol):
    name: str

    def on_message(self, msg: Any, rt: "Runtime") -> None: ...


class Runtime(Protocol):
    def send(self, src: str, dst: str, msg: Any) -> None: ...

    def now(self) -> float: ...


BOOT = "@boot"


class DeadlockError(RuntimeError):
    """The system quiesced (or timed out) with work still outstanding."""


class SimRuntime:
    """Deterministic single-threaded scheduler.

    One step = pop the head of one randomly chosen nonempty link and run the
    receiver's handler. Step count doubles as the simulated clock.
    """

    def __init__(self, seed: int, max_steps: int = 50_000_000) -> None:
        self.rng = random.Random(seed)
        self.actors: dict[str, Actor] = {}
        self.links: dict[tuple[str, str], deque] = {}
        self.ready: set[tuple[str, str]] = set()
        self.steps = 0
        self.max_steps = max_steps

    def register(self, actor: Actor) -> None:
        if actor.name in self.actors:
            raise ValueError(f"duplicate actor {actor.name}")
        self.actors[actor.name] = actor

    def send(self, src: str, dst: str, msg: Any) -> None:
        if dst not in self.actors:
            raise KeyError(f"unknown actor {dst}")
        link = (src, dst)
        q = self.links.get(link)
        if q is None:
            q = self.links[link] = deque()
        q.append(msg)
        self.ready.add(link)

    def now(self) -> float:
        return float(self.steps)

    def run(self) -> None:
        while self.ready:
            self.steps += 1
            if self.steps > self.max_steps:
                raise DeadlockError(f"no quiescence within {self.max_steps} steps")
            link = self.rng.choice(sorted(self.ready))
            q = self.links[link]
            msg = q.popleft()
            if not q:
                self.ready.discard(link)
            self.actors[link[1]].on_message(msg, self)


class _Stop:
    pass


_STOP = _Stop()


class RtRuntime:
    """Concurrent scheduler: one thread and one mailbox per actor."""

    def __init__(self) -> None:
        self.actors: dict[str, Actor] = {}
        self.queues: dict[str, "queue.Queue[Any]"] = {}
        self.threads: dict[str, threading.Thread] = {}
        self._inflight = 0
        self._lock = threading.Lock()
        self._errors: list[BaseException] = []
        self._t0 = time.perf_counter()

    def register(self, actor: Actor) -> None:
        if actor.name in self.actors:
            raise ValueError(f"duplicate actor {actor.name}")
        self.actors[actor.name] = actor
        self.queues[actor.name] = queue.Queue()

    def send(self, src: str, dst: str, msg: Any) -> None:
        with self._lock:
            self._inflight += 1
        self.queues[dst].put(msg)

    def now(self) -> float:
        return time.perf_counter() - self._t0

    def _loop(self, actor: Actor) -> None:
        q = self.queues[actor.name]
        while True:
            msg = q.get()
            if msg is _STOP:
                return
            try:
                actor.on_message(msg, self)
            except BaseException as exc:  # surfaced after join
                with self._lock:
                    self._errors.append(exc)
                return
            finally:
                with self._lock:
                    self._inflight -= 1

    def start(self) -> None:
        for name, actor in self.actors.items():
            t = threading.Thread(target=self._loop, args=(actor,), name=name, daemon=True)
            self.threads[name] = t
            t.start()

    def run_until(self, done: Callable[[], bool], timeout: float = 60.0) -> None:
        """Wait for `done` plus full quiescence, then stop every actor."""
        deadline = time.monotonic() + timeout
        while True:
            if self._errors:
                break
            with self._lock:
                idle = self._inflight == 0
            if done() and idle:
                break
            if time.monotonic() > deadline:
                self._halt()
                raise DeadlockError("runtime did not quiesce before timeout")
            time.sleep(0.001)
        self._halt()
        if self._errors:
            raise self._errors[0]

    def _halt(self) -> None:
        for name in self.threads:
            self.queues[name].put(_STOP)
        for t in self.threads.values():
            t.join(timeout=5.0)
