"""Replay buffer - fixed-capacity FIFO ring of transitions with uint8 image storage."""

import logging
import struct
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from viewdistill.core.exceptions import ArchiveIntegrityError, ShapeError
from viewdistill.core.hashing import sha256_digest
from viewdistill.schemas.task import ACTION_DIM, TaskConfig

logger = logging.getLogger(__name__)

SPILL_MAGIC = b"VDREPLAY"
SPILL_VERSION = 1
DEFAULT_SUCCESS_REWARD = TaskConfig.model_fields["success_reward_per_step"].default


class Transition(NamedTuple):
    """One environment step. Image lists hold (H, W, 3) uint8 arrays, one per view."""

    images: list[np.ndarray]
    q: np.ndarray | None
    action: np.ndarray
    reward: float
    done: bool
    next_images: list[np.ndarray]
    next_q: np.ndarray | None


class Batch(NamedTuple):
    obs: np.ndarray  # (B, V, H, W, 3) uint8
    q: np.ndarray | None  # (B, J)
    action: np.ndarray  # (B, 5)
    reward: np.ndarray  # (B,)
    next_obs: np.ndarray
    next_q: np.ndarray | None
    done: np.ndarray  # (B,) float32, 1.0 = terminal
    is_demo: np.ndarray  # (B,) bool
    indices: np.ndarray

    @property
    def demo_fraction(self) -> float:
        return float(self.is_demo.mean()) if len(self.is_demo) else 0.0


class ReplayBuffer:
    """Ring storage; once full, each push overwrites the oldest slot.

    Rewards must be 0 or `success_reward`, the task's per-step success reward.
    """

    def __init__(
        self,
        capacity: int,
        views: int,
        image_size: int = 84,
        joint_dim: int = 0,
        success_reward: float = DEFAULT_SUCCESS_REWARD,
    ):
        if capacity <= 0:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.views = views
        self.image_size = image_size
        self.joint_dim = joint_dim
        self.valid_rewards = (np.float32(0.0), np.float32(success_reward))
        self.cursor = 0
        self.size = 0
        self._storage: dict[str, np.ndarray] | None = None

    def __len__(self) -> int:
        return self.size

    def _allocate(self) -> dict[str, np.ndarray]:
        # lazy so an unused full-size buffer costs nothing
        image_shape = (self.capacity, self.views, self.image_size, self.image_size, 3)
        return {
            "obs": np.zeros(image_shape, dtype=np.uint8),
            "next_obs": np.zeros(image_shape, dtype=np.uint8),
            "q": np.zeros((self.capacity, self.joint_dim), dtype=np.float32),
            "next_q": np.zeros((self.capacity, self.joint_dim), dtype=np.float32),
            "action": np.zeros((self.capacity, ACTION_DIM), dtype=np.float32),
            "reward": np.zeros(self.capacity, dtype=np.float32),
            "done": np.zeros(self.capacity, dtype=np.float32),
            "is_demo": np.zeros(self.capacity, dtype=bool),
        }

    @property
    def storage(self) -> dict[str, np.ndarray]:
        if self._storage is None:
            self._storage = self._allocate()
        return self._storage

    def _check(self, t: Transition) -> None:
        expected = (self.image_size, self.image_size, 3)
        for label, images in (("images", t.images), ("next_images", t.next_images)):
            if len(images) != self.views:
                raise ShapeError(
                    f"transition {label} has {len(images)} views, expected {self.views}"
                )
            for img in images:
                if img.shape != expected or img.dtype != np.uint8:
                    raise ShapeError(f"transition image must be uint8 {expected}, got {img.shape}")
        if self.joint_dim and (t.q is None or t.next_q is None):
            raise ShapeError("this buffer stores joint vectors; transition has none")
        if np.float32(t.reward) not in self.valid_rewards:
            raise ValueError(f"reward must be 0 or {self.valid_rewards[1]}, got {t.reward}")

    def push(self, t: Transition, is_demo: bool = False) -> None:
        self._check(t)
        s = self.storage
        i = self.cursor
        s["obs"][i] = np.stack(t.images)
        s["next_obs"][i] = np.stack(t.next_images)
        if self.joint_dim:
            s["q"][i] = t.q
            s["next_q"][i] = t.next_q
        s["action"][i] = t.action
        s["reward"][i] = t.reward
        s["done"][i] = float(t.done)
        s["is_demo"][i] = is_demo
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def extend(self, other: "ReplayBuffer") -> None:
        """Append every transition of `other` in its FIFO order, keeping demo flags."""
        for t, is_demo in other.ordered():
            self.push(t, is_demo)

    def _slot(self, k: int) -> int:
        # k-th oldest element
        start = self.cursor if self.size == self.capacity else 0
        return (start + k) % self.capacity

    def transition(self, slot: int) -> tuple[Transition, bool]:
        s = self.storage
        t = Transition(
            images=list(s["obs"][slot]),
            q=s["q"][slot].copy() if self.joint_dim else None,
            action=s["action"][slot].copy(),
            reward=float(s["reward"][slot]),
            done=bool(s["done"][slot]),
            next_images=list(s["next_obs"][slot]),
            next_q=s["next_q"][slot].copy() if self.joint_dim else None,
        )
        return t, bool(s["is_demo"][slot])

    def ordered(self) -> Iterator[tuple[Transition, bool]]:
        """Oldest to newest."""
        for k in range(self.size):
            yield self.transition(self._slot(k))

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return self.gather(idx)

    def gather(self, idx: np.ndarray) -> Batch:
        s = self.storage
        return Batch(
            obs=s["obs"][idx],
            q=s["q"][idx] if self.joint_dim else None,
            action=s["action"][idx],
            reward=s["reward"][idx],
            next_obs=s["next_obs"][idx],
            next_q=s["next_q"][idx] if self.joint_dim else None,
            done=s["done"][idx],
            is_demo=s["is_demo"][idx],
            indices=idx,
        )

    def state_dict(self) -> dict:
        filled = {k: v[: self.size].copy() for k, v in self.storage.items()}
        return {"cursor": self.cursor, "size": self.size, "arrays": filled}

    def load_state_dict(self, state: dict) -> None:
        self._storage = self._allocate()
        size = state["size"]
        for key, values in state["arrays"].items():
            self._storage[key][:size] = values
        self.size = size
        self.cursor = state["cursor"]


def _record(t: Transition, is_demo: bool) -> bytes:
    parts = [np.stack(t.images).tobytes(), np.stack(t.next_images).tobytes()]
    if t.q is not None:
        parts.append(np.asarray(t.q, dtype="<f4").tobytes())
        parts.append(np.asarray(t.next_q, dtype="<f4").tobytes())
    parts.append(np.asarray(t.action, dtype="<f4").tobytes())
    parts.append(struct.pack("<fBB", t.reward, int(t.done), int(is_demo)))
    return b"".join(parts)


def write_spill(buffer: ReplayBuffer, path: Path) -> Path:
    """Write the buffer's transitions, oldest first, as length-prefixed records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = SPILL_MAGIC + struct.pack(
        "<5I", SPILL_VERSION, buffer.views, buffer.image_size, buffer.joint_dim, len(buffer)
    )
    chunks = [header]
    for t, is_demo in buffer.ordered():
        record = _record(t, is_demo)
        chunks.append(struct.pack("<I", len(record)))
        chunks.append(record)
    body = b"".join(chunks)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + sha256_digest(body))
    tmp.replace(path)
    logger.info(f"Wrote {len(buffer)} transitions to {path}")
    return path


def read_spill(
    path: Path, capacity: int | None = None, success_reward: float = DEFAULT_SUCCESS_REWARD
) -> ReplayBuffer:
    """Load a spill file into a fresh buffer (capacity defaults to the record count)."""
    path = Path(path)
    data = path.read_bytes()
    head = len(SPILL_MAGIC) + 20
    if len(data) < head + 32 or not data.startswith(SPILL_MAGIC):
        raise ArchiveIntegrityError(f"{path} is not a replay spill file")
    body, digest = data[:-32], data[-32:]
    if sha256_digest(body) != digest:
        raise ArchiveIntegrityError(f"{path} is truncated or corrupt")
    version, views, size, joint_dim, count = struct.unpack(
        "<5I", body[len(SPILL_MAGIC) : head]
    )
    if version != SPILL_VERSION:
        raise ArchiveIntegrityError(f"unsupported replay spill version {version}")
    buffer = ReplayBuffer(capacity or max(count, 1), views, size, joint_dim, success_reward)
    image_bytes = views * size * size * 3
    image_shape = (views, size, size, 3)
    offset = head
    for _ in range(count):
        (length,) = struct.unpack_from("<I", body, offset)
        offset += 4
        record = body[offset : offset + length]
        offset += length
        pos = 0
        obs = np.frombuffer(record, np.uint8, image_bytes, pos).reshape(image_shape)
        pos += image_bytes
        next_obs = np.frombuffer(record, np.uint8, image_bytes, pos).reshape(image_shape)
        pos += image_bytes
        q = next_q = None
        if joint_dim:
            q = np.frombuffer(record, "<f4", joint_dim, pos).astype(np.float32)
            pos += 4 * joint_dim
            next_q = np.frombuffer(record, "<f4", joint_dim, pos).astype(np.float32)
            pos += 4 * joint_dim
        action = np.frombuffer(record, "<f4", ACTION_DIM, pos).astype(np.float32)
        pos += 4 * ACTION_DIM
        reward, done, is_demo = struct.unpack_from("<fBB", record, pos)
        t = Transition(list(obs), q, action, reward, bool(done), list(next_obs), next_q)
        buffer.push(t, bool(is_demo))
    return buffer
