"""Social profiles, semantic concept similarity and handshake accounting."""

from __future__ import annotations

import enum
import hashlib
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

log = logging.getLogger(__name__)

HEADER_BYTES = 16
SHORT_HANDSHAKE_BYTES = HEADER_BYTES


@dataclass(frozen=True)
class Concept:
    """An interest token, optionally placed in a taxonomy.

    ``taxonomy_path`` runs root to leaf and always ends with the label.
    """

    label: str
    taxonomy_path: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        label = self.label.casefold()
        object.__setattr__(self, "label", label)
        if self.taxonomy_path is not None:
            path = tuple(p.casefold() for p in self.taxonomy_path if p)
            if not path or path[-1] != label:
                path = path + (label,)
            object.__setattr__(self, "taxonomy_path", path)

    @classmethod
    def parse(cls, label: str, path: Optional[str] = None) -> "Concept":
        return cls(label, tuple(path.strip("/").split("/")) if path else None)

    @property
    def depth(self) -> int:
        return len(self.taxonomy_path) if self.taxonomy_path else 0


@dataclass
class Profile:
    node_id: str
    concepts: list[Concept] = field(default_factory=list)

    def __post_init__(self):
        self.node_id = str(self.node_id)
        seen = set()
        for c in self.concepts:
            if c.label in seen:
                raise ValueError(f"duplicate concept {c.label!r} in profile {self.node_id}")
            seen.add(c.label)

    @property
    def encoded_size_bytes(self) -> int:
        return HEADER_BYTES + sum(2 + len(c.label.encode()) for c in self.concepts)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for c in self.concepts:
            h.update(c.label.encode())
            h.update(b"\0")
            h.update("/".join(c.taxonomy_path or ()).encode())
            h.update(b"\n")
        return h.hexdigest()


class SimilarityClass(str, enum.Enum):
    MAX_MATCH = "MaxMatch"
    LESS_MATCH = "LessMatch"
    NO_MATCH = "NoMatch"


def _common_prefix(a: Sequence[str], b: Sequence[str]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def concept_sim(a: Concept, b: Concept) -> float:
    """Wu-Palmer similarity when both concepts are placed, exact match otherwise."""
    if a.label == b.label:
        return 1.0
    if not a.taxonomy_path or not b.taxonomy_path:
        return 0.0
    lca = _common_prefix(a.taxonomy_path, b.taxonomy_path)
    return 2.0 * lca / (a.depth + b.depth)


class _TargetIndex:
    """Lookup structure over one profile for best-match queries.

    For each taxonomy prefix it keeps the shallowest concept below it, which
    is all that is needed to maximise ``2 L / (d_a + d_b)`` for a fixed
    common-prefix length ``L``. Queries cost O(depth) instead of O(|profile|).
    """

    def __init__(self, concepts: Iterable[Concept]):
        self.labels: set[str] = set()
        self.min_depth: dict[tuple[str, ...], int] = {}
        for c in concepts:
            self.labels.add(c.label)
            path = c.taxonomy_path
            if not path:
                continue
            d = len(path)
            for i in range(1, d + 1):
                key = path[:i]
                cur = self.min_depth.get(key)
                if cur is None or d < cur:
                    self.min_depth[key] = d

    def best(self, a: Concept) -> float:
        if a.label in self.labels:
            return 1.0
        path = a.taxonomy_path
        if not path:
            return 0.0
        da = len(path)
        best = 0.0
        for i in range(da, 0, -1):
            db = self.min_depth.get(path[:i])
            if db is None:
                continue
            s = 2.0 * i / (da + db)
            if s > best:
                best = s
        return best


def profile_sim(lx: Profile, ly: Profile) -> float:
    """Mean over the concepts of ``lx`` of the best match found in ``ly``.

    Not symmetric: the average runs over ``lx`` only.
    """
    z = len(lx.concepts)
    if z == 0:
        log.warning("profile %s has no concepts; similarity defined as 0", lx.node_id)
        return 0.0
    index = _TargetIndex(ly.concepts)
    return sum(index.best(c) for c in lx.concepts) / z


def profile_sim_bruteforce(lx: Profile, ly: Profile) -> float:
    """Quadratic reference evaluation used to check :func:`profile_sim`."""
    if not lx.concepts:
        return 0.0
    total = 0.0
    for a in lx.concepts:
        total += max((concept_sim(a, b) for b in ly.concepts), default=0.0)
    return total / len(lx.concepts)


def classify(sim: float, threshld: float = 0.6) -> SimilarityClass:
    if not 0.0 < threshld <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshld}")
    if not 0.0 <= sim <= 1.0:
        raise ValueError(f"similarity must lie in [0, 1], got {sim}")
    if sim > threshld:
        return SimilarityClass.MAX_MATCH
    if sim > 0.0:
        return SimilarityClass.LESS_MATCH
    return SimilarityClass.NO_MATCH


@dataclass
class MetadataLedger:
    handshakes: int = 0
    full_exchanges: int = 0
    short_handshakes: int = 0
    advertisements: int = 0
    bytes_exchanged: int = 0
    match_latency_samples: list[float] = field(default_factory=list)
    _seen: dict[tuple[str, str], tuple[str, str]] = field(default_factory=dict, repr=False)

    def charge(self, nbytes: int) -> None:
        self.bytes_exchanged += nbytes


@dataclass(frozen=True)
class HandshakeResult:
    sim: float
    klass: SimilarityClass
    T_reported: int
    full_exchange: bool


def handshake(sender: Profile, intermediate: Profile, ledger: MetadataLedger,
              T: int = 0, threshld: float = 0.6) -> HandshakeResult:
    """Contact between a sender and the intermediate node.

    Full profiles travel both ways on first contact or after either side
    changed; otherwise only a short header is exchanged. The current
    connection count of the intermediate node rides along.
    """
    key = (sender.node_id, intermediate.node_id)
    prints = (sender.fingerprint(), intermediate.fingerprint())
    full = ledger._seen.get(key) != prints
    ledger.handshakes += 1
    if full:
        ledger._seen[key] = prints
        ledger.full_exchanges += 1
        ledger.charge(sender.encoded_size_bytes + intermediate.encoded_size_bytes)
    else:
        ledger.short_handshakes += 1
        ledger.charge(SHORT_HANDSHAKE_BYTES)
    t0 = time.perf_counter()
    sim = profile_sim(sender, intermediate)
    ledger.match_latency_samples.append(time.perf_counter() - t0)
    return HandshakeResult(sim, classify(sim, threshld), T, full)


# -- profile files ---------------------------------------------------------

def parse_profiles(text: str) -> list[Profile]:
    """Read ``node <id>`` blocks followed by ``concept <label> [path]`` lines."""
    profiles: list[Profile] = []
    current: Optional[Profile] = None
    pending: list[Concept] = []

    def close():
        nonlocal current, pending
        if current is not None:
            current.concepts = pending
            current.__post_init__()
            profiles.append(current)
        current, pending = None, []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            close()
            continue
        parts = line.split()
        if parts[0] == "node" and len(parts) == 2:
            close()
            current = Profile(parts[1])
        elif parts[0] == "concept" and len(parts) in (2, 3):
            if current is None:
                raise ValueError(f"line {lineno}: concept outside a node block")
            pending.append(Concept.parse(parts[1], parts[2] if len(parts) == 3 else None))
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    close()
    return profiles


def format_profiles(profiles: Iterable[Profile]) -> str:
    blocks = []
    for p in profiles:
        lines = [f"node {p.node_id}"]
        for c in p.concepts:
            if c.taxonomy_path:
                lines.append(f"concept {c.label} {'/'.join(c.taxonomy_path)}")
            else:
                lines.append(f"concept {c.label}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def load_profiles(path: str | Path) -> list[Profile]:
    return parse_profiles(Path(path).read_text())


_INTERESTS = [
    ("football", "sports/ball/football"),
    ("basketball", "sports/ball/basketball"),
    ("tennis", "sports/racquet/tennis"),
    ("chess", "games/board/chess"),
    ("jazz", "music/genre/jazz"),
    ("hiking", "outdoors/trail/hiking"),
]


def default_profiles(n_senders: int) -> tuple[Profile, list[Profile]]:
    """Intermediate node plus ``n_senders`` sender profiles.

    The intermediate node holds three sports interests. Senders all share
    those interests, so every connection is a maximum match; scenarios that
    study prioritisation supply their own profile file.
    """
    core = [Concept.parse(label, path) for label, path in _INTERESTS[:3]]
    intermediate = Profile("relay", list(core))
    senders = []
    for i in range(n_senders):
        senders.append(Profile(f"s{i}", list(core)))
    return intermediate, senders
