"""Typed trace links between artifacts with impact and provenance queries.

Each link type has a configured traversal direction for impact analysis:
a change to X impacts Y when Y is reachable from X under that table.
DEPENDS_ON edges run against the arrow (dependents are impacted); the
other types follow it (the to-node derives from / satisfies / verifies /
refines the from-node, so it is downstream of a change).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .errors import DuplicateLink, SelfLoop, UnknownArtifact, UnknownLink, UnknownVersion
from .repository import Artifact, ChangeLog, EventType


class LinkType(str, Enum):
    DERIVES_FROM = "DERIVES_FROM"
    SATISFIES = "SATISFIES"
    DEPENDS_ON = "DEPENDS_ON"
    VERIFIES = "VERIFIES"
    REFINES = "REFINES"


# True: impact flows from -> to; False: impact flows to -> from.
IMPACT_FOLLOWS_EDGE: dict[LinkType, bool] = {
    LinkType.DERIVES_FROM: True,
    LinkType.SATISFIES: True,
    LinkType.DEPENDS_ON: False,
    LinkType.VERIFIES: True,
    LinkType.REFINES: True,
}


@dataclass
class TraceLink:
    link_id: str
    from_artifact: str
    to_artifact: str
    link_type: LinkType
    created_by: str
    created_at: int

    def to_dict(self) -> dict:
        return {
            "link_id": self.link_id,
            "from_artifact": self.from_artifact,
            "to_artifact": self.to_artifact,
            "link_type": self.link_type.value,
            "created_by": self.created_by,
            "created_at": self.created_at,
        }


class TraceGraph:
    def __init__(self, log: ChangeLog, artifact_exists: Callable[[str], bool],
                 direction_table: Optional[dict[LinkType, bool]] = None):
        self.log = log
        self._artifact_exists = artifact_exists
        self._links: dict[str, TraceLink] = {}
        self._triples: set[tuple[str, str, str]] = set()
        self._out: dict[str, list[str]] = {}  # impact-direction adjacency, link ids
        self._in: dict[str, list[str]] = {}
        self.direction = dict(IMPACT_FOLLOWS_EDGE)
        if direction_table:
            self.direction.update(direction_table)

    # -- mutation --------------------------------------------------------------

    def add(self, link_id: str, actor_id: str, from_artifact: str, to_artifact: str,
            link_type: LinkType | str, now: int) -> TraceLink:
        link_type = LinkType(link_type)
        if from_artifact == to_artifact:
            raise SelfLoop(f"link would self-loop on {from_artifact}")
        for artifact_id in (from_artifact, to_artifact):
            if not self._artifact_exists(artifact_id):
                raise UnknownArtifact(f"no such artifact: {artifact_id}")
        triple = (from_artifact, to_artifact, link_type.value)
        if triple in self._triples:
            raise DuplicateLink(f"duplicate link {triple}")
        link = TraceLink(link_id, from_artifact, to_artifact, link_type, actor_id, now)
        self._install(link)
        self.log.append(EventType.LINK, actor_id, from_artifact, {
            "link_id": link_id,
            "from_artifact": from_artifact,
            "to_artifact": to_artifact,
            "link_type": link_type.value,
        }, now)
        return link

    def remove(self, link_id: str, actor_id: str, now: int) -> TraceLink:
        link = self._links.get(link_id)
        if link is None:
            raise UnknownLink(f"no such link: {link_id}")
        self._uninstall(link)
        self.log.append(EventType.UNLINK, actor_id, link.from_artifact, {
            "link_id": link_id,
            "from_artifact": link.from_artifact,
            "to_artifact": link.to_artifact,
            "link_type": link.link_type.value,
        }, now)
        return link

    def _install(self, link: TraceLink) -> None:
        self._links[link.link_id] = link
        self._triples.add((link.from_artifact, link.to_artifact, link.link_type.value))
        src, dst = self._impact_endpoints(link)
        self._out.setdefault(src, []).append(link.link_id)
        self._in.setdefault(dst, []).append(link.link_id)

    def _uninstall(self, link: TraceLink) -> None:
        del self._links[link.link_id]
        self._triples.discard((link.from_artifact, link.to_artifact, link.link_type.value))
        src, dst = self._impact_endpoints(link)
        self._out[src].remove(link.link_id)
        self._in[dst].remove(link.link_id)

    def apply_link(self, link: TraceLink) -> None:
        """Install a link without logging (replay/import path)."""
        self._install(link)

    def apply_unlink(self, link_id: str) -> None:
        self._uninstall(self._links[link_id])

    def _impact_endpoints(self, link: TraceLink) -> tuple[str, str]:
        if self.direction[link.link_type]:
            return link.from_artifact, link.to_artifact
        return link.to_artifact, link.from_artifact

    # -- queries -----------------------------------------------------------------

    def get(self, link_id: str) -> TraceLink:
        link = self._links.get(link_id)
        if link is None:
            raise UnknownLink(f"no such link: {link_id}")
        return link

    def links(self) -> list[TraceLink]:
        return sorted(self._links.values(), key=lambda l: l.link_id)

    def impact_set(self, artifact_id: str, depth: Optional[int] = None) -> list[tuple[str, int]]:
        """Artifacts impacted by a change to artifact_id with hop distance.

        Breadth-first over the impact-direction adjacency; cycles are fine
        (visited set), each node reported once at its minimum distance,
        ordered by (distance, artifact id). The source is excluded.
        """
        if not self._artifact_exists(artifact_id):
            raise UnknownArtifact(f"no such artifact: {artifact_id}")
        return self._bfs(artifact_id, self._out, forward=True, depth=depth)

    def upstream_set(self, artifact_id: str, depth: Optional[int] = None) -> list[tuple[str, int]]:
        """Artifacts whose change would impact artifact_id (reverse traversal)."""
        if not self._artifact_exists(artifact_id):
            raise UnknownArtifact(f"no such artifact: {artifact_id}")
        return self._bfs(artifact_id, self._in, forward=False, depth=depth)

    def _bfs(self, start: str, index: dict[str, list[str]], forward: bool,
             depth: Optional[int]) -> list[tuple[str, int]]:
        dist = {start: 0}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            d = dist[node]
            if depth is not None and d >= depth:
                continue
            for link_id in index.get(node, ()):
                link = self._links[link_id]
                src, dst = self._impact_endpoints(link)
                nxt = dst if forward else src
                if nxt not in dist:
                    dist[nxt] = d + 1
                    queue.append(nxt)
        dist.pop(start)
        return sorted(dist.items(), key=lambda kv: (kv[1], kv[0]))

    def export_edge_list(self) -> str:
        """Tab-separated from/to/type lines, one per link, sorted by link id."""
        return "".join(
            f"{l.from_artifact}\t{l.to_artifact}\t{l.link_type.value}\n" for l in self.links()
        )

    def export_dot(self) -> str:
        lines = ["digraph trace {"]
        for l in self.links():
            lines.append(f'  "{l.from_artifact}" -> "{l.to_artifact}" [label="{l.link_type.value}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def provenance_chain(artifact: Artifact, version: Optional[int] = None) -> list[dict]:
    """Dense version history from creation up to `version` (default head).

    Every element is backed by the log entry recorded at commit time.
    """
    if version is None:
        version = artifact.head_version
    if not 1 <= version <= artifact.head_version:
        raise UnknownVersion(f"{artifact.artifact_id} has no version {version}")
    return [
        {
            "version": v.version,
            "author_id": v.author_id,
            "change_request_id": v.change_request_id,
            "timestamp": v.created_at,
            "log_seq": v.log_seq,
        }
        for v in artifact.versions[:version]
    ]
