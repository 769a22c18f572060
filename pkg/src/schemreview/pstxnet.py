"""Line-oriented pstxnet netlist subset: parser and renderer.

Grammar (one net block):

    NET_NAME
    '<net name>'
    NODE_NAME <refdes> <pin>
    NODE_NAME <refdes> <pin>          # one or more node lines

Blocks are separated by blank lines; ``#`` starts a comment line that may
appear anywhere. ``render_pstxnet`` emits this same subset, so
``parse_pstxnet(render_pstxnet(nets))`` is a fixpoint on canonical nets.
"""

from __future__ import annotations

from .errors import DuplicateNetName, MalformedNetBlock
from .model import Net


def parse_pstxnet(text: str) -> list[Net]:
    nets: list[Net] = []
    seen_names: set[str] = set()

    pending_name: str | None = None    # net name read, nodes expected
    expect_name_at: int | None = None  # NET_NAME seen, quoted name expected
    nodes: list[tuple[str, str]] = []

    def close_block(line_no: int) -> None:
        nonlocal pending_name, nodes
        if expect_name_at is not None:
            raise MalformedNetBlock("NET_NAME without a net name line", expect_name_at)
        if pending_name is None:
            return
        if not nodes:
            raise MalformedNetBlock(f"net '{pending_name}' has no NODE_NAME lines", line_no)
        nets.append(Net(pending_name, tuple(nodes)))
        pending_name = None
        nodes = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            close_block(line_no)
            continue
        if expect_name_at is not None:
            if len(line) < 2 or not (line[0] == line[-1] == "'"):
                raise MalformedNetBlock("net name must be single-quoted", line_no)
            name = line[1:-1]
            if not name:
                raise MalformedNetBlock("empty net name", line_no)
            if name in seen_names:
                raise DuplicateNetName(f"net {name!r} declared twice (line {line_no})")
            seen_names.add(name)
            pending_name = name
            expect_name_at = None
            continue
        if line == "NET_NAME":
            close_block(line_no)
            expect_name_at = line_no
            continue
        if line.startswith("NODE_NAME"):
            if pending_name is None:
                raise MalformedNetBlock("NODE_NAME before any NET_NAME", line_no)
            parts = line.split()
            if len(parts) != 3:
                raise MalformedNetBlock("NODE_NAME needs <refdes> <pin>", line_no)
            nodes.append((parts[1], parts[2]))
            continue
        raise MalformedNetBlock(f"unrecognized line {line!r}", line_no)

    close_block(len(text.splitlines()) + 1)
    return nets


def render_pstxnet(nets: list[Net]) -> str:
    """Render nets back through the subset grammar (blocks in given order)."""
    blocks = []
    for net in nets:
        lines = ["NET_NAME", f"'{net.name}'"]
        lines.extend(f"NODE_NAME {c} {p}" for c, p in net.nodes)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
