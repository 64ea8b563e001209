"""Corpus loading and document construction.

The knowledge base arrives as a UTF-8, newline-delimited file: one JSON
object per line with fields ``id``, ``name``, ``description``, ``ports``
(array of ``{name, direction, width}``), ``comments`` (array of strings)
and ``code``. Each record is rendered into a single embeddable document:
a metadata header formatted as Verilog line comments, a blank separator
line, then the unmodified source code. Metadata-first ordering keeps the
natural-language content at the front of the embedding window.

Header template (byte-reproducible):

    // Module: <name>
    // Description: <description>        (omitted when empty)
    // Ports:                            (omitted when no ports)
    //   <direction> <width> <name>
    // Comments:                         (omitted when no comments)
    //   <comment>
    <blank line>
    <code>
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError

PORT_DIRECTIONS = ("input", "output", "inout")

_WIDTH_RE = re.compile(r"^\[(\d+):(\d+)\]$")


def _valid_width(width: str) -> bool:
    if width == "1":
        return True
    m = _WIDTH_RE.match(width)
    return m is not None and int(m.group(1)) >= int(m.group(2)) >= 0


def _single_line(value: str) -> bool:
    return "\n" not in value and "\r" not in value


@dataclass(frozen=True)
class PortDecl:
    """One port of an HDL module: direction, bit-width descriptor, name."""

    name: str
    direction: str
    width: str = "1"

    def validate(self) -> None:
        if not self.name or not _single_line(self.name):
            raise ValueError(f"port name {self.name!r} invalid")
        if self.direction not in PORT_DIRECTIONS:
            raise ValueError(f"port direction {self.direction!r} not in {PORT_DIRECTIONS}")
        if not _valid_width(self.width):
            raise ValueError(f"port width {self.width!r} must be '1' or '[hi:lo]' with hi >= lo >= 0")


@dataclass(frozen=True)
class ModuleRecord:
    """One corpus entry: a pre-verified HDL module plus its metadata."""

    id: str
    name: str
    description: str
    ports: tuple[PortDecl, ...]
    comments: tuple[str, ...]
    code: str

    def validate(self) -> None:
        if not self.id:
            raise ValueError("id must be non-empty")
        if not self.name:
            raise ValueError("name must be non-empty")
        if not self.code:
            raise ValueError("code must be non-empty")
        # Header lines must stay line-structured for exact parse-back.
        if not _single_line(self.name):
            raise ValueError("name must not contain newlines")
        if not _single_line(self.description):
            raise ValueError("description must not contain newlines")
        for port in self.ports:
            port.validate()


@dataclass(frozen=True)
class Document:
    """Rendered header-plus-code text for one module, ready to embed."""

    id: str
    text: str
    header_length: int

    @property
    def header(self) -> str:
        return self.text[: self.header_length]

    @property
    def code(self) -> str:
        return self.text[self.header_length :]


@dataclass(frozen=True)
class ParsedHeader:
    """Metadata recovered from a document header."""

    name: str
    description: str
    ports: tuple[PortDecl, ...]
    comments: tuple[str, ...] = ()


def _record_from_obj(obj: object, position: int) -> ModuleRecord:
    if not isinstance(obj, dict):
        raise CorpusError(f"record {position}: expected an object, got {type(obj).__name__}")

    def _text_field(key: str, required_nonempty: bool) -> str:
        value = obj.get(key)
        if value is None:
            raise CorpusError(f"record {position}: missing field {key!r}")
        if not isinstance(value, str):
            raise CorpusError(f"record {position}: field {key!r} must be a string")
        if required_nonempty and not value:
            raise CorpusError(f"record {position}: field {key!r} must be non-empty")
        return value

    ports_raw = obj.get("ports", [])
    comments_raw = obj.get("comments", [])
    if not isinstance(ports_raw, list):
        raise CorpusError(f"record {position}: field 'ports' must be an array")
    if not isinstance(comments_raw, list) or not all(isinstance(c, str) for c in comments_raw):
        raise CorpusError(f"record {position}: field 'comments' must be an array of strings")

    ports = []
    for i, p in enumerate(ports_raw):
        if not isinstance(p, dict):
            raise CorpusError(f"record {position}: field 'ports[{i}]' must be an object")
        port = PortDecl(
            name=str(p.get("name", "")),
            direction=str(p.get("direction", "")),
            width=str(p.get("width", "1")),
        )
        try:
            port.validate()
        except ValueError as exc:
            raise CorpusError(f"record {position}: field 'ports[{i}]': {exc}") from exc
        ports.append(port)

    record = ModuleRecord(
        id=_text_field("id", required_nonempty=True),
        name=_text_field("name", required_nonempty=True),
        description=_text_field("description", required_nonempty=False),
        ports=tuple(ports),
        comments=tuple(comments_raw),
        code=_text_field("code", required_nonempty=True),
    )
    try:
        record.validate()
    except ValueError as exc:
        raise CorpusError(f"record {position}: {exc}") from exc
    return record


def load_corpus(path: str | Path) -> list[ModuleRecord]:
    """Load a newline-delimited corpus file, preserving file order.

    Raises CorpusError naming the record index (1-based) and the offending
    field for malformed records, and both positions for duplicate ids.
    """
    path = Path(path)
    records: list[ModuleRecord] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        position = 0
        for line in fh:
            if not line.strip():
                continue
            position += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"record {position}: invalid JSON: {exc}") from exc
            record = _record_from_obj(obj, position)
            if record.id in seen:
                raise CorpusError(
                    f"duplicate id {record.id!r} at records {seen[record.id]} and {position}"
                )
            seen[record.id] = position
            records.append(record)
    return records


def build_document(record: ModuleRecord) -> Document:
    """Render one record into its embeddable document.

    The header carries, in order: module name, description, port list,
    original comments; a blank line separates it from the verbatim code.
    Empty sections are omitted entirely rather than emitted as bare
    headings. Multi-line comments are split across comment lines.
    """
    record.validate()
    lines = [f"// Module: {record.name}"]
    if record.description:
        lines.append(f"// Description: {record.description}")
    if record.ports:
        lines.append("// Ports:")
        for port in record.ports:
            lines.append(f"//   {port.direction} {port.width} {port.name}")
    if record.comments:
        lines.append("// Comments:")
        for comment in record.comments:
            for part in comment.splitlines() or [""]:
                lines.append(f"//   {part}")
    header = "\n".join(lines) + "\n\n"
    return Document(id=record.id, text=header + record.code, header_length=len(header))


def parse_header(text: str) -> ParsedHeader:
    """Recover metadata from a document's header.

    Inverse of build_document for name, description and ports; comments
    are returned as rendered lines (multi-line originals are not rejoined).
    """
    name = ""
    description = ""
    ports: list[PortDecl] = []
    comments: list[str] = []
    section = None
    for line in text.splitlines():
        if not line.startswith("//"):
            break
        if line.startswith("// Module: "):
            name = line[len("// Module: ") :]
            section = None
        elif line.startswith("// Description: "):
            description = line[len("// Description: ") :]
            section = None
        elif line == "// Ports:":
            section = "ports"
        elif line == "// Comments:":
            section = "comments"
        elif line.startswith("//   ") and section == "ports":
            parts = line[len("//   ") :].split(" ", 2)
            if len(parts) != 3:
                raise CorpusError(f"unparseable port line: {line!r}")
            ports.append(PortDecl(name=parts[2], direction=parts[0], width=parts[1]))
        elif line.startswith("//   ") and section == "comments":
            comments.append(line[len("//   ") :])
        else:
            section = None
    if not name:
        raise CorpusError("header has no '// Module:' line")
    return ParsedHeader(
        name=name, description=description, ports=tuple(ports), comments=tuple(comments)
    )


def batch_documents(docs: list[Document], batch_size: int = 256) -> list[list[Document]]:
    """Split documents into order-preserving batches of batch_size.

    Only the final batch may be smaller.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return [docs[i : i + batch_size] for i in range(0, len(docs), batch_size)]


def save_documents(docs: list[Document], path: str | Path) -> None:
    """Write documents as a newline-delimited file of {id, text, header_length}."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(
                json.dumps(
                    {"id": doc.id, "text": doc.text, "header_length": doc.header_length},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_documents(path: str | Path) -> list[Document]:
    """Load a documents file written by save_documents."""
    path = Path(path)
    docs: list[Document] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        position = 0
        for line in fh:
            if not line.strip():
                continue
            position += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"document {position}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
                raise CorpusError(f"document {position}: missing string field 'id'")
            if not isinstance(obj.get("text"), str) or not isinstance(
                obj.get("header_length"), int
            ):
                raise CorpusError(f"document {position}: needs string 'text' and int 'header_length'")
            if obj["id"] in seen:
                raise CorpusError(
                    f"duplicate id {obj['id']!r} at documents {seen[obj['id']]} and {position}"
                )
            seen[obj["id"]] = position
            docs.append(Document(id=obj["id"], text=obj["text"], header_length=obj["header_length"]))
    return docs
