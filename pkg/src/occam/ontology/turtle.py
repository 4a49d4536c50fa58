"""Turtle serialization for evidence graphs.

A deliberately small Turtle subset with a fixed, versioned vocabulary:
enough to round-trip our graphs byte-for-byte and to reject documents that
use predicates outside the published list.  Floats travel as ``xsd:double``
literals in shortest-repr form, so values survive export/import exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import TextIO
from urllib.parse import quote, unquote

from ..errors import TurtleImportError, TurtleParseError
from .graph import EDGE_TYPES, Edge, EvidenceGraph, NodeKey

VOCAB_IRI = "urn:occam:vocab:1#"
RDFS_IRI = "http://www.w3.org/2000/01/rdf-schema#"
XSD_IRI = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
_RDFS_CLASS = RDFS_IRI + "Class"
_RDFS_SUBCLASS = RDFS_IRI + "subClassOf"
_XSD_DOUBLE = XSD_IRI + "double"
_XSD_INTEGER = XSD_IRI + "integer"
_XSD_STRING = XSD_IRI + "string"

_INSTANCE_PREFIX = "urn:occam:"

#: node kind -> vocabulary class (local name)
KIND_CLASSES = {
    "class": "Class",
    "concept": "Concept",
    "evidence": "Evidence",
    "image": "Image",
}
_CLASS_KINDS = {local: kind for kind, local in KIND_CLASSES.items()}
# subclass inference is fixed and two-level: an EditedImage is an Image
_CLASS_KINDS["EditedImage"] = "image"

#: attribute key -> (predicate local name, value type)
ATTRIBUTE_PREDICATES = {
    "concept": ("concept", str),
    "concept_raw": ("conceptRaw", str),
    "confidence_drop_pct": ("confidenceDropPct", float),
    "contribution": ("contribution", float),
    "edited_image_ref": ("editedImageRef", str),
    "gt_class": ("gtClass", str),
    "image_id": ("imageId", str),
    "logit_delta": ("logitDelta", float),
    "mask_area_pct": ("maskAreaPct", float),
    "mask_ref": ("maskRef", str),
    "name": ("name", str),
    "original_confidence": ("originalConfidence", float),
    "pct_logit_drop": ("pctLogitDrop", float),
    "post_confidence": ("postConfidence", float),
    "predicted_class_index": ("predictedClassIndex", int),
    "predicted_class_name": ("predictedClassName", str),
    "text": ("text", str),
}
_PREDICATE_ATTRIBUTES = {
    local: (attr, kind) for attr, (local, kind) in ATTRIBUTE_PREDICATES.items()
}

#: edge predicate -> predicate local name
EDGE_PREDICATES = {
    "concept-associated-to-image": "associatedToImage",
    "evidence-of-concept": "ofConcept",
    "evidence-of-image": "ofImage",
    "image-predicted-as-class": "predictedAs",
}
_PREDICATE_EDGES = {local: name for name, local in EDGE_PREDICATES.items()}

_SCHEMA_LINES = (
    "occ:Class a rdfs:Class .",
    "occ:Concept a rdfs:Class .",
    "occ:EditedImage a rdfs:Class .",
    "occ:EditedImage rdfs:subClassOf occ:Image .",
    "occ:Evidence a rdfs:Class .",
    "occ:Image a rdfs:Class .",
)

_HEADER = (
    f"@prefix occ: <{VOCAB_IRI}> .\n"
    f"@prefix rdfs: <{RDFS_IRI}> .\n"
    f"@prefix xsd: <{XSD_IRI}> .\n"
)


def node_iri(run_id: str, kind: str, identifier: str) -> str:
    """Stable instance IRI: urn:occam:<run>/<kind>/<identifier>, both ends
    percent-encoded."""
    return (f"{_INSTANCE_PREFIX}{quote(run_id, safe='')}"
            f"/{kind}/{quote(identifier, safe='')}")


def _literal(value) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean attributes are not part of the vocabulary")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f'"{value!r}"^^xsd:double'
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    raise TypeError(f"unsupported attribute value type: {type(value).__name__}")


def export_turtle(graph: EvidenceGraph, sink: str | Path | TextIO | None = None) -> str:
    """Serialize a graph to Turtle; deterministic byte-for-byte.

    ``sink`` may be a path or open text file; the document text is returned
    either way.  An empty graph serializes to prefixes and schema triples
    only.
    """
    chunks = [_HEADER, "\n", "\n".join(_SCHEMA_LINES), "\n"]
    edges_by_subject: dict[NodeKey, list[Edge]] = {}
    for edge in graph.edges:
        edges_by_subject.setdefault(edge.subject, []).append(edge)

    for key in sorted(graph.nodes):
        kind, identifier = key
        if kind not in KIND_CLASSES:
            raise TurtleParseError(f"cannot serialize node of unknown kind {kind!r}")
        attrs = graph.nodes[key]
        lines = [f"<{node_iri(graph.run_id, kind, identifier)}> a occ:{KIND_CLASSES[kind]}"]
        for attr in sorted(attrs, key=lambda a: ATTRIBUTE_PREDICATES[a][0]):
            if attr not in ATTRIBUTE_PREDICATES:
                raise TurtleParseError(f"attribute {attr!r} has no predicate")
            local, _ = ATTRIBUTE_PREDICATES[attr]
            lines.append(f"    occ:{local} {_literal(attrs[attr])}")
        for edge in sorted(
            edges_by_subject.get(key, ()),
            key=lambda e: (EDGE_PREDICATES.get(e.predicate, e.predicate), e.object),
        ):
            if edge.predicate not in EDGE_PREDICATES:
                raise TurtleParseError(
                    f"cannot serialize unknown edge predicate {edge.predicate!r}"
                )
            target = node_iri(graph.run_id, edge.object[0], edge.object[1])
            lines.append(f"    occ:{EDGE_PREDICATES[edge.predicate]} <{target}>")
        chunks.append("\n" + " ;\n".join(lines) + " .\n")

    text = "".join(chunks)
    if sink is not None:
        if hasattr(sink, "write"):
            sink.write(text)
        else:
            Path(sink).write_text(text, encoding="utf-8")
    return text


# --- parsing ---------------------------------------------------------------

_WS = " \t\r\n"
_STRING_ESCAPES = {
    '"': '"', "'": "'", "\\": "\\", "n": "\n", "r": "\r",
    "t": "\t", "b": "\b", "f": "\f",
}


class _Scanner:
    """Tokenizer for the Turtle subset this module emits."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _error(self, message: str) -> TurtleParseError:
        line = self.text.count("\n", 0, self.pos) + 1
        return TurtleParseError(f"line {line}: {message}")

    def _skip_ws(self) -> None:
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in _WS:
                self.pos += 1
            elif ch == "#":
                end = text.find("\n", self.pos)
                self.pos = len(text) if end == -1 else end
            else:
                return

    def _read_iri(self) -> tuple:
        end = self.text.find(">", self.pos)
        if end == -1:
            raise self._error("unterminated IRI")
        iri = self.text[self.pos + 1:end]
        self.pos = end + 1
        return ("iri", iri)

    def _read_string(self) -> str:
        text = self.text
        self.pos += 1
        out = []
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "\n":
                raise self._error("newline inside string literal")
            if ch == "\\":
                self.pos += 1
                if self.pos >= len(text):
                    break
                esc = text[self.pos]
                if esc in _STRING_ESCAPES:
                    out.append(_STRING_ESCAPES[esc])
                    self.pos += 1
                elif esc in "uU":
                    width = 4 if esc == "u" else 8
                    hexpart = text[self.pos + 1:self.pos + 1 + width]
                    if len(hexpart) != width:
                        raise self._error("truncated unicode escape")
                    try:
                        out.append(chr(int(hexpart, 16)))
                    except ValueError:
                        raise self._error(f"bad unicode escape \\{esc}{hexpart}")
                    self.pos += 1 + width
                else:
                    raise self._error(f"unsupported string escape \\{esc}")
            else:
                out.append(ch)
                self.pos += 1
        raise self._error("unterminated string literal")

    def _read_word(self) -> tuple:
        import re

        match = re.match(r"[A-Za-z_][A-Za-z0-9_\-]*", self.text[self.pos:])
        if not match:
            raise self._error(f"unexpected character {self.text[self.pos]!r}")
        word = match.group(0)
        self.pos += len(word)
        if self.pos < len(self.text) and self.text[self.pos] == ":":
            self.pos += 1
            local_match = re.match(r"[A-Za-z0-9_\-.%]*", self.text[self.pos:])
            local = local_match.group(0)
            self.pos += len(local)
            if local.endswith("."):  # statement terminator, not part of the name
                local = local[:-1]
                self.pos -= 1
            return ("pname", word, local)
        if word == "a":
            return ("a",)
        raise self._error(f"bare word {word!r} is not valid here")

    def next_token(self):
        import re

        self._skip_ws()
        if self.pos >= len(self.text):
            return None
        ch = self.text[self.pos]
        if ch == "<":
            return self._read_iri()
        if ch == '"':
            value = self._read_string()
            if self.text[self.pos:self.pos + 2] == "^^":
                self.pos += 2
                self._skip_ws()
                if self.pos >= len(self.text):
                    raise self._error("missing datatype after ^^")
                if self.text[self.pos] == "<":
                    dtype = self._read_iri()[1]
                else:
                    tok = self._read_word()
                    if tok[0] != "pname":
                        raise self._error("datatype must be an IRI")
                    dtype = ("pname", tok[1], tok[2])
                return ("literal", value, dtype)
            return ("literal", value, None)
        if ch in ".;,":
            self.pos += 1
            return ("punct", ch)
        if ch == "@":
            self.pos += 1
            match = re.match(r"[A-Za-z]+", self.text[self.pos:])
            if not match:
                raise self._error("malformed directive")
            self.pos += len(match.group(0))
            return ("directive", match.group(0))
        number = re.match(r"[+-]?[0-9]+(\.[0-9]+)?([eE][+-]?[0-9]+)?",
                          self.text[self.pos:])
        if number:
            raw = number.group(0)
            self.pos += len(raw)
            if number.group(1) or number.group(2):
                return ("number", float(raw), _XSD_DOUBLE)
            return ("number", int(raw), _XSD_INTEGER)
        return self._read_word()


def _parse_statements(text: str):
    """Parse to a list of (subject IRI, predicate IRI, object term) triples.

    Object terms are ``("iri", value)`` or ``("literal", value, dtype IRI)``.
    """
    scanner = _Scanner(text)
    prefixes: dict[str, str] = {}
    triples = []

    def expand(token) -> str:
        if token[0] == "iri":
            return token[1]
        if token[0] == "pname":
            prefix = token[1]
            if prefix not in prefixes:
                raise scanner._error(f"undeclared prefix {prefix!r}")
            return prefixes[prefix] + token[2]
        raise scanner._error(f"expected an IRI, got {token[0]}")

    def expect_punct(ch: str) -> None:
        tok = scanner.next_token()
        if tok != ("punct", ch):
            raise scanner._error(f"expected {ch!r}")

    while True:
        token = scanner.next_token()
        if token is None:
            return triples
        if token[0] == "directive":
            if token[1] != "prefix":
                raise scanner._error(f"unsupported directive @{token[1]}")
            tok = scanner.next_token()
            if tok is None or tok[0] != "pname" or tok[2]:
                raise scanner._error("malformed @prefix")
            prefix_name = tok[1]
            iri_tok = scanner.next_token()
            if iri_tok is None or iri_tok[0] != "iri":
                raise scanner._error("@prefix needs an IRI")
            prefixes[prefix_name] = iri_tok[1]
            expect_punct(".")
            continue
        subject = expand(token)
        while True:
            pred_tok = scanner.next_token()
            if pred_tok is None:
                raise scanner._error("unterminated statement")
            if pred_tok == ("a",):
                predicate = RDF_TYPE
            else:
                predicate = expand(pred_tok)
            while True:
                obj_tok = scanner.next_token()
                if obj_tok is None:
                    raise scanner._error("missing object")
                if obj_tok[0] in ("iri", "pname"):
                    obj = ("iri", expand(obj_tok))
                elif obj_tok[0] == "literal":
                    dtype = obj_tok[2]
                    if dtype is not None and not isinstance(dtype, str):
                        dtype = expand(dtype)
                    obj = ("literal", obj_tok[1], dtype)
                elif obj_tok[0] == "number":
                    obj = ("literal", obj_tok[1], obj_tok[2])
                else:
                    raise scanner._error("invalid object term")
                triples.append((subject, predicate, obj))
                sep = scanner.next_token()
                if sep == ("punct", ","):
                    continue
                break
            if sep == ("punct", ";"):
                continue
            if sep == ("punct", "."):
                break
            raise scanner._error("expected ';', ',' or '.'")


def _format_triple(triple) -> str:
    subject, predicate, obj = triple
    if obj[0] == "iri":
        rendered = f"<{obj[1]}>"
    else:
        rendered = json.dumps(obj[1]) if isinstance(obj[1], str) else repr(obj[1])
    return f"<{subject}> <{predicate}> {rendered} ."


def _instance_key(iri: str, scanner_hint: str) -> tuple[str, str, str] | None:
    """Split urn:occam:<run>/<kind>/<id> IRIs; None for foreign IRIs."""
    if not iri.startswith(_INSTANCE_PREFIX) or iri.startswith(VOCAB_IRI):
        return None
    parts = iri[len(_INSTANCE_PREFIX):].split("/")
    if len(parts) != 3:
        raise TurtleParseError(f"{scanner_hint}: malformed node IRI <{iri}>")
    run_id, kind, identifier = (unquote(p) for p in parts)
    if kind not in KIND_CLASSES:
        raise TurtleParseError(f"{scanner_hint}: unknown node kind in IRI <{iri}>")
    return run_id, kind, identifier


def import_turtle(source: str | Path | TextIO) -> EvidenceGraph:
    """Parse a Turtle document produced by :func:`export_turtle`.

    Accepts a document string, a path, or an open text file.  Predicates
    outside the fixed vocabulary raise :class:`TurtleImportError` listing
    every offending triple.  Structural problems (dangling edges, missing
    cardinalities) import fine — run the consistency checker afterwards.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    else:
        text = str(source)
        if "\n" not in text and Path(text).is_file():
            text = Path(text).read_text(encoding="utf-8")

    triples = _parse_statements(text)
    unknown = []
    run_ids: set[str] = set()
    nodes: dict[NodeKey, dict] = {}
    edges: set[Edge] = set()

    def node_for(iri: str) -> NodeKey:
        parsed = _instance_key(iri, "import")
        if parsed is None:
            raise TurtleParseError(f"not an instance IRI: <{iri}>")
        run_id, kind, identifier = parsed
        run_ids.add(run_id)
        key = (kind, identifier)
        nodes.setdefault(key, {})
        return key

    for triple in triples:
        subject, predicate, obj = triple
        if predicate == RDF_TYPE:
            if subject.startswith(VOCAB_IRI):
                if obj != ("iri", _RDFS_CLASS):
                    unknown.append(triple)
                continue
            if obj[0] != "iri" or not obj[1].startswith(VOCAB_IRI):
                unknown.append(triple)
                continue
            declared = _CLASS_KINDS.get(obj[1][len(VOCAB_IRI):])
            key = node_for(subject)
            if declared is None or declared != key[0]:
                raise TurtleParseError(
                    f"type {obj[1]} does not match IRI kind for <{subject}>"
                )
            continue
        if predicate == _RDFS_SUBCLASS:
            if not (subject.startswith(VOCAB_IRI) and obj[0] == "iri"
                    and obj[1].startswith(VOCAB_IRI)):
                unknown.append(triple)
            continue
        if not predicate.startswith(VOCAB_IRI):
            unknown.append(triple)
            continue
        local = predicate[len(VOCAB_IRI):]
        if local in _PREDICATE_EDGES:
            if obj[0] != "iri":
                raise TurtleParseError(
                    f"edge predicate occ:{local} needs an IRI object"
                )
            subject_key = node_for(subject)
            target = _instance_key(obj[1], "import")
            if target is None:
                raise TurtleParseError(f"edge object is not a node IRI: <{obj[1]}>")
            run_ids.add(target[0])
            edges.add(Edge(_PREDICATE_EDGES[local], subject_key,
                           (target[1], target[2])))
            continue
        if local in _PREDICATE_ATTRIBUTES:
            attr, value_type = _PREDICATE_ATTRIBUTES[local]
            if obj[0] != "literal":
                raise TurtleParseError(f"occ:{local} needs a literal object")
            value, dtype = obj[1], obj[2]
            if value_type is float:
                if dtype != _XSD_DOUBLE:
                    raise TurtleParseError(f"occ:{local} must be xsd:double")
                value = float(value)
            elif value_type is int:
                if not isinstance(value, int):
                    raise TurtleParseError(f"occ:{local} must be an integer")
            else:
                if not isinstance(value, str) or dtype not in (None, _XSD_STRING):
                    raise TurtleParseError(f"occ:{local} must be a plain string")
            nodes[node_for(subject)][attr] = value
            continue
        unknown.append(triple)

    if unknown:
        shown = [_format_triple(t) for t in unknown]
        raise TurtleImportError(
            f"{len(shown)} triple(s) use predicates outside the vocabulary",
            triples=shown,
        )

    if len(run_ids) > 1:
        raise TurtleParseError(f"document mixes run ids: {sorted(run_ids)}")
    run_id = next(iter(run_ids)) if run_ids else ""
    return EvidenceGraph(run_id=run_id, nodes=nodes, edges=edges)
