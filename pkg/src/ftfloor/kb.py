"""In-memory triple store over a fixed service-ontology vocabulary.

Holds the service individuals, their conditions and the factory resources,
and answers condition retrieval, taxonomy and availability queries.
"""

from __future__ import annotations

import re
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Union
from urllib.parse import parse_qsl, urlsplit

NS = "http://iot.uni-trier.de/FTOnto#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
XSD = "http://www.w3.org/2001/XMLSchema#"


class Iri(str):
    """Absolute IRI. Relative names resolve against the default namespace."""

    __slots__ = ()

    def __new__(cls, value: str):
        if not value:
            raise ValueError("empty IRI")
        if value.startswith("?"):
            raise ValueError(f"IRI may not start with '?': {value!r}")
        if ":" not in value.split("/", 1)[0] and not value.startswith("http"):
            value = NS + value
        return super().__new__(cls, value)

    @property
    def local(self) -> str:
        for sep in ("#", "/"):
            if sep in self:
                return self.rsplit(sep, 1)[1]
        return str(self)

    def __repr__(self):
        return f"Iri({self.local if self.startswith(NS) else str(self)!r})"


DATATYPES = {
    "string": XSD + "string",
    "boolean": XSD + "boolean",
    "integer": XSD + "integer",
}
_DATATYPE_NAMES = {v: k for k, v in DATATYPES.items()}


class Literal(NamedTuple):
    lexical: str
    datatype: str = "string"

    def check(self) -> "Literal":
        if self.datatype not in DATATYPES:
            raise ValueError(f"unsupported datatype {self.datatype!r}")
        if self.datatype == "boolean" and self.lexical not in ("true", "false"):
            raise ValueError(f"bad boolean lexical {self.lexical!r}")
        if self.datatype == "integer" and not re.fullmatch(r"[+-]?\d+", self.lexical):
            raise ValueError(f"bad integer lexical {self.lexical!r}")
        return self


Term = Union[Iri, Literal]


class Triple(NamedTuple):
    subject: Iri
    predicate: Iri
    object: Term


TYPE = Iri(RDF + "type")
SUBCLASS = Iri(RDFS + "subClassOf")
HAS_DESCRIPTION = Iri(NS + "hasDescription")
HAS_PRECONDITION = Iri(NS + "hasPrecondition")
HAS_POSTCONDITION = Iri(NS + "hasPostcondition")
HAS_URL = Iri(NS + "hasURL")
IS_CHECKED_BY = Iri(NS + "isCheckedBy")
REQUIRED_KEY = Iri(NS + "requiredKeyInServiceResponse")
REQUIRED_VALUE = Iri(NS + "requiredValueInServiceResponse")
ACTUATES = Iri(NS + "actuates")

VOCABULARY = frozenset(
    {
        TYPE,
        SUBCLASS,
        HAS_DESCRIPTION,
        HAS_PRECONDITION,
        HAS_POSTCONDITION,
        HAS_URL,
        IS_CHECKED_BY,
        REQUIRED_KEY,
        REQUIRED_VALUE,
        ACTUATES,
    }
)

SERVICE_CLASS = Iri("Service")
ACTUATION_CLASS = Iri("ActuationService")
SENSING_CLASS = Iri("SensingService")


class TripleParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnknownResource(LookupError):
    pass


@dataclass(frozen=True)
class ConditionBinding:
    condition: Iri
    checker_url: str
    required_key: str
    required_value: str


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: Iri
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.subject.local} ({self.detail})"


def is_var(term) -> bool:
    return isinstance(term, str) and not isinstance(term, Iri) and term.startswith("?")


def _sort_key(term) -> str:
    if isinstance(term, Literal):
        return '"' + term.lexical
    return str(term)


class KnowledgeBase:
    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: set[Triple] = set()
        self._by_s = defaultdict(set)
        self._by_p = defaultdict(set)
        self._by_o = defaultdict(set)
        self._by_po = defaultdict(set)
        self._write = threading.Lock()
        self.add_all(triples)

    def __len__(self):
        return len(self._triples)

    def __iter__(self):
        return iter(sorted(self._triples, key=_triple_key))

    def __contains__(self, triple):
        return triple in self._triples

    def add(self, triple: Triple) -> None:
        s, p, o = triple
        if not isinstance(s, Iri) or not isinstance(p, Iri):
            raise TypeError(f"subject and predicate must be IRIs: {triple!r}")
        if isinstance(o, Literal):
            o.check()
        elif not isinstance(o, Iri):
            raise TypeError(f"object must be an IRI or Literal: {triple!r}")
        triple = Triple(s, p, o)
        with self._write:
            if triple in self._triples:
                return
            self._triples.add(triple)
            self._by_s[s].add(triple)
            self._by_p[p].add(triple)
            self._by_o[o].add(triple)
            self._by_po[p, o].add(triple)

    def add_all(self, triples: Iterable[Triple]) -> None:
        for t in triples:
            self.add(t)

    def _candidates(self, s, p, o):
        sv, pv, ov = is_var(s), is_var(p), is_var(o)
        if not pv and not ov:
            pool = self._by_po.get((p, o), ())
        elif not sv:
            pool = self._by_s.get(s, ())
        elif not ov:
            pool = self._by_o.get(o, ())
        elif not pv:
            pool = self._by_p.get(p, ())
        else:
            pool = self._triples
        for t in pool:
            if (sv or t.subject == s) and (pv or t.predicate == p) and (ov or t.object == o):
                yield t

    def objects(self, s: Iri, p: Iri) -> list[Term]:
        return sorted((t.object for t in self._by_s.get(s, ()) if t.predicate == p), key=_sort_key)

    def subjects(self, p: Iri, o: Term) -> list[Iri]:
        return sorted(t.subject for t in self._by_po.get((p, o), ()))

    def match(self, patterns: list[tuple]) -> list[dict]:
        """Evaluate a conjunctive pattern; variables are strings starting with ``?``."""
        if not patterns:
            raise ValueError("match needs at least one pattern")
        results = []
        self._join(list(patterns), {}, results)
        unique = {tuple(sorted(b.items())): b for b in results}
        names = sorted({n for b in results for n in b})
        return sorted(unique.values(), key=lambda b: tuple(_sort_key(b.get(n, "")) for n in names))

    def _join(self, patterns, binding, out):
        if not patterns:
            out.append(dict(binding))
            return
        resolved = [tuple(binding.get(x, x) if is_var(x) else x for x in pat) for pat in patterns]
        # most bound pattern first
        idx = min(range(len(resolved)), key=lambda i: sum(is_var(x) for x in resolved[i]))
        pat = resolved[idx]
        rest = patterns[:idx] + patterns[idx + 1 :]
        for t in self._candidates(*pat):
            extended = dict(binding)
            ok = True
            for var, val in zip(pat, t):
                if is_var(var):
                    if extended.setdefault(var, val) != val:
                        ok = False
                        break
            if ok:
                self._join(rest, extended, out)


def _triple_key(t: Triple):
    return (str(t.subject), str(t.predicate), _sort_key(t.object))


# -- persistence ------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {v[1]: k for k, v in _ESCAPES.items()}
_LITERAL_RE = re.compile(r'^"((?:[^"\\]|\\.)*)"\^\^<([^<>]+)>$')


def _term_text(term: Term) -> str:
    if isinstance(term, Literal):
        lex = "".join(_ESCAPES.get(c, c) for c in term.lexical)
        return f'"{lex}"^^<{DATATYPES[term.datatype]}>'
    return f"<{term}>"


def _parse_term(text: str, lineno: int) -> Term:
    if text.startswith("<") and text.endswith(">"):
        value = text[1:-1]
        if not value or any(c in value for c in "<> "):
            raise TripleParseError(lineno, f"malformed IRI {text!r}")
        return Iri(value)
    m = _LITERAL_RE.match(text)
    if not m:
        raise TripleParseError(lineno, f"malformed term {text!r}")
    raw, dt = m.groups()
    if dt not in _DATATYPE_NAMES:
        raise TripleParseError(lineno, f"unsupported datatype <{dt}>")
    lexical = re.sub(r"\\(.)", lambda g: _UNESCAPES.get(g.group(1), g.group(1)), raw)
    try:
        return Literal(lexical, _DATATYPE_NAMES[dt]).check()
    except ValueError as exc:
        raise TripleParseError(lineno, str(exc)) from None


def load_triples(text: str) -> KnowledgeBase:
    kb = KnowledgeBase()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise TripleParseError(lineno, f"expected 3 tab-separated fields, got {len(fields)}")
        s, p, o = (_parse_term(f, lineno) for f in fields)
        if not isinstance(s, Iri) or not isinstance(p, Iri):
            raise TripleParseError(lineno, "subject and predicate must be IRIs")
        kb.add(Triple(s, p, o))
    return kb


def dump_triples(kb_or_triples) -> str:
    triples = sorted(set(kb_or_triples), key=_triple_key)
    return "".join(f"{_term_text(t.subject)}\t{_term_text(t.predicate)}\t{_term_text(t.object)}\n" for t in triples)


# -- queries ----------------------------------------------------------------

def condition_patterns(service_url: str, role: str = "pre") -> list[tuple]:
    link = {"pre": HAS_PRECONDITION, "post": HAS_POSTCONDITION}[role]
    return [
        ("?service", HAS_URL, Literal(service_url)),
        ("?service", link, "?condition"),
        ("?condition", IS_CHECKED_BY, "?checkService"),
        ("?checkService", HAS_URL, "?checkURL"),
        ("?condition", REQUIRED_KEY, "?requiredKey"),
        ("?condition", REQUIRED_VALUE, "?requiredValue"),
    ]


def conditions_of(kb: KnowledgeBase, service_url: str, role: str = "pre") -> list[ConditionBinding]:
    if role not in ("pre", "post"):
        raise ValueError(f"role must be 'pre' or 'post', not {role!r}")
    rows = kb.match(condition_patterns(service_url, role))
    bindings = {
        ConditionBinding(
            condition=r["?condition"],
            checker_url=r["?checkURL"].lexical,
            required_key=r["?requiredKey"].lexical,
            required_value=r["?requiredValue"].lexical,
        )
        for r in rows
    }
    return sorted(bindings, key=lambda b: str(b.condition))


def descendants(kb: KnowledgeBase, class_iri: Iri) -> list[Iri]:
    classes, frontier = {class_iri}, [class_iri]
    while frontier:
        c = frontier.pop()
        for sub in kb.subjects(SUBCLASS, c):
            if sub not in classes:
                classes.add(sub)
                frontier.append(sub)
    instances = set()
    for c in classes:
        instances.update(kb.subjects(TYPE, c))
    return sorted(instances)


def url_params(url: str) -> dict[str, str]:
    return dict(parse_qsl(urlsplit(url).query))


def unavailable_services(kb: KnowledgeBase, fault_set: Iterable[str]) -> list[str]:
    """URLs of services that a set of faulted machines makes unusable.

    A service is unavailable when its provider is faulted or when one of its
    preconditions demands ``state = ready`` of a faulted machine.
    """
    faults = set()
    for m in fault_set:
        iri = m if isinstance(m, Iri) else Iri(m)
        if not kb.objects(iri, TYPE):
            raise UnknownResource(f"unknown_resource: {iri.local}")
        faults.add(iri.local)
    if not faults:
        return []
    out = set()
    for svc in descendants(kb, SERVICE_CLASS):
        for url in kb.objects(svc, HAS_URL):
            if url_params(url.lexical).get("machine") in faults:
                out.add(url.lexical)
    rows = kb.match(
        [
            ("?service", HAS_PRECONDITION, "?condition"),
            ("?condition", IS_CHECKED_BY, "?checker"),
            ("?checker", HAS_URL, "?checkURL"),
            ("?condition", REQUIRED_KEY, Literal("state")),
            ("?condition", REQUIRED_VALUE, "?value"),
            ("?service", HAS_URL, "?url"),
        ]
    )
    for r in rows:
        if r["?value"].lexical.lower() == "ready" and url_params(r["?checkURL"].lexical).get("machine") in faults:
            out.add(r["?url"].lexical)
    return sorted(out)


def validate(kb: KnowledgeBase) -> list[Violation]:
    report = []
    for t in sorted(kb._triples, key=_triple_key):
        if t.predicate not in VOCABULARY:
            report.append(Violation("unknown_predicate", t.subject, t.predicate))
    conditions = {t.object for p in (HAS_PRECONDITION, HAS_POSTCONDITION) for t in kb._by_p.get(p, ())}
    checkers = set()
    for c in sorted(conditions):
        if not isinstance(c, Iri):
            report.append(Violation("literal_condition", Iri("invalid"), str(c)))
            continue
        for pred, name in ((IS_CHECKED_BY, "isCheckedBy"), (REQUIRED_KEY, "requiredKey"), (REQUIRED_VALUE, "requiredValue")):
            n = len(kb.objects(c, pred))
            if n != 1:
                report.append(Violation("condition_cardinality", c, f"{name} x{n}"))
        for k in kb.objects(c, REQUIRED_KEY):
            if not isinstance(k, Literal) or not k.lexical:
                report.append(Violation("empty_required_key", c, str(k)))
        checkers.update(o for o in kb.objects(c, IS_CHECKED_BY) if isinstance(o, Iri))
    actuation = set(descendants(kb, ACTUATION_CLASS))
    for chk in sorted(checkers):
        urls = kb.objects(chk, HAS_URL)
        if len(urls) != 1:
            report.append(Violation("checker_url_cardinality", chk, f"hasURL x{len(urls)}"))
        elif not isinstance(urls[0], Literal) or not urlsplit(urls[0].lexical).path:
            report.append(Violation("checker_url_malformed", chk, str(urls[0])))
        if chk in actuation:
            report.append(Violation("actuation_checker", chk, "condition checked by an actuation service"))
    seen = {}
    for svc in descendants(kb, SERVICE_CLASS):
        urls = kb.objects(svc, HAS_URL)
        if len(urls) != 1:
            report.append(Violation("service_url_cardinality", svc, f"hasURL x{len(urls)}"))
            continue
        other = seen.setdefault(urls[0], svc)
        if other != svc:
            report.append(Violation("duplicate_url", svc, f"shares URL with {other.local}"))
    return report


def to_rdf_xml(kb: KnowledgeBase, service: Iri) -> str:
    """Display-only RDF/XML-style fragment of one service individual."""

    def res(tag, iri):
        return f'  <{tag} rdf:resource="{iri}"/>'

    lines = [f'<owl:NamedIndividual rdf:about="{service}">']
    for c in kb.objects(service, TYPE):
        lines.append(res("rdf:type", c))
    for d in kb.objects(service, HAS_DESCRIPTION):
        lines.append(res("FTOnto:hasDescription", d))
    for c in kb.objects(service, HAS_PRECONDITION):
        lines.append(res("FTOnto:hasPrecondition", c))
    for c in kb.objects(service, HAS_POSTCONDITION):
        lines.append(res("FTOnto:hasPostcondition", c))
    for u in kb.objects(service, HAS_URL):
        lex = u.lexical.replace("&", "&amp;")
        lines.append(f'  <FTOnto:hasURL rdf:datatype="{DATATYPES[u.datatype]}">{lex}</FTOnto:hasURL>')
    lines.append("</owl:NamedIndividual>")
    return "\n".join(lines) + "\n"

