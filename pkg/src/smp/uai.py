"""Reader/writer for the UAI ``MARKOV`` model format and evidence files."""
from __future__ import annotations

from .errors import ParseError
from .factor import DenseFactor, GraphicalModel


def _tokens(text):
    """Yield (token, line number) pairs, skipping ``c``/``#`` comment lines."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("c ", "#")) or stripped == "c":
            continue
        for tok in stripped.split():
            yield tok, lineno


class _Reader:
    def __init__(self, text):
        self._it = _tokens(text)
        self.line = 0

    def next(self, what):
        try:
            tok, self.line = next(self._it)
        except StopIteration:
            raise ParseError(f"unexpected end of file while reading {what}", self.line)
        return tok

    def integer(self, what):
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected integer {what}, got {tok!r}", self.line)

    def real(self, what):
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected number {what}, got {tok!r}", self.line)

    def at_end(self):
        try:
            tok, self.line = next(self._it)
        except StopIteration:
            return True
        raise ParseError(f"trailing content {tok!r}", self.line)


def parse_uai(text: str) -> GraphicalModel:
    r = _Reader(text)
    kind = r.next("preamble")
    if kind.upper() != "MARKOV":
        raise ParseError(f"expected MARKOV preamble, got {kind!r}", r.line)
    n = r.integer("variable count")
    if n < 1:
        raise ParseError("model must have at least one variable", r.line)
    cards = []
    for i in range(n):
        c = r.integer(f"cardinality of variable {i}")
        if c < 2:
            raise ParseError(f"variable {i} has cardinality {c} < 2", r.line)
        cards.append(c)
    m = r.integer("factor count")
    if m < 0:
        raise ParseError("negative factor count", r.line)
    scopes = []
    for j in range(m):
        arity = r.integer(f"arity of factor {j}")
        scope = []
        for _ in range(arity):
            v = r.integer(f"variable of factor {j}")
            if not 0 <= v < n:
                raise ParseError(f"factor {j} references unknown variable {v}", r.line)
            scope.append(v)
        if len(set(scope)) != len(scope):
            raise ParseError(f"factor {j} repeats a variable", r.line)
        scopes.append(scope)
    factors = []
    for j, scope in enumerate(scopes):
        length = r.integer(f"table length of factor {j}")
        line = r.line
        expected = 1
        for v in scope:
            expected *= cards[v]
        if length != expected:
            raise ParseError(
                f"factor {j} declares {length} entries, scope needs {expected}", line
            )
        vals = [r.real(f"entry of factor {j}") for _ in range(length)]
        if any(x < 0 for x in vals):
            raise ParseError(f"factor {j} has a negative entry", r.line)
        factors.append(DenseFactor(scope, [cards[v] for v in scope], vals))
    r.at_end()
    return GraphicalModel(cards, factors)


def parse_evidence(text: str) -> dict:
    r = _Reader(text)
    try:
        count = r.integer("evidence count")
    except ParseError:
        if not text.strip():
            return {}
        raise
    evidence = {}
    for _ in range(count):
        v = r.integer("evidence variable")
        evidence[v] = r.integer("evidence value")
    r.at_end()
    return evidence


def apply_evidence(model: GraphicalModel, evidence: dict) -> GraphicalModel:
    for v, x in evidence.items():
        if not 0 <= v < model.n:
            raise ParseError(f"evidence on unknown variable {v}")
        if not 0 <= x < model.cards[v]:
            raise ParseError(f"evidence value {x} outside domain of variable {v}")
    return model.with_evidence(evidence)


def format_uai(model: GraphicalModel) -> str:
    lines = ["MARKOV", str(model.n), " ".join(map(str, model.cards)), str(len(model.factors))]
    for f in model.factors:
        lines.append(" ".join(map(str, (len(f.scope), *f.scope))))
    lines.append("")
    for f in model.factors:
        lines.append(str(len(f)))
        lines.append(" ".join(repr(float(x)) for x in f.flat))
        lines.append("")
    return "\n".join(lines)
