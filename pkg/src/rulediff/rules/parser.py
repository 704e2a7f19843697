"""Lexer and recursive-descent parser for the rule language.

Precedence, lowest first: ``implies`` (right-assoc) < ``or`` < ``and`` <
``not`` < comparison / inclusion / string predicate < primary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    COMPARISON_OPS,
    And,
    Comparison,
    Expr,
    Implies,
    Inclusion,
    Literal,
    Not,
    Or,
    StringPredicate,
    Substring,
    Term,
    Var,
)

KEYWORDS = {
    "implies", "or", "and", "not", "in", "notIn",
    "startswith", "endswith", "substring", "date",
}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.line = line
        self.column = column
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at line {line}, column {column}{detail}")


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, dec, str, op, punct, eof
    text: str
    value: object
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<dec>-?\d+\.\d+(?:[eE][+-]?\d+)?|-?\d+[eE][+-]?\d+)
  | (?P<int>-?\d+)
  | (?P<str>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<op><=|>=|!=|=|<|>)
  | (?P<punct>[()\[\],])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_ESCAPE_RE = re.compile(r"\\(.)")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        raw = m.group()
        if kind == "ws":
            newlines = raw.count("\n")
            if newlines:
                line += newlines
                line_start = pos + raw.rindex("\n") + 1
        elif kind == "dec":
            tokens.append(Token("dec", raw, float(raw), line, col))
        elif kind == "int":
            tokens.append(Token("int", raw, int(raw), line, col))
        elif kind == "str":
            tokens.append(Token("str", raw, _ESCAPE_RE.sub(r"\1", raw[1:-1]), line, col))
        elif kind == "ident":
            tokens.append(Token("keyword" if raw in KEYWORDS else "ident", raw, raw, line, col))
        else:
            tokens.append(Token(kind, raw, raw, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", None, line, pos - line_start + 1))
    return tokens


_TERM_START = frozenset({"<identifier>", "<number>", "<string>", "date", "substring"})
_ATOM_START = _TERM_START | {"(", "not", "startswith", "endswith"}


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("keyword", "op", "punct") and self.tok.text == text

    def fail(self, expected) -> ParseError:
        tok = self.tok
        what = "end of input" if tok.kind == "eof" else f"token {tok.text!r}"
        return ParseError(f"unexpected {what}", tok.line, tok.column, frozenset(expected))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.fail({text})
        return self.advance()

    # grammar ---------------------------------------------------------------

    def parse(self) -> Expr:
        expr = self.implies()
        if self.tok.kind != "eof":
            raise self.fail({"<end of input>", "implies", "or", "and"})
        return expr

    def implies(self) -> Expr:
        left = self.or_()
        if self.at("implies"):
            self.advance()
            return Implies(left, self.implies())
        return left

    def or_(self) -> Expr:
        left = self.and_()
        while self.at("or"):
            self.advance()
            left = Or(left, self.and_())
        return left

    def and_(self) -> Expr:
        left = self.not_()
        while self.at("and"):
            self.advance()
            left = And(left, self.not_())
        return left

    def not_(self) -> Expr:
        if self.at("not"):
            self.advance()
            return Not(self.not_())
        return self.atom()

    def atom(self) -> Expr:
        if self.at("("):
            self.advance()
            inner = self.implies()
            self.expect(")")
            return inner
        if self.at("startswith") or self.at("endswith"):
            op = self.advance().text
            self.expect("(")
            term = self.term()
            self.expect(",")
            lit = self.string_literal()
            self.expect(")")
            return StringPredicate(op, term, lit)
        if not self._at_term():
            raise self.fail(_ATOM_START)
        left = self.term()
        if self.tok.kind == "op" and self.tok.text in COMPARISON_OPS:
            op = self.advance().text
            return Comparison(op, left, self.term())
        if self.at("in") or self.at("notIn"):
            op = self.advance().text
            return Inclusion(op, left, self.literal_list())
        raise self.fail(set(COMPARISON_OPS) | {"in", "notIn"})

    def _at_term(self) -> bool:
        return self.tok.kind in ("ident", "int", "dec", "str") or self.at("date") or self.at("substring")

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        if self.at("substring"):
            self.advance()
            self.expect("(")
            name = self.tok
            if name.kind != "ident":
                raise self.fail({"<identifier>"})
            self.advance()
            self.expect(",")
            start = self.index()
            self.expect(",")
            end = self.index()
            self.expect(")")
            return Substring(Var(name.text), start, end)
        if self.tok.kind in ("int", "dec", "str") or self.at("date"):
            return self.literal()
        raise self.fail(_TERM_START)

    def index(self) -> int:
        tok = self.tok
        if tok.kind != "int" or tok.value < 0:
            raise self.fail({"<non-negative integer>"})
        self.advance()
        return tok.value

    def literal(self) -> Literal:
        tok = self.tok
        if tok.kind == "int":
            self.advance()
            return Literal("integer", tok.value)
        if tok.kind == "dec":
            self.advance()
            return Literal("decimal", tok.value)
        if tok.kind == "str":
            self.advance()
            return Literal("text", tok.value)
        if self.at("date"):
            self.advance()
            self.expect("(")
            text = self.string_literal()
            self.expect(")")
            return Literal("date", text.value)
        raise self.fail({"<number>", "<string>", "date"})

    def string_literal(self) -> Literal:
        tok = self.tok
        if tok.kind != "str":
            raise self.fail({"<string>"})
        self.advance()
        return Literal("text", tok.value)

    def literal_list(self) -> tuple[Literal, ...]:
        self.expect("[")
        items = [self.literal()]
        while self.at(","):
            self.advance()
            items.append(self.literal())
        self.expect("]")
        return tuple(items)


def parse(text: str) -> Expr:
    """Parse rule source text into an AST; raises :class:`ParseError`."""
    if not text or not text.strip():
        raise ParseError("empty rule text", 1, 1, frozenset(_ATOM_START))
    return _Parser(text).parse()
