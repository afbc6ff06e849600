"""Recursive-descent parser for the handler language.

Grammar:
    program  := handler*
    handler  := 'handler' IDENT '{' stmt* '}'
    stmt     := 'let' IDENT '=' expr ';'
              | IDENT '=' expr ';'
              | 'if' expr '{' stmt* '}'
              | 'return' INT ',' expr ';'
    expr     := cmp
    cmp      := add (('==' | '!=' | '<' | '>') add)*
    add      := mul (('+' | '-') mul)*
    mul      := postfix (('*' | '/') postfix)*
    postfix  := primary ('.' IDENT)*
    primary  := INT | STRING | 'true' | 'false' | 'null' | '{' '}'
              | '(' expr ')'
              | ('param' | 'len' | 'concat') '(' args ')'
              | 'db' '.' ('get' | 'put') '(' args ')'
              | IDENT

`//` comments run to end of line. Strings know exactly two escapes: \\" and \\\\.
Return statuses are validated into [100, 599] here so every parsed program can
only produce well-formed responses.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    AssignStmt,
    BUILTIN_ARITY,
    BinOp,
    BoolLit,
    Call,
    Expr,
    FieldAccess,
    Handler,
    IfStmt,
    IntLit,
    LetStmt,
    MapLit,
    NullLit,
    Program,
    ReturnStmt,
    Stmt,
    StrLit,
    Var,
)

KEYWORDS = {"handler", "let", "if", "return", "true", "false", "null"}
RESERVED = KEYWORDS | {"param", "len", "concat", "db"}

_PUNCT = ("==", "!=", "{", "}", "(", ")", ";", ",", ".", "=", "<", ">", "+", "-", "*", "/")


class ParseError(Exception):
    """Syntax error with the physical source line it occurred on."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class DuplicateHandler(Exception):
    def __init__(self, name: str):
        super().__init__(f"duplicate handler {name!r}")
        self.name = name


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'int' | 'string' | 'punct' | 'eof'
    text: str
    line: int


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, n = 0, 1, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == '"':
            i += 1
            buf = []
            while True:
                if i >= n or source[i] == "\n":
                    raise ParseError(line, "unterminated string literal")
                ch = source[i]
                if ch == "\\":
                    if i + 1 >= n:
                        raise ParseError(line, "unterminated string literal")
                    esc = source[i + 1]
                    if esc == '"':
                        buf.append('"')
                    elif esc == "\\":
                        buf.append("\\")
                    else:
                        raise ParseError(line, f"unknown escape \\{esc}")
                    i += 2
                    continue
                if ch == '"':
                    i += 1
                    break
                buf.append(ch)
                i += 1
            toks.append(Token("string", "".join(buf), line))
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("int", source[i:j], line))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append(Token("ident", source[i:j], line))
            i = j
            continue
        for p in _PUNCT:
            if source.startswith(p, i):
                toks.append(Token("punct", p, line))
                i += len(p)
                break
        else:
            raise ParseError(line, f"unexpected character {c!r}")
    toks.append(Token("eof", "", line))
    return toks


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def advance(self) -> Token:
        t = self.cur
        self.pos += 1
        return t

    def error(self, message: str) -> ParseError:
        return ParseError(self.cur.line, message)

    def at_punct(self, text: str) -> bool:
        return self.cur.kind == "punct" and self.cur.text == text

    def at_ident(self, text: str) -> bool:
        return self.cur.kind == "ident" and self.cur.text == text

    def expect_punct(self, text: str) -> Token:
        if not self.at_punct(text):
            raise self.error(f"expected {text!r}, found {self.cur.text or 'end of input'!r}")
        return self.advance()

    def expect_name(self, what: str) -> str:
        if self.cur.kind != "ident":
            raise self.error(f"expected {what}, found {self.cur.text or 'end of input'!r}")
        if self.cur.text in RESERVED:
            raise self.error(f"{self.cur.text!r} is reserved and cannot be used as {what}")
        return self.advance().text

    # --- grammar ---------------------------------------------------------

    def program(self) -> Program:
        handlers: dict[str, Handler] = {}
        while self.cur.kind != "eof":
            if not self.at_ident("handler"):
                raise self.error(f"expected 'handler', found {self.cur.text!r}")
            self.advance()
            name = self.expect_name("a handler name")
            if name in handlers:
                raise DuplicateHandler(name)
            self.expect_punct("{")
            body = self.block()
            handlers[name] = Handler(name, body)
        return Program(handlers)

    def block(self) -> list[Stmt]:
        body: list[Stmt] = []
        while not self.at_punct("}"):
            if self.cur.kind == "eof":
                raise self.error("unexpected end of input inside block")
            body.append(self.statement())
        self.expect_punct("}")
        return body

    def statement(self) -> Stmt:
        if self.at_ident("let"):
            self.advance()
            name = self.expect_name("a variable name")
            self.expect_punct("=")
            e = self.expr()
            self.expect_punct(";")
            return LetStmt(name, e)
        if self.at_ident("if"):
            self.advance()
            cond = self.expr()
            self.expect_punct("{")
            return IfStmt(cond, self.block())
        if self.at_ident("return"):
            self.advance()
            if self.cur.kind != "int":
                raise self.error("expected a status code after 'return'")
            status = int(self.advance().text)
            if not 100 <= status <= 599:
                raise ParseError(self.toks[self.pos - 1].line, f"status {status} outside [100, 599]")
            self.expect_punct(",")
            e = self.expr()
            self.expect_punct(";")
            return ReturnStmt(status, e)
        if self.cur.kind == "ident" and self.cur.text not in KEYWORDS:
            name = self.expect_name("a variable name")
            self.expect_punct("=")
            e = self.expr()
            self.expect_punct(";")
            return AssignStmt(name, e)
        raise self.error(f"expected a statement, found {self.cur.text or 'end of input'!r}")

    def expr(self) -> Expr:
        return self.cmp()

    def cmp(self) -> Expr:
        left = self.add()
        while self.cur.kind == "punct" and self.cur.text in ("==", "!=", "<", ">"):
            op = self.advance().text
            left = BinOp(op, left, self.add())
        return left

    def add(self) -> Expr:
        left = self.mul()
        while self.cur.kind == "punct" and self.cur.text in ("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.mul())
        return left

    def mul(self) -> Expr:
        left = self.postfix()
        while self.cur.kind == "punct" and self.cur.text in ("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.postfix())
        return left

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at_punct("."):
            self.advance()
            if self.cur.kind != "ident":
                raise self.error("expected a field name after '.'")
            e = FieldAccess(e, self.advance().text)
        return e

    def args(self, func: str) -> tuple[Expr, ...]:
        self.expect_punct("(")
        out: list[Expr] = []
        if not self.at_punct(")"):
            out.append(self.expr())
            while self.at_punct(","):
                self.advance()
                out.append(self.expr())
        self.expect_punct(")")
        want = BUILTIN_ARITY[func]
        if len(out) != want:
            raise self.error(f"{func} takes {want} argument(s), got {len(out)}")
        return tuple(out)

    def primary(self) -> Expr:
        t = self.cur
        if t.kind == "int":
            self.advance()
            return IntLit(int(t.text))
        if t.kind == "string":
            self.advance()
            return StrLit(t.text)
        if t.kind == "ident":
            if t.text == "true":
                self.advance()
                return BoolLit(True)
            if t.text == "false":
                self.advance()
                return BoolLit(False)
            if t.text == "null":
                self.advance()
                return NullLit()
            if t.text in ("param", "len", "concat"):
                self.advance()
                return Call(t.text, self.args(t.text))
            if t.text == "db":
                self.advance()
                self.expect_punct(".")
                if self.cur.kind != "ident" or self.cur.text not in ("get", "put"):
                    raise self.error("expected 'get' or 'put' after 'db.'")
                method = self.advance().text
                func = f"db.{method}"
                return Call(func, self.args(func))
            if t.text in KEYWORDS:
                raise self.error(f"unexpected keyword {t.text!r} in expression")
            self.advance()
            return Var(t.text)
        if self.at_punct("{"):
            self.advance()
            self.expect_punct("}")
            return MapLit()
        if self.at_punct("("):
            self.advance()
            e = self.expr()
            self.expect_punct(")")
            return e
        raise self.error(f"expected an expression, found {t.text or 'end of input'!r}")


def parse_program(source: str) -> Program:
    """Parse handler-language source into a Program.

    Raises ParseError on malformed input and DuplicateHandler on a repeated
    handler name.
    """
    return _Parser(tokenize(source)).program()
