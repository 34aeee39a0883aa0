"""Concrete syntax: lexer and parser for program files and queries.

Shape of a program file:

    constructors cons/2, NIL/0;

    rewrite append {
        append(cons(u,v), w) -> cons(u, append(v,w));
        append(NIL, w) -> w;
    }

    flat zeroint(i, j, x) {
        if i > j then x else (k <- i + 1; y <- replace(i, 0, x); zeroint(k, j, y))
    }

A procedure body is a chain of ';'-terminated statements followed by one
expression.  Statement-position conditionals take braced statement lists
as branches and fall through to the continuation; bare conditionals are
value expressions.  Loop bodies are braced statement lists and every loop
is followed by ';' and a continuation expression.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ast
from .ast import (
    Assign,
    ATerm,
    If,
    IfChain,
    Loop,
    Pos,
    Procedure,
    Program,
    Rule,
    SAssign,
    SIf,
    SLoop,
    STupleAssign,
    Stmt,
    Term,
    TupleAssign,
    VarRef,
    chain,
    contains_assign,
)
from .terms import (
    COMPILED,
    CONSTRUCTOR,
    DEFINED,
    ERROR,
    FALSE,
    IF,
    NONE,
    TRUE,
    App,
    PlainTerm,
    Symbol,
    Var,
    int_symbol,
    tuple_symbol,
)

KEYWORDS = {
    "constructors",
    "rewrite",
    "flat",
    "if",
    "then",
    "else",
    "for",
    "while",
    "do",
    "until",
    "step",
    "and",
    "or",
    "not",
}

# Builtin procedure schemas and compiled operations, by (name, arity).
BUILTIN_ARITIES = {
    "top": 1,
    "eq": 2,
    "arg": 2,
    "pi": 2,
    "replace": 3,
    "d_replace": 3,
    "copy": 1,
    "sum": 2,
    "+": 2,
    "-": 2,
    "*": 2,
    "/": 2,
    "<": 2,
    "<=": 2,
    ">": 2,
    ">=": 2,
    "and": 2,
    "or": 2,
    "not": 1,
    "if": 3,
}

PREDECLARED_CONSTANTS = {s.name: s for s in (ERROR, TRUE, FALSE, NONE)}

RESERVED_NAMES = set(BUILTIN_ARITIES) | set(PREDECLARED_CONSTANTS) | KEYWORDS


def builtin_symbol(name: str) -> Symbol:
    if name == "sum":
        name = "+"
    if name == "if":
        return IF
    return Symbol(name, BUILTIN_ARITIES[name], COMPILED)


class ParseError(Exception):
    def __init__(self, message: str, pos: Pos, source_name: str = "<input>"):
        super().__init__(f"{source_name}:{pos.line}:{pos.col}: {message}")
        self.message = message
        self.pos = pos
        self.source_name = source_name


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | op | kw | eof
    text: str
    pos: Pos


_TWO_CHAR_OPS = ("<-", "->", "==", "<=", ">=")
_ONE_CHAR_OPS = "()<>{},;+-*/=@"


def lex(source: str, source_name: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            col += 1
            i += 1
            continue
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        pos = Pos(line, col)
        if source[i : i + 2] in _TWO_CHAR_OPS:
            tokens.append(Token("op", source[i : i + 2], pos))
            i += 2
            col += 2
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("int", source[i:j], pos))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "kw" if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, pos))
            col += j - i
            i = j
            continue
        if c in _ONE_CHAR_OPS:
            tokens.append(Token("op", c, pos))
            i += 1
            col += 1
            continue
        raise ParseError(f"unsupported character {c!r}", pos, source_name)
    tokens.append(Token("eof", "", Pos(line, col)))
    return tokens


# -- raw (unresolved) terms --------------------------------------------------

_UNRESOLVED = "unresolved"


def raw(name: str, args: tuple[ATerm, ...], pos: Pos) -> Term:
    return Term(Symbol(name, len(args), _UNRESOLVED), args, pos)


class Parser:
    def __init__(self, source: str, source_name: str = "<input>"):
        self.source_name = source_name
        self.tokens = lex(source, source_name)
        self.i = 0
        # Inside <...> a bare '>' closes the tuple; parenthesized
        # subexpressions restore normal comparison parsing.
        self.tuple_depth = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("op", "kw")

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {tok.text!r}", tok.pos)
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(f"expected identifier, found {tok.text!r}", tok.pos)
        return self.next()

    def error(self, message: str, pos: Pos | None = None) -> ParseError:
        return ParseError(message, pos or self.peek().pos, self.source_name)

    # -- program ------------------------------------------------------------

    def parse_program(self) -> Program:
        prog = Program(source_name=self.source_name)
        while self.peek().kind != "eof":
            if self.at("constructors"):
                self.parse_constructor_decl(prog)
            elif self.at("rewrite"):
                self.parse_rewrite(prog)
            elif self.at("flat"):
                self.parse_flat(prog)
            else:
                raise self.error(
                    f"expected declaration, found {self.peek().text!r}"
                )
        resolver = Resolver(prog, self.source_name)
        resolver.run()
        return prog

    def parse_constructor_decl(self, prog: Program) -> None:
        self.expect("constructors")
        while True:
            name_tok = self.expect_ident()
            self.check_declarable(name_tok)
            self.expect("/")
            arity_tok = self.peek()
            if arity_tok.kind != "int":
                raise self.error("expected arity after '/'")
            self.next()
            arity = int(arity_tok.text)
            key = (name_tok.text, arity)
            if key in prog.constructors:
                raise self.error(f"duplicate constructor {name_tok.text}/{arity}", name_tok.pos)
            prog.constructors[key] = Symbol(name_tok.text, arity, CONSTRUCTOR)
            if not self.accept(","):
                break
        self.expect(";")

    def check_declarable(self, tok: Token) -> None:
        name = tok.text
        if name in RESERVED_NAMES:
            raise self.error(f"{name!r} is reserved", tok.pos)
        if name == "__" or (name.startswith("tuple") and name[5:].isdigit()):
            raise self.error(f"{name!r} is reserved", tok.pos)

    def check_binder(self, tok: Token) -> None:
        """Assignment targets, parameters, and loop indices cannot shadow
        reserved constants or builtins."""
        self.check_declarable(tok)

    def parse_rewrite(self, prog: Program) -> None:
        kw = self.expect("rewrite")
        name_tok = self.expect_ident()
        self.check_declarable(name_tok)
        if self.accept("@"):
            ann = self.expect_ident()
            if ann.text != "innermost":
                raise self.error(f"unknown strategy {ann.text!r}", ann.pos)
        self.expect("{")
        rules: list[Rule] = []
        while not self.at("}"):
            lhs_pos = self.peek().pos
            lhs = self.parse_expr()
            self.expect("->")
            rhs = self.parse_chain()
            self.expect(";")
            rules.append(Rule(self.to_pattern(lhs), rhs, lhs_pos))
        self.expect("}")
        if not rules:
            raise self.error(f"rewrite procedure {name_tok.text} has no rules", kw.pos)
        first = rules[0].lhs
        if isinstance(first, Var) or first.symbol.name != name_tok.text:
            raise self.error(
                f"rule head must be {name_tok.text}(...)", rules[0].pos
            )
        arity = len(first.args)
        for r in rules:
            if isinstance(r.lhs, Var) or r.lhs.symbol.name != name_tok.text or len(r.lhs.args) != arity:
                raise self.error(
                    f"every rule of {name_tok.text} must have head {name_tok.text}/{arity}",
                    r.pos,
                )
        self.register_procedure(
            prog,
            Procedure(name_tok.text, arity, ast.REWRITE, rules=rules, pos=name_tok.pos),
        )

    def parse_flat(self, prog: Program) -> None:
        self.expect("flat")
        name_tok = self.expect_ident()
        self.check_declarable(name_tok)
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            while True:
                p = self.expect_ident()
                self.check_binder(p)
                if p.text in params:
                    raise self.error(f"duplicate parameter {p.text!r}", p.pos)
                params.append(p.text)
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("{")
        body = self.parse_chain()
        self.expect("}")
        self.register_procedure(
            prog,
            Procedure(
                name_tok.text,
                len(params),
                ast.FLAT,
                params=tuple(params),
                body=body,
                pos=name_tok.pos,
            ),
        )

    def register_procedure(self, prog: Program, proc: Procedure) -> None:
        if proc.key in prog.procedures:
            raise self.error(f"duplicate procedure {proc.name}/{proc.arity}", proc.pos)
        prog.procedures[proc.key] = proc

    def to_pattern(self, t: ATerm) -> PlainTerm:
        if isinstance(t, Term):
            return App(t.symbol, tuple(self.to_pattern(a) for a in t.args))
        raise self.error("rule left-hand sides must be plain terms", getattr(t, "pos", None))

    # -- aterms ---------------------------------------------------------------

    def parse_chain(self) -> ATerm:
        stmts: list[Stmt] = []
        while True:
            s = self.try_parse_stmt()
            if s is not None:
                stmts.append(s)
                self.expect(";")
                continue
            tail = self.parse_expr()
            return chain(stmts, tail)

    def try_parse_stmt(self) -> Stmt | None:
        tok = self.peek()
        if tok.text in ("for", "while", "do") and tok.kind == "kw":
            return self.parse_loop_stmt()
        if tok.kind == "ident" and self.peek(1).text == "<-":
            name = self.next()
            self.check_binder(name)
            pos = self.next().pos  # <-
            rhs = self.parse_expr()
            if contains_assign(rhs):
                raise self.error(
                    "no assignment statements on the right-hand side of an assignment",
                    pos,
                )
            return SAssign(name.text, rhs, tok.pos)
        if tok.text == "<":
            saved = self.i
            targets = self.try_parse_tuple_targets()
            if targets is not None and self.at("<-"):
                pos = self.next().pos
                rhs = self.parse_expr()
                if contains_assign(rhs):
                    raise self.error(
                        "no assignment statements on the right-hand side of an assignment",
                        pos,
                    )
                return STupleAssign(targets, rhs, tok.pos)
            self.i = saved
            return None
        if tok.text == "if" and tok.kind == "kw":
            # Statement-position conditional: both branches braced.
            saved = self.i
            self.next()
            cond = self.parse_expr()
            self.expect("then")
            if self.at("{"):
                then_stmts = self.parse_braced_stmts()
                self.expect("else")
                if not self.at("{"):
                    raise self.error("both branches of a statement conditional need braces")
                else_stmts = self.parse_braced_stmts()
                return SIf(cond, then_stmts, else_stmts, tok.pos)
            # Value conditional: rewind, let the expression grammar have it.
            self.i = saved
            return None
        return None

    def try_parse_tuple_targets(self) -> tuple[str, ...] | None:
        saved = self.i
        self.expect("<")
        names: list[str] = []
        while True:
            tok = self.peek()
            if tok.kind != "ident" or tok.text in RESERVED_NAMES or tok.text == "__":
                self.i = saved
                return None
            names.append(self.next().text)
            if self.accept(","):
                continue
            break
        if not self.accept(">"):
            self.i = saved
            return None
        if len(set(names)) != len(names):
            raise self.error("tuple assignment targets must be distinct")
        return tuple(names)

    def parse_braced_stmts(self) -> tuple[Stmt, ...]:
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            s = self.try_parse_stmt()
            if s is None:
                raise self.error(f"expected statement, found {self.peek().text!r}")
            stmts.append(s)
            self.expect(";")
        self.expect("}")
        return tuple(stmts)

    def parse_loop_stmt(self) -> SLoop:
        tok = self.peek()
        if self.accept("for"):
            idx = self.expect_ident()
            self.check_binder(idx)
            self.expect("=")
            start = self.parse_expr()
            self.expect("step")
            step_tok = self.peek()
            if step_tok.kind != "int" or step_tok.text != "1":
                raise self.error("only step 1 is supported", step_tok.pos)
            self.next()
            self.expect("until")
            limit = self.parse_expr()
            self.expect("do")
            body = self.parse_braced_stmts()
            return SLoop(ast.FOR, idx.text, start, limit, None, body, tok.pos)
        if self.accept("while"):
            cond = self.parse_expr()
            self.expect("do")
            body = self.parse_braced_stmts()
            return SLoop(ast.WHILE, None, None, None, cond, body, tok.pos)
        self.expect("do")
        body = self.parse_braced_stmts()
        self.expect("until")
        cond = self.parse_expr()
        return SLoop(ast.UNTIL, None, None, None, cond, body, tok.pos)

    # -- expressions ----------------------------------------------------------

    def parse_expr(self) -> ATerm:
        return self.parse_or()

    def parse_or(self) -> ATerm:
        left = self.parse_and()
        while self.at("or"):
            pos = self.next().pos
            right = self.parse_and()
            left = Term(builtin_symbol("or"), (left, right), pos)
        return left

    def parse_and(self) -> ATerm:
        left = self.parse_not()
        while self.at("and"):
            pos = self.next().pos
            right = self.parse_not()
            left = Term(builtin_symbol("and"), (left, right), pos)
        return left

    def parse_not(self) -> ATerm:
        if self.at("not"):
            pos = self.next().pos
            inner = self.parse_not()
            return Term(builtin_symbol("not"), (inner,), pos)
        return self.parse_cmp()

    def parse_cmp(self) -> ATerm:
        left = self.parse_add()
        tok = self.peek()
        if tok.text == ">" and self.tuple_depth > 0:
            return left
        if tok.text in ("==", "<", "<=", ">", ">=") and tok.kind == "op":
            self.next()
            right = self.parse_add()
            name = "eq" if tok.text == "==" else tok.text
            sym = builtin_symbol(name)
            return Term(sym, (left, right), tok.pos)
        return left

    def parse_add(self) -> ATerm:
        left = self.parse_mul()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            tok = self.next()
            right = self.parse_mul()
            left = Term(builtin_symbol(tok.text), (left, right), tok.pos)
        return left

    def parse_mul(self) -> ATerm:
        left = self.parse_atom()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            tok = self.next()
            right = self.parse_atom()
            left = Term(builtin_symbol(tok.text), (left, right), tok.pos)
        return left

    def parse_atom(self) -> ATerm:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Term(int_symbol(int(tok.text)), (), tok.pos)
        if tok.text == "-" and self.peek(1).kind == "int":
            self.next()
            val = self.next()
            return Term(int_symbol(-int(val.text)), (), tok.pos)
        if tok.text == "(":
            self.next()
            saved = self.tuple_depth
            self.tuple_depth = 0
            inner = self.parse_chain()
            self.tuple_depth = saved
            self.expect(")")
            return inner
        if tok.text == "<":
            self.next()
            self.tuple_depth += 1
            args = [self.parse_chain()]
            while self.accept(","):
                args.append(self.parse_chain())
            self.tuple_depth -= 1
            self.expect(">")
            return Term(tuple_symbol(len(args)), tuple(args), tok.pos)
        if tok.text == "if" and tok.kind == "kw":
            self.next()
            cond = self.parse_expr()
            self.expect("then")
            then = self.parse_chain()
            self.expect("else")
            els = self.parse_chain()
            return If(cond, then, els, tok.pos)
        if tok.text == "__":
            self.next()
            return Term(NONE, (), tok.pos)
        if tok.kind == "ident" or (tok.kind == "kw" and tok.text in ("and", "or", "not")):
            if tok.kind == "kw":
                raise self.error(f"{tok.text!r} cannot start an expression", tok.pos)
            self.next()
            if self.at("("):
                self.next()
                args: list[ATerm] = []
                if not self.at(")"):
                    args.append(self.parse_chain())
                    while self.accept(","):
                        args.append(self.parse_chain())
                self.expect(")")
                return raw(tok.text, tuple(args), tok.pos)
            return raw(tok.text, (), tok.pos)
        raise self.error(f"expected a term, found {tok.text!r}", tok.pos)


# -- resolution ----------------------------------------------------------------


class Resolver:
    """Rewrites unresolved names into symbols or variable references once
    all declarations are known."""

    def __init__(self, prog: Program, source_name: str):
        self.prog = prog
        self.source_name = source_name

    def run(self) -> None:
        for proc in self.prog.procedures.values():
            if proc.kind == ast.REWRITE:
                for rule in proc.rules:
                    rule.lhs = self.resolve_pattern(rule.lhs)
                    rule.rhs = self.resolve(rule.rhs, allow_vars=True)
            else:
                proc.body = self.resolve(proc.body, allow_vars=True)

    def lookup(self, name: str, arity: int, pos: Pos, allow_vars: bool) -> Symbol | None:
        """Symbol for a use of ``name`` at ``arity``; None means variable."""
        if name in PREDECLARED_CONSTANTS:
            if arity != 0:
                raise ParseError(f"{name} takes no arguments", pos, self.source_name)
            return PREDECLARED_CONSTANTS[name]
        if name in BUILTIN_ARITIES:
            if arity != BUILTIN_ARITIES[name]:
                raise ParseError(
                    f"builtin {name} expects {BUILTIN_ARITIES[name]} arguments, got {arity}",
                    pos,
                    self.source_name,
                )
            return builtin_symbol(name)
        if (name, arity) in self.prog.constructors:
            return self.prog.constructors[(name, arity)]
        if (name, arity) in self.prog.procedures:
            proc = self.prog.procedures[(name, arity)]
            return Symbol(proc.name, proc.arity, DEFINED)
        declared_arities = sorted(
            {a for (n, a) in self.prog.constructors if n == name}
            | {a for (n, a) in self.prog.procedures if n == name}
        )
        if declared_arities:
            raise ParseError(
                f"{name} is declared with arity {declared_arities}, used with {arity}",
                pos,
                self.source_name,
            )
        if arity > 0:
            raise ParseError(f"unknown symbol {name}/{arity}", pos, self.source_name)
        if not allow_vars:
            raise ParseError(
                f"unknown symbol {name!r} (queries must be ground)", pos, self.source_name
            )
        return None

    def resolve(self, t: ATerm, allow_vars: bool) -> ATerm:
        if isinstance(t, Term):
            args = tuple(self.resolve(a, allow_vars) for a in t.args)
            if t.symbol.kind == _UNRESOLVED:
                sym = self.lookup(t.symbol.name, len(args), t.pos, allow_vars)
                if sym is None:
                    return VarRef(t.symbol.name, t.pos)
                return Term(sym, args, t.pos)
            return Term(t.symbol, args, t.pos)
        if isinstance(t, VarRef):
            return t
        if isinstance(t, Assign):
            return Assign(
                t.target,
                self.resolve(t.rhs, allow_vars),
                self.resolve(t.rest, allow_vars),
                t.pos,
            )
        if isinstance(t, TupleAssign):
            return TupleAssign(
                t.targets,
                self.resolve(t.rhs, allow_vars),
                self.resolve(t.rest, allow_vars),
                t.pos,
            )
        if isinstance(t, If):
            return If(
                self.resolve(t.cond, allow_vars),
                self.resolve(t.then, allow_vars),
                self.resolve(t.els, allow_vars),
                t.pos,
            )
        if isinstance(t, IfChain):
            return IfChain(
                self.resolve(t.cond, allow_vars),
                tuple(self.resolve_stmt(s, allow_vars) for s in t.then_stmts),
                tuple(self.resolve_stmt(s, allow_vars) for s in t.else_stmts),
                self.resolve(t.rest, allow_vars),
                t.pos,
            )
        if isinstance(t, Loop):
            return Loop(
                t.kind,
                t.index,
                self.resolve(t.start, allow_vars) if t.start is not None else None,
                self.resolve(t.limit, allow_vars) if t.limit is not None else None,
                self.resolve(t.cond, allow_vars) if t.cond is not None else None,
                tuple(self.resolve_stmt(s, allow_vars) for s in t.body),
                self.resolve(t.rest, allow_vars),
                t.pos,
            )
        raise TypeError(t)

    def resolve_stmt(self, s: Stmt, allow_vars: bool) -> Stmt:
        if isinstance(s, SAssign):
            return SAssign(s.target, self.resolve(s.rhs, allow_vars), s.pos)
        if isinstance(s, STupleAssign):
            return STupleAssign(s.targets, self.resolve(s.rhs, allow_vars), s.pos)
        if isinstance(s, SIf):
            return SIf(
                self.resolve(s.cond, allow_vars),
                tuple(self.resolve_stmt(x, allow_vars) for x in s.then_stmts),
                tuple(self.resolve_stmt(x, allow_vars) for x in s.else_stmts),
                s.pos,
            )
        if isinstance(s, SLoop):
            return SLoop(
                s.kind,
                s.index,
                self.resolve(s.start, allow_vars) if s.start is not None else None,
                self.resolve(s.limit, allow_vars) if s.limit is not None else None,
                self.resolve(s.cond, allow_vars) if s.cond is not None else None,
                tuple(self.resolve_stmt(x, allow_vars) for x in s.body),
                s.pos,
            )
        raise TypeError(s)

    def resolve_pattern(self, p: PlainTerm) -> PlainTerm:
        if isinstance(p, Var):
            return p
        sym = p.symbol
        if sym.kind == _UNRESOLVED:
            resolved = self.lookup(sym.name, len(p.args), ast.NOPOS, allow_vars=True)
            if resolved is None:
                return Var(sym.name)
            sym = resolved
        return App(sym, tuple(self.resolve_pattern(a) for a in p.args))




def parse_program(source: str, source_name: str = "<input>") -> Program:
    return Parser(source, source_name).parse_program()


def parse_query(source: str, prog: Program) -> PlainTerm:
    """Parse a ground query term over the program's declared symbols."""
    p = Parser(source, "<query>")
    t = p.parse_expr()
    if p.peek().kind != "eof":
        raise p.error(f"unexpected trailing input {p.peek().text!r}")
    resolver = Resolver(prog, "<query>")
    resolved = resolver.resolve(t, allow_vars=False)
    return aterm_to_plain(resolved)


def aterm_to_plain(t: ATerm) -> PlainTerm:
    """Convert an assignment-free aterm to a plain term (conditionals
    become if-nodes)."""
    if isinstance(t, VarRef):
        return Var(t.name)
    if isinstance(t, Term):
        return App(t.symbol, tuple(aterm_to_plain(a) for a in t.args))
    if isinstance(t, If):
        return App(
            IF,
            (aterm_to_plain(t.cond), aterm_to_plain(t.then), aterm_to_plain(t.els)),
        )
    raise ValueError(f"not an assignment-free term: {type(t).__name__}")
