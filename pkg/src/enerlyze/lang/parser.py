"""Recursive-descent parser producing a :class:`Program`.

Grammar notes:

* types: ``int float bool Object int[] float[] char[]`` (``void`` for
  return types only); ``char`` exists only as an array element type,
* ``&&``/``||`` are eager (no short-circuit) boolean operators,
* relational and equality operators do not chain (parenthesize),
* ``-`` is binary only, except directly before a numeric literal in
  operand position where it folds into a negative literal,
* casts are ``(int) expr`` / ``(float) expr``,
* switch arms are braced and never fall through,
* ``x++;`` / ``x--;`` are statements (and for-updates), not expressions.
"""

from __future__ import annotations

from typing import Optional

from .ast import (ArrayNew, Assign, Binary, BoolLit, Break, Call, Convert,
                  Decl, Expr, ExprStmt, FieldRef, FloatLit, For, If, IncDec,
                  Index, IntLit, MethodDecl, NullLit, ObjectNew, Param,
                  Program, Return, Stmt, Switch, Unary, VarRef, While)
from .errors import ParseError
from .lexer import Token, tokenize

BASE_TYPES = ("int", "float", "bool", "Object", "char")


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {tok.text or tok.kind!r}",
                             tok.span)
        return self.next()

    # -- types ---------------------------------------------------------

    def at_type(self, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok.kind == "keyword" and tok.text in BASE_TYPES

    def parse_type(self) -> str:
        tok = self.next()
        if tok.kind != "keyword" or tok.text not in BASE_TYPES:
            raise ParseError(f"expected a type, found {tok.text!r}", tok.span)
        base = tok.text
        if self.at("["):
            self.next()
            self.expect("]")
            return base + "[]"
        if base == "char":
            raise ParseError("char is only valid as char[]", tok.span)
        return base

    # -- program / methods ----------------------------------------------

    def parse_program(self) -> Program:
        methods = []
        while not self.at("eof"):
            methods.append(self.parse_method())
        return Program(methods)

    def parse_method(self) -> MethodDecl:
        tok = self.peek()
        if self.at("keyword", "void"):
            self.next()
            ret = "void"
        else:
            ret = self.parse_type()
        name = self.expect("ident").text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pty = self.parse_type()
                pname = self.expect("ident").text
                params.append(Param(pty, pname, span=self.peek().span))
                if self.at(","):
                    self.next()
                    continue
                break
        self.expect(")")
        body = self.parse_block()
        return MethodDecl(name, params, ret, body, span=tok.span)

    def parse_block(self) -> list[Stmt]:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            stmts.append(self.parse_stmt())
        self.expect("}")
        return stmts

    # -- statements ------------------------------------------------------

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if self.at("keyword", "if"):
            return self.parse_if()
        if self.at("keyword", "for"):
            return self.parse_for()
        if self.at("keyword", "while"):
            return self.parse_while()
        if self.at("keyword", "switch"):
            return self.parse_switch()
        if self.at("keyword", "return"):
            self.next()
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return Return(value, span=tok.span)
        if self.at("keyword", "break"):
            self.next()
            self.expect(";")
            return Break(span=tok.span)
        if self.at_type():
            stmt = self.parse_decl()
            self.expect(";")
            return stmt
        stmt = self.parse_simple_stmt()
        self.expect(";")
        return stmt

    def parse_decl(self) -> Decl:
        tok = self.peek()
        ty = self.parse_type()
        name = self.expect("ident").text
        init = None
        if self.at("="):
            self.next()
            init = self.parse_expr()
        return Decl(ty, name, init, span=tok.span)

    def parse_simple_stmt(self) -> Stmt:
        """Assignment, increment/decrement or call statement."""
        tok = self.peek()
        if tok.kind != "ident":
            raise ParseError(f"expected a statement, found {tok.text or tok.kind!r}",
                             tok.span)
        if self.at("(", ahead=1):
            call = self.parse_postfix()
            if not isinstance(call, Call):
                raise ParseError("only calls may stand alone as statements",
                                 tok.span)
            return ExprStmt(call, span=tok.span)
        target = self.parse_lvalue()
        if self.at("++") or self.at("--"):
            op = self.next().text
            if isinstance(target, Index):
                raise ParseError("++/-- target must be a variable or field",
                                 tok.span)
            return IncDec(target, op, span=tok.span)
        self.expect("=")
        value = self.parse_expr()
        return Assign(target, value, span=tok.span)

    def parse_lvalue(self):
        tok = self.expect("ident")
        node: Expr = VarRef(tok.text, span=tok.span)
        if self.at("."):
            self.next()
            fieldname = self.expect("ident").text
            return FieldRef(node, fieldname, span=tok.span)
        if self.at("["):
            self.next()
            index = self.parse_expr()
            self.expect("]")
            return Index(node, index, span=tok.span)
        return node

    def parse_if(self) -> If:
        tok = self.expect("keyword", "if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then_body = self.parse_block()
        else_body = None
        if self.at("keyword", "else"):
            self.next()
            if self.at("keyword", "if"):
                else_body = [self.parse_if()]
            else:
                else_body = self.parse_block()
        return If(cond, then_body, else_body, span=tok.span)

    def parse_for(self) -> For:
        tok = self.expect("keyword", "for")
        self.expect("(")
        init: Optional[Stmt] = None
        if not self.at(";"):
            init = self.parse_decl() if self.at_type() else self.parse_simple_stmt()
            if isinstance(init, ExprStmt):
                raise ParseError("for-init must be a declaration or assignment",
                                 tok.span)
        self.expect(";")
        cond = self.parse_expr()
        self.expect(";")
        update: Optional[Stmt] = None
        if not self.at(")"):
            update = self.parse_simple_stmt()
            if isinstance(update, ExprStmt):
                raise ParseError("for-update must be an assignment or ++/--",
                                 tok.span)
        self.expect(")")
        body = self.parse_block()
        return For(init, cond, update, body, span=tok.span)

    def parse_while(self) -> While:
        tok = self.expect("keyword", "while")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        body = self.parse_block()
        return While(cond, body, span=tok.span)

    def parse_switch(self) -> Switch:
        tok = self.expect("keyword", "switch")
        self.expect("(")
        subject = self.parse_expr()
        self.expect(")")
        self.expect("{")
        arms: list[tuple[int, list[Stmt]]] = []
        default = None
        while not self.at("}"):
            if self.at("keyword", "case"):
                self.next()
                neg = False
                if self.at("-"):
                    self.next()
                    neg = True
                value_tok = self.expect("int")
                value = -int(value_tok.text) if neg else int(value_tok.text)
                self.expect(":")
                arms.append((value, self.parse_block()))
            elif self.at("keyword", "default"):
                if default is not None:
                    raise ParseError("duplicate default arm", self.peek().span)
                self.next()
                self.expect(":")
                default = self.parse_block()
            else:
                raise ParseError("expected 'case' or 'default'", self.peek().span)
        self.expect("}")
        return Switch(subject, arms, default, span=tok.span)

    # -- expressions -----------------------------------------------------
    # precedence: || < && < | < & < == < rel < shift < + - < * / < unary

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def _left_assoc(self, sub, ops) -> Expr:
        node = sub()
        while self.peek().kind in ops:
            tok = self.next()
            right = sub()
            node = Binary(tok.text, node, right, span=tok.span)
        return node

    def parse_or(self) -> Expr:
        return self._left_assoc(self.parse_and, ("||",))

    def parse_and(self) -> Expr:
        return self._left_assoc(self.parse_bitor, ("&&",))

    def parse_bitor(self) -> Expr:
        return self._left_assoc(self.parse_bitand, ("|",))

    def parse_bitand(self) -> Expr:
        return self._left_assoc(self.parse_equality, ("&",))

    def parse_equality(self) -> Expr:
        node = self.parse_relational()
        if self.at("=="):
            tok = self.next()
            node = Binary("==", node, self.parse_relational(), span=tok.span)
        return node

    def parse_relational(self) -> Expr:
        node = self.parse_shift()
        if self.peek().kind in ("<", "<=", ">", ">="):
            tok = self.next()
            node = Binary(tok.text, node, self.parse_shift(), span=tok.span)
        return node

    def parse_shift(self) -> Expr:
        return self._left_assoc(self.parse_additive, ("<<", ">>"))

    def parse_additive(self) -> Expr:
        return self._left_assoc(self.parse_multiplicative, ("+", "-"))

    def parse_multiplicative(self) -> Expr:
        return self._left_assoc(self.parse_unary, ("*", "/"))

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if self.at("!"):
            self.next()
            return Unary("!", self.parse_unary(), span=tok.span)
        if self.at("-") and self.peek(1).kind in ("int", "float"):
            self.next()
            lit = self.next()
            if lit.kind == "int":
                return IntLit(-int(lit.text), span=tok.span)
            return FloatLit(-float(lit.text), span=tok.span)
        # cast: '(' type ')' unary  -- type keywords are reserved, so this
        # never collides with a parenthesized expression
        if self.at("(") and self.at_type(1) and self.at(")", 2):
            self.next()
            target = self.peek().text
            self.next()
            self.expect(")")
            if target not in ("int", "float"):
                raise ParseError("only (int)/(float) conversions are supported",
                                 tok.span)
            return Convert(target, self.parse_unary(), span=tok.span)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        node = self.parse_primary()
        while True:
            if self.at("."):
                tok = self.next()
                fieldname = self.expect("ident").text
                node = FieldRef(node, fieldname, span=tok.span)
            elif self.at("["):
                tok = self.next()
                index = self.parse_expr()
                self.expect("]")
                node = Index(node, index, span=tok.span)
            else:
                return node

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if self.at("int"):
            self.next()
            return IntLit(int(tok.text), span=tok.span)
        if self.at("float"):
            self.next()
            return FloatLit(float(tok.text), span=tok.span)
        if self.at("keyword", "true") or self.at("keyword", "false"):
            self.next()
            return BoolLit(tok.text == "true", span=tok.span)
        if self.at("keyword", "null"):
            self.next()
            return NullLit(span=tok.span)
        if self.at("keyword", "new"):
            return self.parse_new()
        if self.at("("):
            self.next()
            node = self.parse_expr()
            self.expect(")")
            return node
        if self.at("ident"):
            self.next()
            if self.at("("):
                self.next()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.parse_expr())
                        if self.at(","):
                            self.next()
                            continue
                        break
                self.expect(")")
                return Call(tok.text, args, span=tok.span)
            return VarRef(tok.text, span=tok.span)
        raise ParseError(f"expected an expression, found {tok.text or tok.kind!r}",
                         tok.span)

    def parse_new(self) -> Expr:
        tok = self.expect("keyword", "new")
        if self.at("keyword", "Object"):
            self.next()
            self.expect("{")
            inits: list[tuple[str, Expr]] = []
            if not self.at("}"):
                while True:
                    fieldname = self.expect("ident").text
                    self.expect("=")
                    inits.append((fieldname, self.parse_expr()))
                    if self.at(","):
                        self.next()
                        continue
                    break
            self.expect("}")
            return ObjectNew(inits, span=tok.span)
        elem_tok = self.peek()
        if elem_tok.kind == "keyword" and elem_tok.text in ("int", "float", "char"):
            self.next()
            self.expect("[")
            size = self.parse_expr()
            self.expect("]")
            return ArrayNew(elem_tok.text, size, span=tok.span)
        raise ParseError("expected 'Object {...}' or an array allocation after new",
                         tok.span)


def parse_source(text: str) -> Program:
    """Parse ``.esrc`` source text into a Program (syntax only)."""
    return _Parser(tokenize(text)).parse_program()
