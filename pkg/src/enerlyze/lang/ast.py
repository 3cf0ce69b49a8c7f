"""AST for the analyzed mini-language.

Nodes are plain dataclasses.  Source spans and checker-assigned type
annotations are excluded from equality so that a parse -> pretty-print ->
parse round trip compares structurally identical.

Static types are the strings ``int``, ``float``, ``bool``, ``Object``,
``int[]``, ``float[]``, ``char[]`` plus ``void`` (return types only) and
``null`` (the type of the null literal before assignment/comparison
contexts resolve it).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    line: int
    col: int


def _meta():
    # span/ty carry no structural meaning: keep them out of __eq__/__repr__.
    return field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class Node:
    pass


@dataclass(eq=True)
class Expr(Node):
    pass


@dataclass(eq=True)
class Stmt(Node):
    pass


# --- expressions -----------------------------------------------------------

@dataclass(eq=True)
class IntLit(Expr):
    value: int
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class FloatLit(Expr):
    value: float
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class BoolLit(Expr):
    value: bool
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class NullLit(Expr):
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class VarRef(Expr):
    name: str
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class FieldRef(Expr):
    obj: Expr
    fieldname: str
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class Index(Expr):
    arr: Expr
    index: Expr
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class Unary(Expr):
    op: str  # "!"
    operand: Expr
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class Binary(Expr):
    op: str  # + - * / < <= > >= == && || & | << >>
    left: Expr
    right: Expr
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class Convert(Expr):
    target: str  # "int" | "float"
    operand: Expr
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class Call(Expr):
    name: str
    args: list[Expr]
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()
    is_library: Optional[bool] = _meta()


@dataclass(eq=True)
class ObjectNew(Expr):
    inits: list[tuple[str, Expr]]  # (field name, value) in source order
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


@dataclass(eq=True)
class ArrayNew(Expr):
    elem: str  # "int" | "float" | "char"
    size: Expr
    span: Optional[Span] = _meta()
    ty: Optional[str] = _meta()


# --- statements ------------------------------------------------------------

LValue = Union[VarRef, FieldRef, Index]


@dataclass(eq=True)
class Decl(Stmt):
    decl_ty: str
    name: str
    init: Optional[Expr]
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class Assign(Stmt):
    target: LValue
    value: Expr
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class IncDec(Stmt):
    target: Union[VarRef, FieldRef]
    op: str  # "++" | "--"
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class If(Stmt):
    cond: Expr
    then_body: list[Stmt]
    else_body: Optional[list[Stmt]]
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class For(Stmt):
    init: Optional[Stmt]  # Decl | Assign | IncDec
    cond: Expr
    update: Optional[Stmt]  # Assign | IncDec
    body: list[Stmt]
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class While(Stmt):
    cond: Expr
    body: list[Stmt]
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class Switch(Stmt):
    subject: Expr
    arms: list[tuple[int, list[Stmt]]]  # (case value, body); no fallthrough
    default: Optional[list[Stmt]]
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class ExprStmt(Stmt):
    call: Call
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class Return(Stmt):
    value: Optional[Expr]
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class Break(Stmt):
    span: Optional[Span] = _meta()


# --- declarations ----------------------------------------------------------

@dataclass(eq=True)
class Param(Node):
    ty: str
    name: str
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class MethodDecl(Node):
    name: str
    params: list[Param]
    ret: str  # value type or "void"
    body: list[Stmt]
    span: Optional[Span] = _meta()


@dataclass(eq=True)
class Program(Node):
    methods: list[MethodDecl]

    def method(self, name: str) -> MethodDecl:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)


def to_json(node) -> object:
    """Serialize a node (or list of nodes) to plain JSON data.

    Emits node kind, child fields, the checker's type annotation and the
    source span; used by the CLI ``dump-ast`` surface.
    """
    if isinstance(node, list):
        return [to_json(n) for n in node]
    if isinstance(node, tuple):
        return [to_json(n) for n in node]
    if not isinstance(node, Node):
        return node
    data: dict = {"kind": type(node).__name__}
    for f in fields(node):
        if f.name == "span":
            if node.span is not None:
                data["span"] = {"line": node.span.line, "col": node.span.col}
            continue
        if f.name in ("ty", "is_library"):
            value = getattr(node, f.name)
            if value is not None:
                data[f.name] = value
            continue
        data[f.name] = to_json(getattr(node, f.name))
    return data
