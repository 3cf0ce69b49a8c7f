"""Pretty-printer; its output re-parses to a structurally identical AST."""

from __future__ import annotations

from .ast import (ArrayNew, Assign, Binary, BoolLit, Break, Call, Convert,
                  Decl, Expr, ExprStmt, FieldRef, FloatLit, For, If, IncDec,
                  Index, IntLit, MethodDecl, NullLit, ObjectNew, Program,
                  Return, Stmt, Switch, Unary, VarRef, While)

_PRECEDENCE = {
    "||": 1, "&&": 2, "|": 3, "&": 4, "==": 5,
    "<": 6, "<=": 6, ">": 6, ">=": 6,
    "<<": 7, ">>": 7, "+": 8, "-": 8, "*": 9, "/": 9,
}
_UNARY_PREC = 10


def _expr(e: Expr, parent_prec: int = 0, right_of: str = "") -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, FloatLit):
        return repr(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, NullLit):
        return "null"
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, FieldRef):
        return f"{_expr(e.obj, _UNARY_PREC)}.{e.fieldname}"
    if isinstance(e, Index):
        return f"{_expr(e.arr, _UNARY_PREC)}[{_expr(e.index)}]"
    if isinstance(e, Unary):
        return f"!{_expr(e.operand, _UNARY_PREC)}"
    if isinstance(e, Convert):
        return f"({e.target}) {_expr(e.operand, _UNARY_PREC)}"
    if isinstance(e, Call):
        args = ", ".join(_expr(a) for a in e.args)
        return f"{e.name}({args})"
    if isinstance(e, ObjectNew):
        if not e.inits:
            return "new Object {}"
        inits = ", ".join(f"{n} = {_expr(v)}" for n, v in e.inits)
        return f"new Object {{ {inits} }}"
    if isinstance(e, ArrayNew):
        return f"new {e.elem}[{_expr(e.size)}]"
    if isinstance(e, Binary):
        prec = _PRECEDENCE[e.op]
        left = _expr(e.left, prec)
        # left-associative: a right child at equal precedence needs parens
        right = _expr(e.right, prec + 1)
        text = f"{left} {e.op} {right}"
        if prec < parent_prec:
            return f"({text})"
        # relational/equality do not chain; parenthesize when nested in one
        if e.op in ("<", "<=", ">", ">=", "==") and parent_prec == prec:
            return f"({text})"
        return text
    raise TypeError(f"cannot print {type(e).__name__}")


def _simple_stmt(s: Stmt) -> str:
    """Statement text without the trailing semicolon (for for-headers)."""
    if isinstance(s, Decl):
        if s.init is None:
            return f"{s.decl_ty} {s.name}"
        return f"{s.decl_ty} {s.name} = {_expr(s.init)}"
    if isinstance(s, Assign):
        return f"{_expr(s.target, _UNARY_PREC)} = {_expr(s.value)}"
    if isinstance(s, IncDec):
        return f"{_expr(s.target, _UNARY_PREC)}{s.op}"
    if isinstance(s, ExprStmt):
        return _expr(s.call)
    raise TypeError(f"not a simple statement: {type(s).__name__}")


def _stmt(s: Stmt, out: list[str], indent: int) -> None:
    pad = "    " * indent
    if isinstance(s, (Decl, Assign, IncDec, ExprStmt)):
        out.append(f"{pad}{_simple_stmt(s)};")
    elif isinstance(s, Return):
        out.append(f"{pad}return;" if s.value is None
                   else f"{pad}return {_expr(s.value)};")
    elif isinstance(s, Break):
        out.append(f"{pad}break;")
    elif isinstance(s, If):
        out.append(f"{pad}if ({_expr(s.cond)}) {{")
        _body(s.then_body, out, indent + 1)
        if s.else_body is None:
            out.append(f"{pad}}}")
        else:
            out.append(f"{pad}}} else {{")
            _body(s.else_body, out, indent + 1)
            out.append(f"{pad}}}")
    elif isinstance(s, For):
        init = _simple_stmt(s.init) if s.init is not None else ""
        update = _simple_stmt(s.update) if s.update is not None else ""
        out.append(f"{pad}for ({init}; {_expr(s.cond)}; {update}) {{")
        _body(s.body, out, indent + 1)
        out.append(f"{pad}}}")
    elif isinstance(s, While):
        out.append(f"{pad}while ({_expr(s.cond)}) {{")
        _body(s.body, out, indent + 1)
        out.append(f"{pad}}}")
    elif isinstance(s, Switch):
        out.append(f"{pad}switch ({_expr(s.subject)}) {{")
        for value, arm in s.arms:
            out.append(f"{pad}    case {value}: {{")
            _body(arm, out, indent + 2)
            out.append(f"{pad}    }}")
        if s.default is not None:
            out.append(f"{pad}    default: {{")
            _body(s.default, out, indent + 2)
            out.append(f"{pad}    }}")
        out.append(f"{pad}}}")
    else:
        raise TypeError(f"cannot print {type(s).__name__}")


def _body(body: list[Stmt], out: list[str], indent: int) -> None:
    for s in body:
        _stmt(s, out, indent)


def pretty_print(program: Program) -> str:
    out: list[str] = []
    for i, m in enumerate(program.methods):
        if i:
            out.append("")
        params = ", ".join(f"{p.ty} {p.name}" for p in m.params)
        out.append(f"{m.ret} {m.name}({params}) {{")
        if not m.body:
            out[-1] = out[-1][:-1] + "{}"
            continue
        _body(m.body, out, 1)
        out.append("}")
    return "\n".join(out) + "\n"
