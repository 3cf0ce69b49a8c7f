"""Static checks: name resolution, typing, reachability.

``check`` annotates every expression node in place with its static type
(``.ty``) and returns a :class:`CheckedProgram` wrapper carrying the symbol
tables.  Operand-type signatures (``Addition_int_int`` vs
``Multi_float_float``) are decidable from the annotations alone.

Rules beyond the obvious:

* object field types are global: every field name has one type, inferred
  from ``new Object`` initializers and field writes and consistent across
  the program,
* arithmetic and bitwise operands must have equal types (use ``(int)`` /
  ``(float)`` to mix); relational comparisons may mix int and float,
* local names may not shadow an outer local or parameter,
* code after ``return``/``break`` in the same statement list is an error,
* a non-void method body must end with a return statement,
* ``break`` is only valid inside a loop body (switch arms never fall
  through, so break is not needed there).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (ArrayNew, Assign, Binary, BoolLit, Break, Call, Convert,
                  Decl, Expr, ExprStmt, FieldRef, FloatLit, For, If, IncDec,
                  Index, IntLit, MethodDecl, NullLit, ObjectNew, Program,
                  Return, Stmt, Switch, Unary, VarRef, While)
from .errors import CheckError
from . import library

NUMERIC = ("int", "float")
ARRAYS = ("int[]", "float[]", "char[]")
ELEM = {"int[]": "int", "float[]": "float", "char[]": "int"}


@dataclass
class CheckedProgram:
    program: Program
    methods: dict[str, MethodDecl]
    field_types: dict[str, str]
    entry: str  # name of the first declared method

    def method(self, name: str) -> MethodDecl:
        return self.methods[name]


class _Scope:
    def __init__(self, parent=None):
        self.parent = parent
        self.names: dict[str, str] = {}

    def lookup(self, name: str):
        scope = self
        while scope is not None:
            if name in scope.names:
                return scope.names[name]
            scope = scope.parent
        return None

    def declare(self, name: str, ty: str, span) -> None:
        if self.lookup(name) is not None:
            raise CheckError(f"{name!r} shadows an existing binding", span)
        self.names[name] = ty


class _Checker:
    def __init__(self, program: Program):
        self.program = program
        self.methods: dict[str, MethodDecl] = {}
        self.field_types: dict[str, str] = {}

    def run(self) -> CheckedProgram:
        if not self.program.methods:
            raise CheckError("program has no methods")
        for m in self.program.methods:
            if m.name in self.methods:
                raise CheckError(f"duplicate method name {m.name!r}", m.span)
            if library.is_library(m.name):
                raise CheckError(f"{m.name!r} collides with a library function",
                                 m.span)
            self.methods[m.name] = m
        self._infer_field_types()
        for m in self.program.methods:
            self._check_method(m)
        return CheckedProgram(self.program, self.methods, self.field_types,
                              self.program.methods[0].name)

    # -- field table -----------------------------------------------------

    def _infer_field_types(self) -> None:
        """Global field table from ObjectNew initializers.

        Initializer types are resolved in a later pass; here we only need
        the shapes that are decidable without full expression typing, so we
        run a light pre-pass: literal/new/cast shapes plus declared
        parameter and local types.  Anything unresolved is settled during
        method checking, where writes and inits are verified against the
        table.
        """
        # Collect candidate field names first so reads can be validated.
        def walk_expr(e: Expr):
            if isinstance(e, ObjectNew):
                for name, value in e.inits:
                    self.field_types.setdefault(name, None)
                    walk_expr(value)
            elif isinstance(e, (Unary, Convert)):
                walk_expr(e.operand)
            elif isinstance(e, Binary):
                walk_expr(e.left)
                walk_expr(e.right)
            elif isinstance(e, FieldRef):
                walk_expr(e.obj)
            elif isinstance(e, Index):
                walk_expr(e.arr)
                walk_expr(e.index)
            elif isinstance(e, Call):
                for a in e.args:
                    walk_expr(a)
            elif isinstance(e, ArrayNew):
                walk_expr(e.size)

        def walk_stmt(s: Stmt):
            for child in _expr_children(s):
                walk_expr(child)
            for body in _stmt_bodies(s):
                for sub in body:
                    walk_stmt(sub)

        for m in self.program.methods:
            for s in m.body:
                walk_stmt(s)

    def _record_field(self, name: str, ty: str, span) -> None:
        known = self.field_types.get(name)
        if known is None:
            self.field_types[name] = ty
        elif known != ty:
            raise CheckError(f"field {name!r} used with conflicting types "
                             f"{known} and {ty}", span)

    # -- methods -----------------------------------------------------------

    def _check_method(self, m: MethodDecl) -> None:
        scope = _Scope()
        for p in m.params:
            scope.declare(p.name, p.ty, p.span)
        self._check_body(m.body, scope, m, in_loop=False)
        if m.ret != "void":
            if not m.body or not isinstance(m.body[-1], Return):
                raise CheckError(f"method {m.name!r} must end with a return",
                                 m.span)

    def _check_body(self, body: list[Stmt], scope: _Scope, m: MethodDecl,
                    in_loop: bool) -> None:
        inner = _Scope(scope)
        for i, s in enumerate(body):
            if i > 0 and isinstance(body[i - 1], (Return, Break)):
                raise CheckError("unreachable statement", s.span)
            self._check_stmt(s, inner, m, in_loop)

    def _check_stmt(self, s: Stmt, scope: _Scope, m: MethodDecl,
                    in_loop: bool) -> None:
        if isinstance(s, Decl):
            if s.init is not None:
                ity = self._type_expr(s.init, scope)
                self._check_assignable(s.decl_ty, ity, s.span)
            scope.declare(s.name, s.decl_ty, s.span)
        elif isinstance(s, Assign):
            tty = self._type_lvalue(s.target, scope, writing=True,
                                    value_expr=s.value)
            vty = self._type_expr(s.value, scope)
            self._check_assignable(tty, vty, s.span)
        elif isinstance(s, IncDec):
            tty = self._type_lvalue(s.target, scope, writing=True)
            if tty != "int":
                raise CheckError("++/-- requires an int target", s.span)
        elif isinstance(s, If):
            self._require(s.cond, "bool", scope, "if condition")
            self._check_body(s.then_body, scope, m, in_loop)
            if s.else_body is not None:
                self._check_body(s.else_body, scope, m, in_loop)
        elif isinstance(s, For):
            header = _Scope(scope)
            if s.init is not None:
                self._check_stmt(s.init, header, m, in_loop)
            self._require(s.cond, "bool", header, "for condition")
            if s.update is not None:
                if isinstance(s.update, Decl):
                    raise CheckError("for-update cannot declare", s.span)
                self._check_stmt(s.update, header, m, in_loop)
            self._check_body(s.body, header, m, in_loop=True)
        elif isinstance(s, While):
            self._require(s.cond, "bool", scope, "while condition")
            self._check_body(s.body, scope, m, in_loop=True)
        elif isinstance(s, Switch):
            self._require(s.subject, "int", scope, "switch subject")
            seen = set()
            for value, arm in s.arms:
                if value in seen:
                    raise CheckError(f"duplicate case {value}", s.span)
                seen.add(value)
                self._check_body(arm, scope, m, in_loop)
            if s.default is not None:
                self._check_body(s.default, scope, m, in_loop)
        elif isinstance(s, ExprStmt):
            self._type_expr(s.call, scope)
        elif isinstance(s, Return):
            if s.value is None:
                if m.ret != "void":
                    raise CheckError(f"method {m.name!r} must return {m.ret}",
                                     s.span)
            else:
                if m.ret == "void":
                    raise CheckError("void method cannot return a value", s.span)
                vty = self._type_expr(s.value, scope)
                self._check_assignable(m.ret, vty, s.span)
        elif isinstance(s, Break):
            if not in_loop:
                raise CheckError("break outside a loop", s.span)
        else:
            raise CheckError(f"unhandled statement {type(s).__name__}", s.span)

    # -- expressions ------------------------------------------------------

    def _require(self, e: Expr, ty: str, scope: _Scope, what: str) -> None:
        got = self._type_expr(e, scope)
        if got != ty:
            raise CheckError(f"{what} must be {ty}, got {got}", e.span)

    def _check_assignable(self, target: str, value: str, span) -> None:
        if target == value:
            return
        if target == "Object" and value == "null":
            return
        raise CheckError(f"cannot assign {value} to {target}", span)

    def _type_lvalue(self, e: Expr, scope: _Scope, writing: bool,
                     value_expr: Expr = None) -> str:
        if isinstance(e, VarRef):
            ty = scope.lookup(e.name)
            if ty is None:
                raise CheckError(f"unresolved identifier {e.name!r}", e.span)
            e.ty = ty
            return ty
        if isinstance(e, FieldRef):
            oty = self._type_expr(e.obj, scope)
            if oty != "Object":
                raise CheckError("field access requires an Object", e.span)
            known = self.field_types.get(e.fieldname)
            if writing and value_expr is not None and known is None:
                known = self._type_expr(value_expr, scope)
                self._record_field(e.fieldname, known, e.span)
            if known is None:
                raise CheckError(f"field {e.fieldname!r} has no known type "
                                 "(never initialized)", e.span)
            self.field_types[e.fieldname] = known
            e.ty = known
            return known
        if isinstance(e, Index):
            aty = self._type_expr(e.arr, scope)
            if aty not in ARRAYS:
                raise CheckError("indexing requires an array", e.span)
            self._require(e.index, "int", scope, "array index")
            e.ty = ELEM[aty]
            return e.ty
        raise CheckError("invalid assignment target", e.span)

    def _type_expr(self, e: Expr, scope: _Scope) -> str:
        ty = self._type_expr_inner(e, scope)
        e.ty = ty
        return ty

    def _type_expr_inner(self, e: Expr, scope: _Scope) -> str:
        if isinstance(e, IntLit):
            return "int"
        if isinstance(e, FloatLit):
            return "float"
        if isinstance(e, BoolLit):
            return "bool"
        if isinstance(e, NullLit):
            return "null"
        if isinstance(e, (VarRef, FieldRef, Index)):
            return self._type_lvalue(e, scope, writing=False)
        if isinstance(e, Unary):
            self._require(e.operand, "bool", scope, "operand of !")
            return "bool"
        if isinstance(e, Convert):
            oty = self._type_expr(e.operand, scope)
            if oty not in NUMERIC or e.target not in NUMERIC:
                raise CheckError(f"cannot convert {oty} to {e.target}", e.span)
            return e.target
        if isinstance(e, Binary):
            return self._type_binary(e, scope)
        if isinstance(e, Call):
            return self._type_call(e, scope)
        if isinstance(e, ObjectNew):
            for name, value in e.inits:
                vty = self._type_expr(value, scope)
                if vty == "null":
                    vty = "Object"
                if vty == "void":
                    raise CheckError("field initializer has no value", e.span)
                self._record_field(name, vty, e.span)
            return "Object"
        if isinstance(e, ArrayNew):
            self._require(e.size, "int", scope, "array size")
            return e.elem + "[]"
        raise CheckError(f"unhandled expression {type(e).__name__}", e.span)

    def _type_binary(self, e: Binary, scope: _Scope) -> str:
        lt = self._type_expr(e.left, scope)
        rt = self._type_expr(e.right, scope)
        op = e.op
        if op in ("+", "-", "*", "/"):
            if lt == rt and lt in NUMERIC:
                return lt
            raise CheckError(f"arithmetic {op!r} requires equal numeric "
                             f"operand types, got {lt} and {rt}", e.span)
        if op in ("&", "|", "<<", ">>"):
            if lt == rt == "int":
                return "int"
            raise CheckError(f"bitwise {op!r} requires int operands", e.span)
        if op in ("&&", "||"):
            if lt == rt == "bool":
                return "bool"
            raise CheckError(f"{op!r} requires bool operands", e.span)
        if op in ("<", "<=", ">", ">="):
            if lt in NUMERIC and rt in NUMERIC:
                return "bool"
            raise CheckError(f"comparison {op!r} requires numeric operands",
                             e.span)
        if op == "==":
            ok = (
                (lt in NUMERIC and rt in NUMERIC)
                or (lt == rt == "bool")
                or (lt == rt == "Object")
                or (lt == "Object" and rt == "null")
                or (lt == "null" and rt == "Object")
            )
            if not ok:
                raise CheckError(f"cannot compare {lt} with {rt}", e.span)
            return "bool"
        raise CheckError(f"unknown operator {op!r}", e.span)

    def _type_call(self, e: Call, scope: _Scope) -> str:
        arg_types = [self._type_expr(a, scope) for a in e.args]
        if library.is_library(e.name):
            e.is_library = True
            return library.resolve_call(e.name, arg_types, e.span)
        e.is_library = False
        m = self.methods.get(e.name)
        if m is None:
            raise CheckError(f"call to unknown method {e.name!r}", e.span)
        if len(arg_types) != len(m.params):
            raise CheckError(f"{e.name} expects {len(m.params)} argument(s), "
                             f"got {len(arg_types)}", e.span)
        for got, p in zip(arg_types, m.params):
            if got != p.ty and not (p.ty == "Object" and got == "null"):
                raise CheckError(f"argument {p.name!r} of {e.name} expects "
                                 f"{p.ty}, got {got}", e.span)
        return m.ret


def _expr_children(s: Stmt) -> list[Expr]:
    if isinstance(s, Decl):
        return [s.init] if s.init is not None else []
    if isinstance(s, Assign):
        return [s.target, s.value]
    if isinstance(s, IncDec):
        return [s.target]
    if isinstance(s, If):
        return [s.cond]
    if isinstance(s, For):
        return [s.cond]
    if isinstance(s, While):
        return [s.cond]
    if isinstance(s, Switch):
        return [s.subject]
    if isinstance(s, ExprStmt):
        return [s.call]
    if isinstance(s, Return):
        return [s.value] if s.value is not None else []
    return []


def _stmt_bodies(s: Stmt) -> list[list[Stmt]]:
    if isinstance(s, If):
        return [s.then_body] + ([s.else_body] if s.else_body else [])
    if isinstance(s, For):
        bodies = [s.body]
        if s.init is not None:
            bodies.append([s.init])
        if s.update is not None:
            bodies.append([s.update])
        return bodies
    if isinstance(s, While):
        return [s.body]
    if isinstance(s, Switch):
        return [arm for _, arm in s.arms] + ([s.default] if s.default else [])
    return []


def check(program: Program) -> CheckedProgram:
    """Annotate expression types in place and return the checked wrapper."""
    return _Checker(program).run()
