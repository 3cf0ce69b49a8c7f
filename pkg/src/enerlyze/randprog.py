"""Seeded random program generator.

Produces type-correct, terminating programs with no runtime errors on any
int inputs: division only by nonzero literals, array indexing only through
loop counters bounded by the array length (or literal indices), while
loops only as counter patterns whose increment the generator reserves, and
output buffers sized above the worst-case number of puts.  Used by the
round-trip and step-trace-equivalence property suites and for fuzzing the
refactoring safety checks.
"""

from __future__ import annotations

from random import Random

from .lang.ast import (ArrayNew, Assign, Binary, BoolLit, Break, Call, Convert,
                       Decl, Expr, FieldRef, FloatLit, For, If, IncDec, Index,
                       IntLit, MethodDecl, ObjectNew, Param, Program, Return,
                       Stmt, Switch, Unary, VarRef, While)

ARRAY_LEN = 8
SINK_LEN = 4096


class _Gen:
    def __init__(self, seed: int):
        self.rng = Random(f"randprog:{seed}")
        self.counter = 0

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}{self.counter}"

    # -- expressions -------------------------------------------------------

    def int_expr(self, vars_int: list[str], depth: int = 0) -> Expr:
        r = self.rng.random()
        if depth >= 2 or r < 0.3:
            if vars_int and self.rng.random() < 0.6:
                return VarRef(self.rng.choice(vars_int))
            return IntLit(self.rng.randrange(-4, 10))
        if r < 0.75:
            op = self.rng.choice(["+", "-", "*"])
            return Binary(op, self.int_expr(vars_int, depth + 1),
                          self.int_expr(vars_int, depth + 1))
        if r < 0.85:
            return Binary("/", self.int_expr(vars_int, depth + 1),
                          IntLit(self.rng.randrange(1, 9)))
        if r < 0.95:
            op = self.rng.choice(["&", "|", "<<", ">>"])
            return Binary(op, self.int_expr(vars_int, depth + 1),
                          IntLit(self.rng.randrange(0, 4)))
        return Convert("int", self.float_expr([], depth + 1))

    def float_expr(self, vars_float: list[str], depth: int = 0) -> Expr:
        r = self.rng.random()
        if depth >= 2 or r < 0.35:
            if vars_float and self.rng.random() < 0.6:
                return VarRef(self.rng.choice(vars_float))
            return FloatLit(round(self.rng.uniform(-2.0, 4.0), 3))
        if r < 0.7:
            op = self.rng.choice(["+", "-", "*"])
            return Binary(op, self.float_expr(vars_float, depth + 1),
                          self.float_expr(vars_float, depth + 1))
        if r < 0.8:
            return Binary("/", self.float_expr(vars_float, depth + 1),
                          FloatLit(self.rng.choice([2.0, 4.0, 0.5, 1.5])))
        if r < 0.9:
            return Call("math_sin", [self.float_expr(vars_float, depth + 1)])
        return Convert("float", self.int_expr([], depth + 1))

    def bool_expr(self, vars_int: list[str], vars_float: list[str],
                  depth: int = 0) -> Expr:
        r = self.rng.random()
        if depth >= 1 or r < 0.6:
            op = self.rng.choice(["<", "<=", ">", ">=", "=="])
            if vars_float and self.rng.random() < 0.3:
                left = self.float_expr(vars_float, 2)
                right = self.float_expr(vars_float, 2)
            else:
                left = self.int_expr(vars_int, 2)
                right = self.int_expr(vars_int, 2)
            return Binary(op, left, right)
        if r < 0.8:
            op = self.rng.choice(["&&", "||"])
            return Binary(op,
                          self.bool_expr(vars_int, vars_float, depth + 1),
                          self.bool_expr(vars_int, vars_float, depth + 1))
        return Unary("!", self.bool_expr(vars_int, vars_float, depth + 1))


class _Scope:
    def __init__(self):
        self.ints: list[str] = []
        self.floats: list[str] = []
        self.array: str = ""
        self.sink: str = ""
        self.obj: str = ""
        self.puts = 0


def _statements(gen: _Gen, scope: _Scope, budget: int, depth: int,
                in_loop: bool) -> list[Stmt]:
    rng = gen.rng
    body: list[Stmt] = []
    while budget > 0:
        budget -= 1
        kind = rng.random()
        if kind < 0.30:
            if scope.floats and rng.random() < 0.4:
                name = rng.choice(scope.floats)
                body.append(Assign(VarRef(name),
                                   gen.float_expr(scope.floats)))
            else:
                name = rng.choice(scope.ints)
                body.append(Assign(VarRef(name), gen.int_expr(scope.ints)))
        elif kind < 0.38:
            body.append(IncDec(VarRef(rng.choice(scope.ints)),
                               rng.choice(["++", "--"])))
        elif kind < 0.46 and scope.array:
            idx = IntLit(rng.randrange(ARRAY_LEN))
            body.append(Assign(Index(VarRef(scope.array), idx),
                               gen.int_expr(scope.ints)))
        elif kind < 0.52 and scope.obj:
            body.append(Assign(FieldRef(VarRef(scope.obj), "tag"),
                               gen.int_expr(scope.ints)))
        elif kind < 0.62 and depth < 2:
            then_budget = rng.randrange(1, 3)
            then_body = _statements(gen, scope, then_budget, depth + 1,
                                    in_loop)
            else_body = None
            if rng.random() < 0.4:
                else_body = _statements(gen, scope, 1, depth + 1, in_loop)
            if in_loop and rng.random() < 0.15:
                then_body.append(Break())
            body.append(If(gen.bool_expr(scope.ints, scope.floats),
                           then_body, else_body))
        elif kind < 0.74 and depth < 2:
            var = gen.fresh("i")
            bound = rng.randrange(2, ARRAY_LEN + 1)
            inner_scope = _snapshot(scope)
            inner_scope.ints = scope.ints + [var]
            inner = _statements(gen, inner_scope, rng.randrange(1, 3),
                                depth + 1, True)
            if scope.array and rng.random() < 0.5:
                inner.insert(0, Assign(Index(VarRef(scope.array), VarRef(var)),
                                       gen.int_expr(inner_scope.ints)))
            if scope.sink and scope.puts + bound <= SINK_LEN // 4:
                scope.puts += bound
                inner.append(ExprStmtPut(scope.sink,
                                         gen.float_expr(scope.floats)))
            body.append(For(Decl("int", var, IntLit(0)),
                            Binary("<", VarRef(var), IntLit(bound)),
                            IncDec(VarRef(var), "++"), inner))
        elif kind < 0.80 and depth < 2:
            var = gen.fresh("w")
            bound = rng.randrange(2, 5)
            inner_scope = _snapshot(scope)
            inner = _statements(gen, inner_scope, 1, depth + 1, True)
            inner.append(Assign(VarRef(var),
                                Binary("+", VarRef(var), IntLit(1))))
            body.append(Decl("int", var, IntLit(0)))
            body.append(While(Binary("<", VarRef(var), IntLit(bound)), inner))
        elif kind < 0.88 and depth < 2:
            subject = VarRef(rng.choice(scope.ints))
            values = rng.sample(range(0, 6), k=rng.randrange(2, 4))
            arms = [(v, _statements(gen, scope, 1, depth + 1, in_loop))
                    for v in values]
            default = (_statements(gen, scope, 1, depth + 1, in_loop)
                       if rng.random() < 0.5 else None)
            body.append(Switch(subject, arms, default))
        else:
            name = gen.fresh("t")
            if rng.random() < 0.5:
                body.append(Decl("int", name, gen.int_expr(scope.ints)))
                scope.ints = scope.ints + [name]
            else:
                body.append(Decl("float", name, gen.float_expr(scope.floats)))
                scope.floats = scope.floats + [name]
    return body


def ExprStmtPut(sink: str, value: Expr) -> Stmt:
    from .lang.ast import ExprStmt
    return ExprStmt(Call("buffer_put", [VarRef(sink), value]))


def _snapshot(scope: _Scope) -> _Scope:
    clone = _Scope()
    clone.ints = list(scope.ints)
    clone.floats = list(scope.floats)
    clone.array = scope.array
    clone.sink = scope.sink
    clone.obj = scope.obj
    clone.puts = scope.puts
    return clone


def generate_program(seed: int) -> Program:
    """One random program; the entry method is ``main(int a, int b)``."""
    gen = _Gen(seed)
    rng = gen.rng
    scope = _Scope()
    scope.ints = ["a", "b"]

    prologue: list[Stmt] = []
    for _ in range(rng.randrange(1, 3)):
        name = gen.fresh("x")
        prologue.append(Decl("int", name, gen.int_expr(scope.ints)))
        scope.ints = scope.ints + [name]
    fname = gen.fresh("f")
    prologue.append(Decl("float", fname, gen.float_expr([])))
    scope.floats = [fname]

    if rng.random() < 0.7:
        scope.array = gen.fresh("arr")
        prologue.append(Decl("int[]", scope.array,
                             ArrayNew("int", IntLit(ARRAY_LEN))))
    if rng.random() < 0.6:
        scope.sink = gen.fresh("sink")
        prologue.append(Decl("float[]", scope.sink,
                             ArrayNew("float", IntLit(SINK_LEN))))
    if rng.random() < 0.5:
        scope.obj = gen.fresh("o")
        prologue.append(Decl(
            "Object", scope.obj,
            ObjectNew([("tag", IntLit(rng.randrange(4))),
                       ("w", FloatLit(1.5))])))

    methods: list[MethodDecl] = []
    helper = None
    if rng.random() < 0.6:
        helper = gen.fresh("helper")
        helper_scope = _Scope()
        helper_scope.ints = ["p", "q"]
        helper_body = _statements(gen, helper_scope, rng.randrange(1, 4),
                                  1, False)
        helper_body.append(Return(gen.int_expr(helper_scope.ints)))
        methods.append(MethodDecl(helper, [Param("int", "p"),
                                           Param("int", "q")],
                                  "int", helper_body))

    main_body = prologue + _statements(gen, scope, rng.randrange(3, 8), 0,
                                       False)
    if helper is not None:
        name = gen.fresh("h")
        main_body.append(Decl("int", name,
                              Call(helper, [gen.int_expr(scope.ints),
                                            IntLit(rng.randrange(5))])))
    main = MethodDecl("main", [Param("int", "a"), Param("int", "b")],
                      "void", main_body)
    return Program([main] + methods)
