"""Conservative program analyses shared by the refactoring strategies.

Effects are abstracted as a set of tokens:

* ``var:<name>``      -- a caller-visible local (callee locals never leak,
                         since parameters bind values/references by value),
* ``field:<name>``    -- some object's field of that name; field names have
                         one global type, so writes to a name can only
                         affect reads of the same name,
* ``elem``            -- some array's element store,
* ``io``              -- observable output (impure library calls).

A read/write conflict on the abstraction is necessary for a real conflict,
so disjointness proves safety.  Method calls take the callee's transitive
field/elem/io effects (computed over the call graph; recursion is treated
as may-touch-everything).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..lang.ast import (ArrayNew, Assign, Binary, Break, Call, Convert, Decl,
                        Expr, ExprStmt, FieldRef, For, If, IncDec, Index,
                        ObjectNew, Return, Stmt, Switch, Unary, VarRef, While)
from ..lang.checker import CheckedProgram
from ..lang import library

EVERYTHING = frozenset({"*"})


@dataclass
class Effects:
    reads: set[str] = field(default_factory=set)
    writes: set[str] = field(default_factory=set)

    def update(self, other: "Effects") -> None:
        self.reads |= other.reads
        self.writes |= other.writes


def _conflicts(a: set[str], b: set[str]) -> bool:
    if "*" in a or "*" in b:
        return True
    return bool(a & b)


def effects_conflict(a: Effects, b: Effects) -> bool:
    """True when the two effect sets may interfere (RW, WR or WW)."""
    return (_conflicts(a.writes, b.reads) or _conflicts(a.reads, b.writes)
            or _conflicts(a.writes, b.writes))


class EffectAnalysis:
    """Per-method transitive heap effects plus expression/statement effects."""

    def __init__(self, checked: CheckedProgram):
        self.checked = checked
        self._method_effects: dict[str, Effects] = {}
        self._in_progress: set[str] = set()

    # -- method summaries (heap + io only; locals stay inside) -------------

    def method_effects(self, name: str) -> Effects:
        if name in self._method_effects:
            return self._method_effects[name]
        if name in self._in_progress:  # recursion: give up precisely
            return Effects(reads=set(EVERYTHING), writes=set(EVERYTHING))
        self._in_progress.add(name)
        eff = Effects()
        for s in self.checked.method(name).body:
            eff.update(self._stmt(s, locals_visible=False))
        self._in_progress.discard(name)
        eff.reads = {t for t in eff.reads if not t.startswith("var:")}
        eff.writes = {t for t in eff.writes if not t.startswith("var:")}
        self._method_effects[name] = eff
        return eff

    # -- expressions -------------------------------------------------------

    def expr(self, e: Expr, locals_visible: bool = True) -> Effects:
        eff = Effects()
        self._expr(e, eff, locals_visible)
        return eff

    def _expr(self, e: Expr, eff: Effects, locals_visible: bool) -> None:
        if isinstance(e, VarRef):
            if locals_visible:
                eff.reads.add(f"var:{e.name}")
        elif isinstance(e, FieldRef):
            self._expr(e.obj, eff, locals_visible)
            eff.reads.add(f"field:{e.fieldname}")
        elif isinstance(e, Index):
            self._expr(e.arr, eff, locals_visible)
            self._expr(e.index, eff, locals_visible)
            eff.reads.add("elem")
        elif isinstance(e, (Unary, Convert)):
            self._expr(e.operand, eff, locals_visible)
        elif isinstance(e, Binary):
            self._expr(e.left, eff, locals_visible)
            self._expr(e.right, eff, locals_visible)
        elif isinstance(e, Call):
            for a in e.args:
                self._expr(a, eff, locals_visible)
            if e.is_library:
                fn = library.REGISTRY[e.name]
                if not fn.pure:
                    eff.writes.add("elem")
                    eff.writes.add("io")
                # array length is immutable, so list_size reads nothing
                if e.name in ("list_get", "buffer_bulk_put"):
                    eff.reads.add("elem")
            else:
                eff.update(self.method_effects(e.name))
        elif isinstance(e, ObjectNew):
            for _, value in e.inits:
                self._expr(value, eff, locals_visible)
        elif isinstance(e, ArrayNew):
            self._expr(e.size, eff, locals_visible)
        # literals: no effects

    # -- statements ----------------------------------------------------------

    def stmt(self, s: Stmt, locals_visible: bool = True) -> Effects:
        return self._stmt(s, locals_visible)

    def _stmt(self, s: Stmt, locals_visible: bool) -> Effects:
        eff = Effects()
        if isinstance(s, Decl):
            if s.init is not None:
                self._expr(s.init, eff, locals_visible)
            if locals_visible:
                eff.writes.add(f"var:{s.name}")
        elif isinstance(s, Assign):
            self._expr(s.value, eff, locals_visible)
            if isinstance(s.target, VarRef):
                if locals_visible:
                    eff.writes.add(f"var:{s.target.name}")
            elif isinstance(s.target, FieldRef):
                self._expr(s.target.obj, eff, locals_visible)
                eff.writes.add(f"field:{s.target.fieldname}")
            elif isinstance(s.target, Index):
                self._expr(s.target.arr, eff, locals_visible)
                self._expr(s.target.index, eff, locals_visible)
                eff.writes.add("elem")
        elif isinstance(s, IncDec):
            if isinstance(s.target, VarRef):
                if locals_visible:
                    eff.reads.add(f"var:{s.target.name}")
                    eff.writes.add(f"var:{s.target.name}")
            else:
                self._expr(s.target.obj, eff, locals_visible)
                eff.reads.add(f"field:{s.target.fieldname}")
                eff.writes.add(f"field:{s.target.fieldname}")
        elif isinstance(s, If):
            self._expr(s.cond, eff, locals_visible)
            for body in [s.then_body] + ([s.else_body] if s.else_body else []):
                for sub in body:
                    eff.update(self._stmt(sub, locals_visible))
        elif isinstance(s, For):
            if s.init is not None:
                eff.update(self._stmt(s.init, locals_visible))
            self._expr(s.cond, eff, locals_visible)
            if s.update is not None:
                eff.update(self._stmt(s.update, locals_visible))
            for sub in s.body:
                eff.update(self._stmt(sub, locals_visible))
        elif isinstance(s, While):
            self._expr(s.cond, eff, locals_visible)
            for sub in s.body:
                eff.update(self._stmt(sub, locals_visible))
        elif isinstance(s, Switch):
            self._expr(s.subject, eff, locals_visible)
            for _, arm in s.arms:
                for sub in arm:
                    eff.update(self._stmt(sub, locals_visible))
            for sub in s.default or []:
                eff.update(self._stmt(sub, locals_visible))
        elif isinstance(s, ExprStmt):
            self._expr(s.call, eff, locals_visible)
        elif isinstance(s, Return):
            if s.value is not None:
                self._expr(s.value, eff, locals_visible)
        elif isinstance(s, Break):
            pass
        return eff

    # -- purity ---------------------------------------------------------------

    def expr_pure(self, e: Expr) -> bool:
        """No writes and no observable output; reads are fine."""
        eff = self.expr(e)
        return not eff.writes

    def expr_allocates(self, e: Expr) -> bool:
        if isinstance(e, (ObjectNew, ArrayNew)):
            return True
        for child in _expr_children(e):
            if self.expr_allocates(child):
                return True
        return False


def _expr_children(e: Expr) -> list[Expr]:
    if isinstance(e, (Unary, Convert)):
        return [e.operand]
    if isinstance(e, Binary):
        return [e.left, e.right]
    if isinstance(e, FieldRef):
        return [e.obj]
    if isinstance(e, Index):
        return [e.arr, e.index]
    if isinstance(e, Call):
        return list(e.args)
    if isinstance(e, ObjectNew):
        return [v for _, v in e.inits]
    if isinstance(e, ArrayNew):
        return [e.size]
    return []


def expr_free_vars(e: Expr) -> set[str]:
    out: set[str] = set()
    if isinstance(e, VarRef):
        out.add(e.name)
    for child in _expr_children(e):
        out |= expr_free_vars(child)
    return out


def stmt_free_vars(s: Stmt) -> set[str]:
    out: set[str] = set()
    for e in _stmt_exprs(s):
        out |= expr_free_vars(e)
    for body in _stmt_sub_bodies(s):
        for sub in body:
            out |= stmt_free_vars(sub)
    return out


def _stmt_exprs(s: Stmt) -> list[Expr]:
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


def _stmt_sub_bodies(s: Stmt) -> list[list[Stmt]]:
    if isinstance(s, If):
        return [s.then_body] + ([s.else_body] if s.else_body else [])
    if isinstance(s, For):
        extra = [[s.init]] if s.init is not None else []
        extra += [[s.update]] if s.update is not None else []
        return [s.body] + extra
    if isinstance(s, While):
        return [s.body]
    if isinstance(s, Switch):
        return [a for _, a in s.arms] + ([s.default] if s.default else [])
    return []


def declared_names(body: list[Stmt]) -> set[str]:
    """All names declared anywhere under a statement list."""
    out: set[str] = set()
    for s in body:
        if isinstance(s, Decl):
            out.add(s.name)
        if isinstance(s, For) and isinstance(s.init, Decl):
            out.add(s.init.name)
        for sub in _stmt_sub_bodies(s):
            out |= declared_names(sub)
    return out


def method_names_in_use(m) -> set[str]:
    """Every identifier bound anywhere in a method (params + declarations)."""
    names = {p.name for p in m.params}
    names |= declared_names(m.body)
    return names


def written_vars(body: list[Stmt]) -> set[str]:
    """Caller-level variable names that a statement list may write."""
    out: set[str] = set()
    for s in body:
        if isinstance(s, Decl):
            out.add(s.name)
        elif isinstance(s, Assign) and isinstance(s.target, VarRef):
            out.add(s.target.name)
        elif isinstance(s, IncDec) and isinstance(s.target, VarRef):
            out.add(s.target.name)
        elif isinstance(s, For):
            header = [x for x in (s.init, s.update) if x is not None]
            out |= written_vars(header)
        for sub in _stmt_sub_bodies(s):
            if isinstance(s, For) and sub is not s.body:
                continue  # header already handled
            out |= written_vars(sub)
    return out


def _assigned_vars(body: list[Stmt]) -> set[str]:
    """Variable names written by assignment or ++/-- (declarations aside)."""
    out: set[str] = set()
    for s in body:
        if isinstance(s, Assign) and isinstance(s.target, VarRef):
            out.add(s.target.name)
        elif isinstance(s, IncDec) and isinstance(s.target, VarRef):
            out.add(s.target.name)
        elif isinstance(s, For):
            for header_stmt in (s.init, s.update):
                if header_stmt is not None:
                    out |= _assigned_vars([header_stmt])
        for sub in _stmt_sub_bodies(s):
            if isinstance(s, For) and sub is not s.body:
                continue  # header handled above
            out |= _assigned_vars(sub)
    return out


def local_int_constants(m) -> dict[str, int]:
    """Method-top locals declared with an int literal and never reassigned.

    These act as static loop bounds (``int limit = 2112;``).
    """
    from ..lang.ast import IntLit
    constants = {s.name: s.init.value for s in m.body
                 if isinstance(s, Decl) and isinstance(s.init, IntLit)}
    reassigned = _assigned_vars(m.body)
    return {k: v for k, v in constants.items() if k not in reassigned}
