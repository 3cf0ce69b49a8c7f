"""Semantics-preserving refactoring transforms.

Every transform takes a checked program, returns a fresh checked program
(the input is never mutated) and raises :class:`NotApplicable` when its
preconditions fail.  Preconditions are conservative static checks; the
optimization driver additionally gates every applied transform behind
differential equivalence testing.
"""

from __future__ import annotations

import copy
from typing import Callable, Optional

from ..lang.ast import (ArrayNew, Assign, Binary, BoolLit, Break, Call,
                        Convert, Decl, Expr, ExprStmt, FieldRef, FloatLit,
                        For, If, IncDec, Index, IntLit, MethodDecl, NullLit,
                        ObjectNew, Program, Return, Stmt, Switch, Unary,
                        VarRef, While)
from ..lang.checker import CheckedProgram, check
from .analysis import (EffectAnalysis, Effects, _assigned_vars,
                       effects_conflict, expr_free_vars, method_names_in_use)


class NotApplicable(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


# --- shared helpers ----------------------------------------------------------


def _recheck(program: Program) -> CheckedProgram:
    return check(program)


def _clone_method(checked: CheckedProgram, name: str
                  ) -> tuple[Program, MethodDecl]:
    if name not in checked.methods:
        raise NotApplicable(f"no method named {name!r}")
    program = copy.deepcopy(checked.program)
    return program, program.method(name)


def fresh_name(base: str, used: set[str]) -> str:
    if base not in used:
        used.add(base)
        return base
    n = 2
    while f"{base}{n}" in used:
        n += 1
    used.add(f"{base}{n}")
    return f"{base}{n}"


def total_statements(body: list[Stmt]) -> int:
    count = 0
    for s in body:
        count += 1
        if isinstance(s, If):
            count += total_statements(s.then_body)
            if s.else_body:
                count += total_statements(s.else_body)
        elif isinstance(s, (For, While)):
            count += total_statements(s.body)
        elif isinstance(s, Switch):
            for _, arm in s.arms:
                count += total_statements(arm)
            if s.default:
                count += total_statements(s.default)
    return count


def contains_exit(body: list[Stmt]) -> bool:
    for s in body:
        if isinstance(s, (Return, Break)):
            return True
        if isinstance(s, If):
            if contains_exit(s.then_body):
                return True
            if s.else_body and contains_exit(s.else_body):
                return True
        elif isinstance(s, (For, While)):
            # break inside a nested loop stays local; returns do not
            if _contains_return(s.body):
                return True
        elif isinstance(s, Switch):
            for _, arm in s.arms:
                if contains_exit(arm):
                    return True
            if s.default and contains_exit(s.default):
                return True
    return False


def _contains_return(body: list[Stmt]) -> bool:
    for s in body:
        if isinstance(s, Return):
            return True
        if isinstance(s, If):
            if _contains_return(s.then_body):
                return True
            if s.else_body and _contains_return(s.else_body):
                return True
        elif isinstance(s, (For, While)):
            if _contains_return(s.body):
                return True
        elif isinstance(s, Switch):
            for _, arm in s.arms:
                if _contains_return(arm):
                    return True
            if s.default and _contains_return(s.default):
                return True
    return False


ExprRewriter = Callable[[Expr], Optional[Expr]]


def rewrite_expr(e: Expr, fn: ExprRewriter) -> Expr:
    """Pre-order rewrite; fn returning a node replaces the subtree."""
    replaced = fn(e)
    if replaced is not None:
        return replaced
    if isinstance(e, (Unary, Convert)):
        e.operand = rewrite_expr(e.operand, fn)
    elif isinstance(e, Binary):
        e.left = rewrite_expr(e.left, fn)
        e.right = rewrite_expr(e.right, fn)
    elif isinstance(e, FieldRef):
        e.obj = rewrite_expr(e.obj, fn)
    elif isinstance(e, Index):
        e.arr = rewrite_expr(e.arr, fn)
        e.index = rewrite_expr(e.index, fn)
    elif isinstance(e, Call):
        e.args = [rewrite_expr(a, fn) for a in e.args]
    elif isinstance(e, ObjectNew):
        e.inits = [(n, rewrite_expr(v, fn)) for n, v in e.inits]
    elif isinstance(e, ArrayNew):
        e.size = rewrite_expr(e.size, fn)
    return e


def rewrite_body(body: list[Stmt], fn: ExprRewriter) -> None:
    """Apply an expression rewrite across a statement list, in place.

    Store-target roots are kept as lvalues; their sub-expressions (array
    index, receiver object) are rewritten."""
    for s in body:
        if isinstance(s, Decl):
            if s.init is not None:
                s.init = rewrite_expr(s.init, fn)
        elif isinstance(s, Assign):
            if isinstance(s.target, FieldRef):
                s.target.obj = rewrite_expr(s.target.obj, fn)
            elif isinstance(s.target, Index):
                s.target.arr = rewrite_expr(s.target.arr, fn)
                s.target.index = rewrite_expr(s.target.index, fn)
            s.value = rewrite_expr(s.value, fn)
        elif isinstance(s, IncDec):
            if isinstance(s.target, FieldRef):
                s.target.obj = rewrite_expr(s.target.obj, fn)
        elif isinstance(s, If):
            s.cond = rewrite_expr(s.cond, fn)
            rewrite_body(s.then_body, fn)
            if s.else_body:
                rewrite_body(s.else_body, fn)
        elif isinstance(s, For):
            if s.init is not None:
                rewrite_body([s.init], fn)
            s.cond = rewrite_expr(s.cond, fn)
            if s.update is not None:
                rewrite_body([s.update], fn)
            rewrite_body(s.body, fn)
        elif isinstance(s, While):
            s.cond = rewrite_expr(s.cond, fn)
            rewrite_body(s.body, fn)
        elif isinstance(s, Switch):
            s.subject = rewrite_expr(s.subject, fn)
            for _, arm in s.arms:
                rewrite_body(arm, fn)
            if s.default:
                rewrite_body(s.default, fn)
        elif isinstance(s, ExprStmt):
            s.call.args = [rewrite_expr(a, fn) for a in s.call.args]
        elif isinstance(s, Return):
            if s.value is not None:
                s.value = rewrite_expr(s.value, fn)


def body_exprs(body: list[Stmt]) -> list[Expr]:
    """Every expression position in a statement list (recursive)."""
    out: list[Expr] = []

    def collect(e: Optional[Expr]) -> None:
        if e is not None:
            out.append(e)

    for s in body:
        if isinstance(s, Decl):
            collect(s.init)
        elif isinstance(s, Assign):
            if isinstance(s.target, FieldRef):
                collect(s.target.obj)
            elif isinstance(s.target, Index):
                collect(s.target.arr)
                collect(s.target.index)
            collect(s.value)
        elif isinstance(s, IncDec):
            if isinstance(s.target, FieldRef):
                collect(s.target.obj)
        elif isinstance(s, If):
            collect(s.cond)
            out += body_exprs(s.then_body)
            if s.else_body:
                out += body_exprs(s.else_body)
        elif isinstance(s, For):
            if s.init is not None:
                out += body_exprs([s.init])
            collect(s.cond)
            if s.update is not None:
                out += body_exprs([s.update])
            out += body_exprs(s.body)
        elif isinstance(s, While):
            collect(s.cond)
            out += body_exprs(s.body)
        elif isinstance(s, Switch):
            collect(s.subject)
            for _, arm in s.arms:
                out += body_exprs(arm)
            if s.default:
                out += body_exprs(s.default)
        elif isinstance(s, ExprStmt):
            collect(s.call)
        elif isinstance(s, Return):
            collect(s.value)
    return out


def subexpressions(e: Expr) -> list[Expr]:
    out = [e]
    if isinstance(e, (Unary, Convert)):
        out += subexpressions(e.operand)
    elif isinstance(e, Binary):
        out += subexpressions(e.left) + subexpressions(e.right)
    elif isinstance(e, FieldRef):
        out += subexpressions(e.obj)
    elif isinstance(e, Index):
        out += subexpressions(e.arr) + subexpressions(e.index)
    elif isinstance(e, Call):
        for a in e.args:
            out += subexpressions(a)
    elif isinstance(e, ObjectNew):
        for _, v in e.inits:
            out += subexpressions(v)
    elif isinstance(e, ArrayNew):
        out += subexpressions(e.size)
    return out


def fold_expr(e: Expr) -> Expr:
    """Bottom-up compile-time evaluation of literal subexpressions.

    Int division by a zero literal and non-finite float results are left
    untouched so runtime behavior is preserved."""
    if isinstance(e, (Unary, Convert)):
        e.operand = fold_expr(e.operand)
    elif isinstance(e, Binary):
        e.left = fold_expr(e.left)
        e.right = fold_expr(e.right)
    elif isinstance(e, FieldRef):
        e.obj = fold_expr(e.obj)
        return e
    elif isinstance(e, Index):
        e.arr = fold_expr(e.arr)
        e.index = fold_expr(e.index)
        return e
    elif isinstance(e, Call):
        e.args = [fold_expr(a) for a in e.args]
        return e
    elif isinstance(e, ObjectNew):
        e.inits = [(n, fold_expr(v)) for n, v in e.inits]
        return e
    elif isinstance(e, ArrayNew):
        e.size = fold_expr(e.size)
        return e
    else:
        return e

    if isinstance(e, Unary) and isinstance(e.operand, BoolLit):
        return BoolLit(not e.operand.value)
    if isinstance(e, Convert):
        if e.target == "float" and isinstance(e.operand, IntLit):
            return FloatLit(float(e.operand.value))
        if e.target == "int" and isinstance(e.operand, FloatLit):
            return IntLit(int(e.operand.value))
        return e
    if not isinstance(e, Binary):
        return e
    left, right = e.left, e.right
    if isinstance(left, IntLit) and isinstance(right, IntLit):
        a, b = left.value, right.value
        if e.op == "+":
            return IntLit(a + b)
        if e.op == "-":
            return IntLit(a - b)
        if e.op == "*":
            return IntLit(a * b)
        if e.op == "/" and b != 0:
            q = abs(a) // abs(b)
            return IntLit(q if (a < 0) == (b < 0) else -q)
        if e.op == "&":
            return IntLit(a & b)
        if e.op == "|":
            return IntLit(a | b)
        if e.op in ("<<", ">>") and 0 <= b <= 63:
            return IntLit(a << b if e.op == "<<" else a >> b)
        if e.op in ("<", "<=", ">", ">=", "=="):
            return BoolLit(_compare(e.op, a, b))
    if isinstance(left, FloatLit) and isinstance(right, FloatLit):
        a, b = left.value, right.value
        if e.op in ("+", "-", "*", "/"):
            if e.op == "/" and b == 0.0:
                return e
            if e.op == "+":
                value = a + b
            elif e.op == "-":
                value = a - b
            elif e.op == "*":
                value = a * b
            else:
                value = a / b
            if value != value or value in (float("inf"), float("-inf")):
                return e
            return FloatLit(value)
        if e.op in ("<", "<=", ">", ">=", "=="):
            return BoolLit(_compare(e.op, a, b))
    if isinstance(left, BoolLit) and isinstance(right, BoolLit):
        if e.op == "&&":
            return BoolLit(left.value and right.value)
        if e.op == "||":
            return BoolLit(left.value or right.value)
        if e.op == "==":
            return BoolLit(left.value == right.value)
    # re-associate (x + a) + b -> x + (a+b) so unrolled offsets stay flat
    if (e.op == "+" and isinstance(right, IntLit)
            and isinstance(left, Binary) and left.op == "+"
            and isinstance(left.right, IntLit)):
        return fold_expr(Binary("+", left.left,
                                IntLit(left.right.value + right.value)))
    if e.op == "+" and isinstance(right, IntLit) and right.value == 0:
        return left
    return e


def _compare(op: str, a, b) -> bool:
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
            "==": a == b}[op]


# --- loop path resolution ------------------------------------------------------


def _kind_matches(kind: str, s: Stmt) -> bool:
    return ((kind == "for" and isinstance(s, For))
            or (kind == "while" and isinstance(s, While))
            or (kind == "if" and isinstance(s, If))
            or (kind == "switch" and isinstance(s, Switch)))


def resolve_loop(method: MethodDecl, path: str) -> tuple[list[Stmt], int, Stmt]:
    """Locate a loop by construct path (e.g. ``for_1`` or ``if_2.for_1``;
    arm selectors ``else`` / ``case_k`` / ``default`` may follow their
    construct).  Returns (enclosing statement list, index, loop node)."""
    body = method.body
    comps = path.split(".")
    i = 0
    while i < len(comps):
        kind, _, num = comps[i].partition("_")
        if kind not in ("if", "for", "while", "switch") or not num.isdigit():
            raise NotApplicable(f"bad path component {comps[i]!r}")
        want = int(num)
        found = None
        seen = 0
        for idx, s in enumerate(body):
            if _kind_matches(kind, s):
                seen += 1
                if seen == want:
                    found = (idx, s)
                    break
        if found is None:
            raise NotApplicable(f"no {comps[i]} under this path")
        idx, node = found
        if i == len(comps) - 1:
            if not isinstance(node, (For, While)):
                raise NotApplicable(f"{path} is not a loop")
            return body, idx, node
        nxt = comps[i + 1]
        if isinstance(node, If):
            if nxt == "else":
                if node.else_body is None:
                    raise NotApplicable("no else branch on this if")
                body = node.else_body
                i += 2
                continue
            body = node.then_body
        elif isinstance(node, (For, While)):
            body = node.body
        elif isinstance(node, Switch):
            if nxt.startswith("case_") and nxt[5:].isdigit():
                arm = int(nxt[5:]) - 1
                if arm >= len(node.arms):
                    raise NotApplicable(f"no {nxt} in this switch")
                body = node.arms[arm][1]
            elif nxt == "default":
                if node.default is None:
                    raise NotApplicable("no default arm in this switch")
                body = node.default
            else:
                raise NotApplicable(f"bad switch arm selector {nxt!r}")
            i += 2
            continue
        i += 1
    raise NotApplicable(f"could not resolve loop path {path!r}")


# --- if combination ---------------------------------------------------------


def apply_if_combination(checked: CheckedProgram,
                         method_name: str) -> CheckedProgram:
    """Merge ``if (P) {A}  S...  if (P) {B}`` into one conditional.

    Requires: both predicates structurally identical and pure; the
    intervening statements straight-line; neither the first branch nor the
    intervening statements may write anything the predicate reads.  The
    intervening statements are replicated into the else branch
    (``if (P) {A; S; B} else {S}``)."""
    program, method = _clone_method(checked, method_name)
    analysis = EffectAnalysis(_recheck(program))
    method = program.method(method_name)

    def try_body(body: list[Stmt]) -> bool:
        for i, first in enumerate(body):
            if not (isinstance(first, If) and first.else_body is None):
                continue
            for j in range(i + 1, len(body)):
                second = body[j]
                if isinstance(second, (For, While, Switch)):
                    break
                if isinstance(second, If):
                    if second.else_body is None and second.cond == first.cond:
                        between = body[i + 1:j]
                        if _combinable(first, between, analysis):
                            merged = If(
                                copy.deepcopy(first.cond),
                                first.then_body + between
                                + second.then_body,
                                copy.deepcopy(between),
                            )
                            body[i:j + 1] = [merged]
                            return True
                    break
                if isinstance(second, (Return, Break)):
                    break
        for s in body:
            for sub in _sub_bodies(s):
                if try_body(sub):
                    return True
        return False

    if not try_body(method.body):
        raise NotApplicable("no combinable if pair found")
    return _recheck(program)


def _combinable(first: If, between: list[Stmt],
                analysis: EffectAnalysis) -> bool:
    if not between:
        return True    # adjacent ifs: trivially combinable when P is stable
    pred_eff = analysis.expr(first.cond)
    if pred_eff.writes:
        return False   # impure predicate
    moved = Effects()
    for s in between:
        moved.update(analysis.stmt(s))
    branch = Effects()
    for s in first.then_body:
        branch.update(analysis.stmt(s))
    # the predicate must be stable across A and S
    stable = not effects_conflict(Effects(reads=pred_eff.reads),
                                  Effects(writes=moved.writes | branch.writes))
    return stable


def _sub_bodies(s: Stmt) -> list[list[Stmt]]:
    if isinstance(s, If):
        return [s.then_body] + ([s.else_body] if s.else_body else [])
    if isinstance(s, (For, While)):
        return [s.body]
    if isinstance(s, Switch):
        return [a for _, a in s.arms] + ([s.default] if s.default else [])
    return []


# --- method inline ------------------------------------------------------------


def apply_method_inline(checked: CheckedProgram, caller: str, callee: str,
                        size_limit: int = 30) -> CheckedProgram:
    """Inline calls to ``callee`` inside ``caller``.

    Two shapes are supported: a void callee without return statements
    (statement call sites are spliced, locals renamed, parameters bound by
    substitution or by temporaries when written/complex) and a field
    accessor (``T name(Object o) { return o.f; }``; expression call sites
    with variable arguments become direct field reads).  The callee's
    declaration is retained for other callers."""
    if callee not in checked.methods:
        raise NotApplicable(f"no method named {callee!r}")
    callee_decl = checked.method(callee)
    if _calls_reach(checked, callee, {callee}):
        raise NotApplicable(f"{callee} is recursive")
    if total_statements(callee_decl.body) > size_limit:
        raise NotApplicable(f"{callee} body exceeds the inline size limit")

    accessor = _accessor_expr(callee_decl)
    program, caller_decl = _clone_method(checked, caller)
    callee_body = copy.deepcopy(program.method(callee).body)
    used_names = method_names_in_use(caller_decl) | {p.name for p in
                                                     callee_decl.params}
    changed = 0

    if accessor is None:
        if callee_decl.ret != "void" or _contains_return(callee_decl.body):
            raise NotApplicable(f"{callee} is neither a returnless void "
                                "method nor a field accessor")
        changed += _splice_statement_calls(caller_decl.body, callee_decl,
                                           callee_body, used_names)
    else:
        changed += _inline_accessor_calls(caller_decl.body, callee,
                                          callee_decl, accessor)

    if not changed:
        raise NotApplicable(f"no inlinable call to {callee} in {caller}")
    return _recheck(program)


def _calls_reach(checked: CheckedProgram, name: str,
                 targets: set[str]) -> bool:
    """True when any call chain from ``name`` reaches one of ``targets``."""
    seen: set[str] = set()

    def walk(method: str) -> bool:
        if method in seen:
            return False
        seen.add(method)
        for e in body_exprs(checked.method(method).body):
            for sub in subexpressions(e):
                if isinstance(sub, Call) and not sub.is_library:
                    if sub.name in targets or walk(sub.name):
                        return True
        return False

    return walk(name)


def _accessor_expr(callee: MethodDecl) -> Optional[Expr]:
    """The returned expression of a field-accessor method, if it is one."""
    if callee.ret == "void" or len(callee.body) != 1:
        return None
    stmt = callee.body[0]
    if not isinstance(stmt, Return) or stmt.value is None:
        return None
    value = stmt.value
    if isinstance(value, (IntLit, FloatLit, BoolLit, NullLit)):
        return value
    if isinstance(value, VarRef):
        return value
    if isinstance(value, FieldRef) and isinstance(value.obj, VarRef):
        return value
    return None


def _splice_statement_calls(body: list[Stmt], callee: MethodDecl,
                            callee_body: list[Stmt],
                            used_names: set[str]) -> int:
    changed = 0
    i = 0
    while i < len(body):
        s = body[i]
        if (isinstance(s, ExprStmt) and not s.call.is_library
                and s.call.name == callee.name):
            splice = _bind_and_rename(callee, callee_body, s.call.args,
                                      used_names)
            body[i:i + 1] = splice
            changed += 1
            i += len(splice)
            continue
        for sub in _sub_bodies(s):
            changed += _splice_statement_calls(sub, callee, callee_body,
                                               used_names)
        i += 1
    return changed


def _bind_and_rename(callee: MethodDecl, callee_body: list[Stmt],
                     args: list[Expr], used_names: set[str]) -> list[Stmt]:
    from .analysis import declared_names
    body = copy.deepcopy(callee_body)
    written = _assigned_vars(body)
    rename: dict[str, Expr] = {}
    prologue: list[Stmt] = []
    for p, arg in zip(callee.params, args):
        simple = isinstance(arg, (VarRef, IntLit, FloatLit, BoolLit, NullLit))
        if simple and p.name not in written:
            rename[p.name] = copy.deepcopy(arg)
        else:
            tmp = fresh_name(f"{p.name}_arg", used_names)
            prologue.append(Decl(p.ty, tmp, copy.deepcopy(arg)))
            rename[p.name] = VarRef(tmp)
    for local in sorted(declared_names(body)):
        renamed = fresh_name(f"{local}_inl", used_names)
        rename[local] = VarRef(renamed)
        _rename_decl(body, local, renamed)

    def substitute(e: Expr) -> Optional[Expr]:
        if isinstance(e, VarRef) and e.name in rename:
            return copy.deepcopy(rename[e.name])
        return None

    rewrite_body(body, substitute)
    _rename_store_targets(body, rename)
    return prologue + body


def _rename_decl(body: list[Stmt], old: str, new: str) -> None:
    for s in body:
        if isinstance(s, Decl) and s.name == old:
            s.name = new
        if isinstance(s, For) and isinstance(s.init, Decl) \
                and s.init.name == old:
            s.init.name = new
        for sub in _sub_bodies(s):
            _rename_decl(sub, old, new)


def _rename_store_targets(body: list[Stmt], rename: dict[str, Expr]) -> None:
    for s in body:
        if isinstance(s, (Assign, IncDec)) and isinstance(s.target, VarRef):
            replacement = rename.get(s.target.name)
            if isinstance(replacement, VarRef):
                s.target.name = replacement.name
        if isinstance(s, Assign) and isinstance(s.target, Index) \
                and isinstance(s.target.arr, VarRef):
            replacement = rename.get(s.target.arr.name)
            if isinstance(replacement, VarRef):
                s.target.arr.name = replacement.name
        if isinstance(s, (Assign, IncDec)) and isinstance(s.target, FieldRef) \
                and isinstance(s.target.obj, VarRef):
            replacement = rename.get(s.target.obj.name)
            if isinstance(replacement, VarRef):
                s.target.obj.name = replacement.name
        if isinstance(s, For):
            for header_stmt in (s.init, s.update):
                if header_stmt is not None:
                    _rename_store_targets([header_stmt], rename)
        for sub in _sub_bodies(s):
            _rename_store_targets(sub, rename)


def _inline_accessor_calls(body: list[Stmt], callee: str,
                           callee_decl: MethodDecl, accessor: Expr) -> int:
    count = 0
    param_names = [p.name for p in callee_decl.params]

    def substitute(e: Expr) -> Optional[Expr]:
        nonlocal count
        if not (isinstance(e, Call) and not e.is_library and e.name == callee):
            return None
        if not all(isinstance(a, (VarRef, IntLit, FloatLit, BoolLit, NullLit))
                   for a in e.args):
            return None
        binding = dict(zip(param_names, e.args))
        result = copy.deepcopy(accessor)

        def bind(x: Expr) -> Optional[Expr]:
            if isinstance(x, VarRef) and x.name in binding:
                return copy.deepcopy(binding[x.name])
            return None

        count += 1
        return rewrite_expr(result, bind)

    rewrite_body(body, substitute)
    return count


# --- loop-invariant code motion --------------------------------------------------


def apply_loop_invariant_motion(checked: CheckedProgram, method_name: str,
                                loop_path: str) -> CheckedProgram:
    """Hoist pure loop-invariant expressions (and body-top declarations).

    Candidates must be pure per the effect analysis, must not allocate, and
    must not read anything the loop writes.  Each candidate becomes a fresh
    temporary declared before the loop; body-top declarations move out of
    the loop with their initializer left behind as a plain assignment."""
    program, method = _clone_method(checked, method_name)
    analysis = EffectAnalysis(_recheck(program))
    method = program.method(method_name)
    body_list, idx, loop = resolve_loop(method, loop_path)

    loop_eff = analysis.stmt(loop)
    used_names = method_names_in_use(method)

    candidates: list[Expr] = []

    def collect(e: Expr) -> None:
        if _invariant_candidate(e, loop_eff, analysis):
            if not any(e == c for c in candidates):
                candidates.append(e)
            return
        for child in _children(e):
            collect(child)

    scan_bodies: list[list[Stmt]] = [loop.body]
    collect(loop.cond)
    if isinstance(loop, For) and loop.update is not None:
        scan_bodies.append([loop.update])
    for scan in scan_bodies:
        for e in body_exprs(scan):
            collect(e)

    hoisted: list[Stmt] = []
    for e in candidates:
        temp = fresh_name("hoist", used_names)
        hoisted.append(Decl(e.ty or _expr_static_type(e), temp,
                            copy.deepcopy(e)))
        target = copy.deepcopy(e)

        def substitute(x: Expr, target=target, temp=temp) -> Optional[Expr]:
            if x == target:
                return VarRef(temp)
            return None

        loop.cond = rewrite_expr(loop.cond, substitute)
        if isinstance(loop, For) and loop.update is not None:
            rewrite_body([loop.update], substitute)
        rewrite_body(loop.body, substitute)

    moved_decls = _hoist_body_decls(loop, method, used_names)

    if not hoisted and not moved_decls:
        raise NotApplicable("no loop-invariant candidates in this loop")
    body_list[idx:idx] = hoisted + moved_decls
    return _recheck(program)


def _children(e: Expr) -> list[Expr]:
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


def _invariant_candidate(e: Expr, loop_eff: Effects,
                         analysis: EffectAnalysis) -> bool:
    # worth hoisting only if it does some work beyond naming a variable
    worthwhile = any(isinstance(sub, (Call, FieldRef, Index))
                     for sub in subexpressions(e))
    if not worthwhile:
        return False
    if analysis.expr_allocates(e):
        return False
    if e.ty in (None, "void", "null"):
        return False
    eff = analysis.expr(e)
    if eff.writes:
        return False
    return not effects_conflict(Effects(reads=eff.reads),
                                Effects(writes=loop_eff.writes))


def _expr_static_type(e: Expr) -> str:
    raise NotApplicable("cannot determine hoisted expression type")


def _hoist_body_decls(loop, method: MethodDecl,
                      used_names: set[str]) -> list[Stmt]:
    """Move body-top declarations out of the loop; the initializer stays
    behind as a plain assignment (so every iteration still writes before
    reading), which drops the per-iteration Declaration cost.  Only
    initialized declarations qualify."""
    moved: list[Stmt] = []
    replaced: list[tuple[int, Stmt]] = []
    for i, s in enumerate(loop.body):
        if not (isinstance(s, Decl) and s.init is not None):
            continue
        old = s.name
        name = old
        if _name_declared_elsewhere(method, s):
            name = fresh_name(f"{old}_out", used_names)

            def substitute(x: Expr, old=old, new=name) -> Optional[Expr]:
                if isinstance(x, VarRef) and x.name == old:
                    return VarRef(new)
                return None

            rewrite_body(loop.body, substitute)
            _rename_store_targets(loop.body, {old: VarRef(name)})
        else:
            used_names.add(name)
        moved.append(Decl(s.decl_ty, name, None))
        replaced.append((i, Assign(VarRef(name), s.init)))
    for i, follow in reversed(replaced):
        loop.body[i] = follow
    return moved


def _name_declared_elsewhere(method: MethodDecl, decl: Decl) -> bool:
    count = 0

    def scan(body: list[Stmt]) -> None:
        nonlocal count
        for s in body:
            if isinstance(s, Decl) and s.name == decl.name:
                count += 1
            if isinstance(s, For) and isinstance(s.init, Decl) \
                    and s.init.name == decl.name:
                count += 1
            for sub in _sub_bodies(s):
                scan(sub)

    scan(method.body)
    return count > 1 or decl.name in {p.name for p in method.params}


# --- loop unrolling -----------------------------------------------------------


def apply_loop_unroll(checked: CheckedProgram, method_name: str,
                      loop_path: str, factor: int) -> CheckedProgram:
    """Replicate a counted loop body ``factor`` times with index offsets.

    The loop must have the shape ``for (i = C0; i < N; i = i + s)`` with a
    literal (or local literal-constant) bound, the body must not write the
    induction variable, declare locals, or contain break/return, and the
    iteration count must divide exactly by the factor (no epilogue)."""
    if factor < 2:
        raise NotApplicable("unroll factor must be at least 2")
    program, method = _clone_method(checked, method_name)
    body_list, idx, loop = resolve_loop(method, loop_path)
    if not isinstance(loop, For):
        raise NotApplicable("only for loops can be unrolled")

    shape = _counted_loop_shape(loop, method)
    if shape is None:
        raise NotApplicable("loop is not a literal-bounded counted loop")
    var, start, bound, stride = shape
    if contains_exit(loop.body):
        raise NotApplicable("loop body contains break or return")
    if var in _assigned_vars(loop.body):
        raise NotApplicable("loop body writes the induction variable")
    if any(isinstance(s, Decl) for s in loop.body):
        raise NotApplicable("loop body declares locals; hoist them first")

    span = bound - start
    if span <= 0 or span % stride != 0:
        raise NotApplicable("iteration count is not exact for this stride")
    trips = span // stride
    if trips % factor != 0:
        raise NotApplicable(f"{factor}*{stride} does not divide the trip "
                            f"count {trips}")

    template = copy.deepcopy(loop.body)
    new_body: list[Stmt] = []
    for k in range(factor):
        replica = copy.deepcopy(template)
        if k > 0:
            offset = stride * k

            def shift(e: Expr, var=var, offset=offset) -> Optional[Expr]:
                if isinstance(e, VarRef) and e.name == var:
                    return Binary("+", VarRef(var), IntLit(offset))
                return None

            rewrite_body(replica, shift)
            _fold_body(replica)
        new_body.extend(replica)
    loop.body = new_body
    loop.update = Assign(VarRef(var),
                         Binary("+", VarRef(var), IntLit(stride * factor)))
    return _recheck(program)


def _counted_loop_shape(loop: For, method: MethodDecl
                        ) -> Optional[tuple[str, int, int, int]]:
    """(var, start, bound, stride) for ``for (i = C0; i < N; i = i + s)``."""
    from .analysis import local_int_constants
    if loop.init is None:
        return None
    if isinstance(loop.init, Decl) and isinstance(loop.init.init, IntLit):
        var, start = loop.init.name, loop.init.init.value
    elif isinstance(loop.init, Assign) and isinstance(loop.init.target, VarRef) \
            and isinstance(loop.init.value, IntLit):
        var, start = loop.init.target.name, loop.init.value.value
    else:
        return None
    cond = loop.cond
    if not (isinstance(cond, Binary) and cond.op == "<"
            and isinstance(cond.left, VarRef) and cond.left.name == var):
        return None
    if isinstance(cond.right, IntLit):
        bound = cond.right.value
    elif isinstance(cond.right, VarRef):
        constants = local_int_constants(method)
        if cond.right.name not in constants:
            return None
        bound = constants[cond.right.name]
    else:
        return None
    update = loop.update
    if isinstance(update, IncDec) and isinstance(update.target, VarRef) \
            and update.target.name == var and update.op == "++":
        stride = 1
    elif (isinstance(update, Assign) and isinstance(update.target, VarRef)
          and update.target.name == var
          and isinstance(update.value, Binary) and update.value.op == "+"
          and isinstance(update.value.left, VarRef)
          and update.value.left.name == var
          and isinstance(update.value.right, IntLit)
          and update.value.right.value >= 1):
        stride = update.value.right.value
    else:
        return None
    return var, start, bound, stride


def _fold_body(body: list[Stmt]) -> None:
    for s in body:
        if isinstance(s, Decl) and s.init is not None:
            s.init = fold_expr(s.init)
        elif isinstance(s, Assign):
            if isinstance(s.target, Index):
                s.target.index = fold_expr(s.target.index)
            s.value = fold_expr(s.value)
        elif isinstance(s, ExprStmt):
            s.call.args = [fold_expr(a) for a in s.call.args]
        elif isinstance(s, If):
            s.cond = fold_expr(s.cond)
            _fold_body(s.then_body)
            if s.else_body:
                _fold_body(s.else_body)
        elif isinstance(s, (For, While)):
            s.cond = fold_expr(s.cond)
            _fold_body(s.body)
        elif isinstance(s, Switch):
            s.subject = fold_expr(s.subject)
            for _, arm in s.arms:
                _fold_body(arm)
            if s.default:
                _fold_body(s.default)
        elif isinstance(s, Return) and s.value is not None:
            s.value = fold_expr(s.value)


# --- library replacement -----------------------------------------------------------


def apply_library_replacement(checked: CheckedProgram, method_name: str,
                              loop_path: str) -> CheckedProgram:
    """Replace an element-by-element copy loop with one bulk library call.

    Recognized pattern: ``for (i = 0; i < LIM; i = i + s)`` whose body is
    exactly ``buffer_put(SINK, list_get(SRC, i + k))`` for k = 0..s-1 in
    order, with structurally identical pure SINK/SRC.  LIM must be the
    source length (``list_size(SRC)``) or a literal/local constant; in the
    literal case full-range coverage is confirmed by the differential
    equivalence gate rather than statically."""
    program, method = _clone_method(checked, method_name)
    analysis = EffectAnalysis(_recheck(program))
    method = program.method(method_name)
    body_list, idx, loop = resolve_loop(method, loop_path)
    if not isinstance(loop, For):
        raise NotApplicable("only for loops match the copy pattern")

    shape = _counted_loop_shape(loop, method)
    bound_is_size_of: Optional[Expr] = None
    if shape is None:
        # allow `i < list_size(SRC)` bounds, which the shape helper rejects
        partial = _copy_loop_header(loop)
        if partial is None:
            raise NotApplicable("loop header does not match the copy pattern")
        var, start, stride, bound_expr = partial
        if not (isinstance(bound_expr, Call) and bound_expr.is_library
                and bound_expr.name == "list_size"):
            raise NotApplicable("loop bound is neither constant nor "
                                "list_size(source)")
        bound_is_size_of = bound_expr.args[0]
    else:
        var, start, _, stride = shape
    if start != 0:
        raise NotApplicable("copy loop must start at index 0")

    if len(loop.body) != stride:
        raise NotApplicable("body statement count does not match the stride")
    sink = src = None
    for k, s in enumerate(loop.body):
        step = _copy_step(s, var, k)
        if step is None:
            raise NotApplicable(f"statement {k + 1} is not a unit copy step")
        step_sink, step_src = step
        if sink is None:
            sink, src = step_sink, step_src
        elif not (sink == step_sink and src == step_src):
            raise NotApplicable("copy steps disagree on source or sink")
    if not analysis.expr_pure(sink) or not analysis.expr_pure(src):
        raise NotApplicable("source or sink expression is impure")
    if bound_is_size_of is not None and bound_is_size_of != src:
        raise NotApplicable("loop bound measures a different array than the "
                            "copy source")

    call = Call("buffer_bulk_put", [copy.deepcopy(sink), copy.deepcopy(src)])
    body_list[idx] = ExprStmt(call)
    return _recheck(program)


def _copy_loop_header(loop: For) -> Optional[tuple[str, int, int, Expr]]:
    if loop.init is None:
        return None
    if isinstance(loop.init, Decl) and isinstance(loop.init.init, IntLit):
        var, start = loop.init.name, loop.init.init.value
    elif isinstance(loop.init, Assign) and isinstance(loop.init.target, VarRef) \
            and isinstance(loop.init.value, IntLit):
        var, start = loop.init.target.name, loop.init.value.value
    else:
        return None
    cond = loop.cond
    if not (isinstance(cond, Binary) and cond.op == "<"
            and isinstance(cond.left, VarRef) and cond.left.name == var):
        return None
    update = loop.update
    if isinstance(update, IncDec) and update.op == "++" \
            and isinstance(update.target, VarRef) \
            and update.target.name == var:
        stride = 1
    elif (isinstance(update, Assign) and isinstance(update.target, VarRef)
          and update.target.name == var
          and isinstance(update.value, Binary) and update.value.op == "+"
          and isinstance(update.value.left, VarRef)
          and update.value.left.name == var
          and isinstance(update.value.right, IntLit)):
        stride = update.value.right.value
    else:
        return None
    return var, start, stride, cond.right


def _copy_step(s: Stmt, var: str, offset: int) -> Optional[tuple[Expr, Expr]]:
    if not (isinstance(s, ExprStmt) and s.call.is_library
            and s.call.name == "buffer_put" and len(s.call.args) == 2):
        return None
    sink, value = s.call.args
    if not (isinstance(value, Call) and value.is_library
            and value.name == "list_get" and len(value.args) == 2):
        return None
    src, index = value.args
    if offset == 0:
        ok = isinstance(index, VarRef) and index.name == var
    else:
        ok = (isinstance(index, Binary) and index.op == "+"
              and isinstance(index.left, VarRef) and index.left.name == var
              and isinstance(index.right, IntLit)
              and index.right.value == offset)
    return (sink, src) if ok else None


# --- constant folding / propagation ------------------------------------------------


def apply_constant_fold_propagate(checked: CheckedProgram,
                                  method_name: str) -> CheckedProgram:
    """Propagate literal-initialized constants and fold literal arithmetic."""
    from .analysis import local_int_constants
    program, method = _clone_method(checked, method_name)
    before = copy.deepcopy(method.body)

    constants = local_int_constants(method)
    if constants:
        def substitute(e: Expr) -> Optional[Expr]:
            if isinstance(e, VarRef) and e.name in constants:
                return IntLit(constants[e.name])
            return None
        rewrite_body(method.body, substitute)
    _fold_body(method.body)

    if method.body == before:
        raise NotApplicable("nothing to fold or propagate")
    return _recheck(program)


# --- common subexpression elimination ------------------------------------------------


def apply_cse(checked: CheckedProgram, method_name: str,
              cost_uJ: Optional[dict[str, float]] = None) -> CheckedProgram:
    """Bind repeated pure subexpressions in a statement list to a temporary.

    Profitability gate (when costs are provided): the modeled saving of
    removing (n-1) evaluations must exceed the declaration-plus-assignment
    overhead of the temporary, otherwise the list is left alone."""
    from ..blocks import expr_ops
    program, method = _clone_method(checked, method_name)
    checked_view = _recheck(program)
    analysis = EffectAnalysis(checked_view)
    method = program.method(method_name)
    used_names = method_names_in_use(method)
    changed = 0

    def op_cost(e: Expr) -> float:
        names = expr_ops(e, checked_view)
        if cost_uJ is None:
            return float(len(names))
        return sum(cost_uJ.get(n, 0.0) for n in names)

    def process(body: list[Stmt]) -> None:
        nonlocal changed
        list_eff = Effects()
        for s in body:
            list_eff.update(analysis.stmt(s))
        counts: dict[int, tuple[Expr, int]] = {}
        order: list[Expr] = []
        for e in body_exprs(body):
            for sub in subexpressions(e):
                if not isinstance(sub, Binary):
                    continue
                if sub.ty in (None, "void", "null", "bool"):
                    continue
                eff = analysis.expr(sub)
                if eff.writes:
                    continue
                if effects_conflict(Effects(reads=eff.reads),
                                    Effects(writes=list_eff.writes)):
                    continue
                if analysis.expr_allocates(sub):
                    continue
                for known in order:
                    if known == sub:
                        counts[id(known)] = (known, counts[id(known)][1] + 1)
                        break
                else:
                    order.append(sub)
                    counts[id(sub)] = (sub, 1)
        for candidate, n in (counts[id(e)] for e in order):
            if n < 2:
                continue
            saving = (n - 1) * op_cost(candidate)
            if cost_uJ is not None:
                decl_cost = (cost_uJ.get(f"Declaration_{candidate.ty}", 0.0)
                             + cost_uJ.get(
                                 f"Assign_{candidate.ty}_{candidate.ty}", 0.0))
                if saving <= decl_cost:
                    continue
            temp = fresh_name("common", used_names)
            target = copy.deepcopy(candidate)
            first = _first_use_index(body, target)
            if first is None:
                continue

            def substitute(x: Expr, target=target,
                           temp=temp) -> Optional[Expr]:
                if x == target:
                    return VarRef(temp)
                return None

            tail = body[first:]
            rewrite_body(tail, substitute)
            body[first:first] = [Decl(candidate.ty, temp, candidate)]
            changed += 1

        for s in body:
            for sub in _sub_bodies(s):
                process(sub)

    process(method.body)
    if not changed:
        raise NotApplicable("no profitable common subexpression")
    return _recheck(program)


def _first_use_index(body: list[Stmt], target: Expr) -> Optional[int]:
    for i, s in enumerate(body):
        for e in body_exprs([s]):
            if any(sub == target for sub in subexpressions(e)):
                return i
    return None
