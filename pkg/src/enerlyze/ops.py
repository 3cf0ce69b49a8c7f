"""Energy-operation taxonomy.

Every source construct that consumes energy is mapped to an operation kind
named ``<Category stem>_<operand type signature>`` (e.g. ``Addition_int_int``,
``Equal_Object_null``) or a bare stem when the operand type is implicit
(``Increment``, ``And``, ``MethodInvocation``).  The universe is the full
enumeration of realizable (category, signature) pairs over the language:

* arithmetic requires same-type operands (mixed -> explicit conversion),
* relational comparisons allow int/float mixing in either order,
* ``Equal`` is symmetric, so mixed signatures are canonicalized
  (``int_float``, ``Object_null``),
* one ``Parameter_<T>`` / ``Return_<T>`` per value type (plus ``Return_void``
  for explicit bare returns),
* one ``Library_<fn>`` per registered library function.

Counts and cost tables key operations by name; :data:`UNIVERSE` fixes the
canonical ordering used by dictionaries, design matrices and exports.
"""

from __future__ import annotations

from dataclasses import dataclass

SCALAR_TYPES = ("int", "float", "bool", "Object")
ARRAY_TYPES = ("int[]", "float[]", "char[]")
VALUE_TYPES = SCALAR_TYPES + ARRAY_TYPES

CATEGORIES = (
    "Arithmetic",
    "Boolean",
    "Comparison",
    "Bitwise",
    "Reference",
    "Function",
    "Control",
    "Assign",
    "Declaration",
    "Conversion",
    "Library",
)

#: Registered library functions; interpreter semantics live in ``interp``.
LIBRARY_FUNCTIONS = (
    "list_get",
    "list_size",
    "buffer_put",
    "buffer_bulk_put",
    "math_sqrt",
    "math_sin",
)


@dataclass(frozen=True)
class OperationKind:
    category: str
    name: str


def _enumerate_universe() -> tuple[OperationKind, ...]:
    ops: list[OperationKind] = []

    def add(category: str, name: str) -> None:
        ops.append(OperationKind(category, name))

    for stem in ("Addition", "Subtraction", "Multi", "Division"):
        for sig in ("int_int", "float_float"):
            add("Arithmetic", f"{stem}_{sig}")
    add("Arithmetic", "Increment")
    add("Arithmetic", "Decrement")

    for name in ("And", "Or", "Not"):
        add("Boolean", name)

    for stem in ("Less", "LessEq", "Greater", "GreaterEq"):
        for sig in ("int_int", "float_float", "int_float", "float_int"):
            add("Comparison", f"{stem}_{sig}")
    for sig in ("int_int", "float_float", "int_float", "bool_bool",
                "Object_Object", "Object_null"):
        add("Comparison", f"Equal_{sig}")

    for name in ("BitAnd", "BitOr", "SignedBitShiftLeft", "SignedBitShiftRight"):
        add("Bitwise", name)

    add("Reference", "ArrayReference")
    add("Reference", "FieldReference")

    add("Control", "MethodInvocation")
    for construct in ("if", "for", "while", "switch"):
        add("Control", f"BlockGoto_{construct}")

    for t in VALUE_TYPES:
        add("Function", f"Parameter_{t}")
    for t in VALUE_TYPES + ("void",):
        add("Function", f"Return_{t}")

    for sig in ("int_int", "float_float", "bool_bool", "Object_Object",
                "Object_null", "int[]_int[]", "float[]_float[]",
                "char[]_char[]"):
        add("Assign", f"Assign_{sig}")

    for t in VALUE_TYPES:
        add("Declaration", f"Declaration_{t}")

    add("Conversion", "Conversion_int_float")
    add("Conversion", "Conversion_float_int")

    for fn in LIBRARY_FUNCTIONS:
        add("Library", f"Library_{fn}")

    return tuple(ops)


UNIVERSE: tuple[OperationKind, ...] = _enumerate_universe()
OP_BY_NAME: dict[str, OperationKind] = {o.name: o for o in UNIVERSE}
OP_NAMES: tuple[str, ...] = tuple(o.name for o in UNIVERSE)
OP_INDEX: dict[str, int] = {name: i for i, name in enumerate(OP_NAMES)}


def category_of(op_name: str) -> str:
    return OP_BY_NAME[op_name].category


#: Reporting groups used by accounting tables.  Field references are grouped
#: with control operations; comparisons with booleans; bitwise and conversion
#: with arithmetic.
DISPLAY_GROUPS = ("Assign", "Declaration", "Control", "Array", "Function",
                  "Boolean", "Arithmetic", "Library")

_CATEGORY_TO_GROUP = {
    "Assign": "Assign",
    "Declaration": "Declaration",
    "Control": "Control",
    "Function": "Function",
    "Boolean": "Boolean",
    "Comparison": "Boolean",
    "Arithmetic": "Arithmetic",
    "Bitwise": "Arithmetic",
    "Conversion": "Arithmetic",
    "Library": "Library",
}


def display_group(op_name: str) -> str:
    """Reporting group for an operation (Assign/Control/.../Library)."""
    if op_name == "FieldReference":
        return "Control"
    if op_name == "ArrayReference":
        return "Array"
    return _CATEGORY_TO_GROUP[category_of(op_name)]


def equal_signature(left_ty: str, right_ty: str) -> str:
    """Canonical signature for the symmetric ``Equal`` comparison."""
    pair = (left_ty, right_ty)
    if pair in (("int", "float"), ("float", "int")):
        return "int_float"
    if pair in (("Object", "null"), ("null", "Object")):
        return "Object_null"
    if left_ty == "null" and right_ty == "null":
        return "Object_null"
    return f"{left_ty}_{right_ty}"


def assign_signature(target_ty: str, value_ty: str) -> str:
    if target_ty == "Object" and value_ty == "null":
        return "Object_null"
    return f"{target_ty}_{value_ty}"
