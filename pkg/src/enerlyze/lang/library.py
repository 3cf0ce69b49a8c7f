"""Registry of library functions.

Library calls are atomic energy operations: one ``Library_<name>`` op per
call, regardless of element type.  ``pure`` marks functions that neither
write state nor emit observable output; the optimizer may hoist or
deduplicate those.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ast import Span
from .errors import CheckError

ARRAY_ELEM = {"int[]": "int", "float[]": "float", "char[]": "int"}


@dataclass(frozen=True)
class LibraryFunction:
    name: str
    arity: int
    pure: bool


REGISTRY: dict[str, LibraryFunction] = {
    fn.name: fn
    for fn in (
        LibraryFunction("list_get", 2, True),
        LibraryFunction("list_size", 1, True),
        LibraryFunction("buffer_put", 2, False),
        LibraryFunction("buffer_bulk_put", 2, False),
        LibraryFunction("math_sqrt", 1, True),
        LibraryFunction("math_sin", 1, True),
    )
}


def is_library(name: str) -> bool:
    return name in REGISTRY


def resolve_call(name: str, arg_types: list[str], span: Optional[Span]) -> str:
    """Type-check a library call; returns the result type.

    ``list_get``/``list_size``/``buffer_put``/``buffer_bulk_put`` are
    polymorphic over the array element type (char[] elements read and write
    as int code units).
    """
    fn = REGISTRY[name]
    if len(arg_types) != fn.arity:
        raise CheckError(f"{name} expects {fn.arity} argument(s), got "
                         f"{len(arg_types)}", span)

    def want_array(i: int) -> str:
        if arg_types[i] not in ARRAY_ELEM:
            raise CheckError(f"{name}: argument {i + 1} must be an array, got "
                             f"{arg_types[i]}", span)
        return arg_types[i]

    if name == "list_get":
        arr = want_array(0)
        if arg_types[1] != "int":
            raise CheckError("list_get: index must be int", span)
        return ARRAY_ELEM[arr]
    if name == "list_size":
        want_array(0)
        return "int"
    if name == "buffer_put":
        arr = want_array(0)
        if arg_types[1] != ARRAY_ELEM[arr]:
            raise CheckError(f"buffer_put: value must be {ARRAY_ELEM[arr]} for "
                             f"{arr} buffer", span)
        return "int"
    if name == "buffer_bulk_put":
        sink = want_array(0)
        src = want_array(1)
        if sink != src:
            raise CheckError("buffer_bulk_put: sink and source element types "
                             "must match", span)
        return "int"
    if name in ("math_sqrt", "math_sin"):
        if arg_types[0] != "float":
            raise CheckError(f"{name}: argument must be float", span)
        return "float"
    raise CheckError(f"unknown library function {name}", span)
