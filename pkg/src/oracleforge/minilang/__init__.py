"""MJ: a small typed Java-like language used as the program-under-test substrate."""
from .errors import MjError, MjTypeError, ParseError
from .interp import (
    ABSENT_METHOD,
    ARITY_MISMATCH,
    DEFAULT_STEP_LIMIT,
    DIV_BY_ZERO,
    STEP_LIMIT,
    EvalOutcome,
    Invocation,
    RuntimeFault,
    Value,
    Values,
    evaluate,
    outcomes_equal,
)
from .lexer import Token, format_num, tokenize
from .method import SourceMethod, is_compilable, parse_method, tokenize_with_statements
from .parser import parse_methods
from .printer import print_expr, print_method
from .typecheck import Signature, signature_of, typecheck

__all__ = [
    "ABSENT_METHOD", "ARITY_MISMATCH", "DEFAULT_STEP_LIMIT", "DIV_BY_ZERO", "STEP_LIMIT",
    "EvalOutcome", "Invocation", "MjError", "MjTypeError", "ParseError", "RuntimeFault",
    "Signature", "SourceMethod", "Token", "Value", "Values", "evaluate", "format_num",
    "is_compilable", "outcomes_equal", "parse_method", "parse_methods", "print_expr",
    "print_method", "signature_of", "tokenize", "tokenize_with_statements", "typecheck",
]
