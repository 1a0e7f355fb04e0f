from .compiler import CompileContext, UnsupportedActionStep, compile_rule, compile_ruleset
from .interp import Frame, Interpreter, IrRuntimeError
from .isa import SIGNATURES, OpClass, arity, classify
from .program import (
    ArityMismatch,
    DuplicateLabel,
    Instruction,
    InvalidOperand,
    IrParseError,
    IrProgram,
    MissingSection,
    Section,
    UndefinedLabel,
    UnknownOpcode,
    parse,
    serialize,
)

__all__ = [
    "ArityMismatch",
    "CompileContext",
    "DuplicateLabel",
    "Frame",
    "Instruction",
    "Interpreter",
    "InvalidOperand",
    "IrParseError",
    "IrProgram",
    "IrRuntimeError",
    "MissingSection",
    "OpClass",
    "SIGNATURES",
    "Section",
    "UndefinedLabel",
    "UnknownOpcode",
    "UnsupportedActionStep",
    "arity",
    "classify",
    "compile_rule",
    "compile_ruleset",
    "parse",
    "serialize",
]
