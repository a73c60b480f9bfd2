"""Exact solver for underdetermined linear ODEs in several unknown functions."""
from .coeffdomain import RatFunc, X, constant, given
from .diffop import DiffOp, FuncId, LinDiffExpr, StdOp
from .solution import ExplicitSolution, back_substitute, term_count, verify
from .solver import Session, SolverConfig, SolveResult, Uode, solve
from .systems import decouple
from .textio import parse, parse_ode

__version__ = "0.1.0"

__all__ = ["RatFunc", "X", "constant", "given", "DiffOp", "FuncId", "LinDiffExpr", "StdOp",
           "ExplicitSolution", "back_substitute", "term_count", "verify", "Session",
           "SolverConfig", "SolveResult", "Uode", "solve", "decouple", "parse", "parse_ode"]
