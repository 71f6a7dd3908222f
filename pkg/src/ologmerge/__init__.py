"""Spreadsheets as equational theories: lifting, checking, merging and data exchange."""

from .eqlogic import App, Equation, FuncSymbol, Lit, Null, Status, Theory, Var, ground_congruence
from .instance import Bounds, Inconsistent, Instance, InstanceModel, NonTermination, delta, saturate, sigma
from .integrate import HornRule, IntegrationProblem, SchemaDiagram, colimit_schemas, exchange, integrate
from .schema import Schema, SchemaMapping, VerificationCondition, check_vcs, generate_functoriality_vcs
from .sheetio import export_olog, import_olog, parse_workbook, print_workbook
from .syntax import load, parse_document
from .typeside import EXCEL, TypeSide
from .vcemit import ConsistencyReport, Verdict, consistency_check, emit_tptp

__version__ = "0.1.0"
