"""Workbooks in categorical normal form, and their translation to and from ologs.

Text format (UTF-8, LF newlines)::

    workbook Example
    table Person
    id | Age : Integer | Boss -> Person
    p1 | 20           | p1
    p2 | ={Integer!x} | p1

    table Integer
    id
    x

    table IntegerEqs
    id | eq : Bool
    e1 | =({Integer!x} + 1 = 21)

Each table starts with ``table <name>`` and a header row. The first header
cell names the primary-key column. Other header cells are ``Name : Type``
(data) or ``Name -> Table`` (foreign key). A data header may carry a column
formula, ``Name : Float =[a] * [b]``, which is how formulas on empty tables
are recorded. Cells are ``|``-separated. A data cell is a literal (exact
decimal, ``true``/``false``, or text, quoted ``'...'`` when needed), a
formula starting with ``=``, or blank. Foreign-key cells hold row ids and
may not be blank.

Formulas use ``[Col]`` for a column of the same row and ``[Fk].[Col]`` for
lookups along foreign keys, ``@`` for the row itself, ``{Type!name}`` for a
cell of a type table, ``+ - *``, ``MAX``/``MIN``, typeside functions, and
``LOOKUP([Fk], $[Table].[id], $[Table].[Col])`` for absolute-range lookups.
A top-level comparison ``=(a = b)`` makes a boolean witness column.

A table named after a type (``Integer``) with only an id column lists that
type's labelled nulls; a table ``<Type>Eqs`` with one boolean column lists
ground equations among them.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Union

from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError

from .eqlogic import (
    App,
    Equation,
    FuncSymbol,
    Lit,
    Null,
    OlogError,
    Term,
    Var,
    nulls_of,
    show_number,
    term_sort,
)
from .instance import Instance, InstanceModel, gen_term
from .schema import Schema, split_definitional
from .syntax import _Elab
from .typeside import BOOL, EXCEL, INTEGER, NUMERIC, STRING, TypeSide


class NormalFormViolation(OlogError):
    """A workbook is not in categorical normal form; carries located diagnostics."""

    def __init__(self, diagnostics: list["Diagnostic"]) -> None:
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class DanglingForeignKey(NormalFormViolation):
    pass


class DuplicateRowId(NormalFormViolation):
    pass


class MalformedFormula(NormalFormViolation):
    pass


class MixedFormulaColumn(UserWarning):
    """Some rows of a column share a formula and others differ; imported as data."""


class AmbiguousLookup(UserWarning):
    """A LOOKUP range does not match the foreign key it is keyed on."""


@dataclass(frozen=True)
class Diagnostic:
    line: int
    kind: type
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


# ---------------------------------------------------------------------------
# formulas

FORMULA_GRAMMAR = r"""
start: "=" expr
?expr: sum
     | sum "=" sum -> cmp
?sum: product
    | sum "+" product -> add
    | sum "-" product -> sub
?product: unary
    | product "*" unary -> mul
?unary: atom
    | "-" unary -> neg
?atom: NUMBER -> number
     | SQSTRING -> string
     | "true" -> true
     | "false" -> false
     | "@" -> self_
     | NULLREF -> nullref
     | ref
     | "LOOKUP" "(" ref "," absref "," absref ")" -> lookup
     | FNAME "(" expr ("," expr)* ")" -> call
     | "(" expr ")"
ref: SEG ("." SEG)*
absref: "$" SEG "." SEG
SEG: /\[[^\]\n]+\]/
NULLREF: /\{[^}!\n]+![^}\n]+\}/
FNAME: /[A-Za-z_][A-Za-z0-9_]*/
SQSTRING: /'([^']|'')*'/
NUMBER: /\d+(\.\d*)?|\.\d+/
%ignore /[ \t]+/
"""

_FORMULA = Lark(FORMULA_GRAMMAR, parser="lalr")


# formula ASTs extend the raw terms of ``syntax``:
# ("ref", segs) ("self",) ("null", type, name) ("cmp", a, b)
# ("lookup", key_segs, table, pk, col)
@v_args(inline=True)
class _ToAst(Transformer):
    def start(self, e):
        return e

    def number(self, tok):
        return ("num", show_number(Fraction(str(tok))))

    def string(self, tok):
        return ("str", str(tok)[1:-1].replace("''", "'"))

    def true(self):
        return ("bool", True)

    def false(self):
        return ("bool", False)

    def self_(self):
        return ("self",)

    def nullref(self, tok):
        t, n = str(tok)[1:-1].split("!", 1)
        return ("null", t.strip(), n.strip())

    def ref(self, *segs):
        return ("ref", tuple(str(s)[1:-1].strip() for s in segs))

    def absref(self, t, c):
        return (str(t)[1:-1].strip(), str(c)[1:-1].strip())

    def lookup(self, key, rng1, rng2):
        return ("lookup", key[1], rng1[0], rng1[1], rng2)

    def call(self, name, *args):
        return ("call", str(name), tuple(args))

    def add(self, a, b):
        return ("op", "+", a, b)

    def sub(self, a, b):
        return ("op", "-", a, b)

    def mul(self, a, b):
        return ("op", "*", a, b)

    def neg(self, a):
        return ("neg", a)

    def cmp(self, a, b):
        return ("cmp", a, b)


def parse_formula(text: str) -> tuple:
    return _ToAst().transform(_FORMULA.parse(text))


_PREC = {"+": 1, "-": 1, "*": 2}


def show_formula(a: tuple, prec: int = 0) -> str:
    k = a[0]
    if k == "num":
        return a[1]
    if k == "str":
        return "'" + a[1].replace("'", "''") + "'"
    if k == "bool":
        return "true" if a[1] else "false"
    if k == "self":
        return "@"
    if k == "null":
        return "{" + a[1] + "!" + a[2] + "}"
    if k == "ref":
        return ".".join(f"[{s}]" for s in a[1])
    if k == "lookup":
        key = ".".join(f"[{s}]" for s in a[1])
        t, pk, rng = a[2], a[3], a[4]
        return f"LOOKUP({key}, $[{t}].[{pk}], $[{rng[0]}].[{rng[1]}])"
    if k == "call":
        return f"{a[1]}({', '.join(show_formula(x) for x in a[2])})"
    if k == "neg":
        return "-" + show_formula(a[1], 3)
    if k == "cmp":
        return f"({show_formula(a[1])} = {show_formula(a[2])})"
    if k == "op":
        p = _PREC[a[1]]
        text = f"{show_formula(a[2], p)} {a[1]} {show_formula(a[3], p + 1)}"
        return f"({text})" if p < prec else text
    raise ValueError(f"unknown formula node {a!r}")


def is_relative(a: tuple) -> bool:
    """True when the formula reads the row it sits on."""
    k = a[0]
    if k in ("ref", "self", "lookup"):
        return True
    if k == "call":
        return any(is_relative(x) for x in a[2])
    if k in ("op",):
        return is_relative(a[2]) or is_relative(a[3])
    if k == "neg":
        return is_relative(a[1])
    if k == "cmp":
        return is_relative(a[1]) or is_relative(a[2])
    return False


def _walk(a: tuple):
    yield a
    k = a[0]
    if k == "call":
        for x in a[2]:
            yield from _walk(x)
    elif k == "op":
        yield from _walk(a[2])
        yield from _walk(a[3])
    elif k == "neg":
        yield from _walk(a[1])
    elif k == "cmp":
        yield from _walk(a[1])
        yield from _walk(a[2])


@dataclass(frozen=True)
class Formula:
    ast: tuple

    @classmethod
    def parse(cls, text: str) -> "Formula":
        return cls(parse_formula(text))

    @property
    def relative(self) -> bool:
        return is_relative(self.ast)

    @property
    def is_comparison(self) -> bool:
        return self.ast[0] == "cmp"

    def __str__(self) -> str:
        return "=" + show_formula(self.ast)


Cell = Union[None, Fraction, str, bool, Formula]


# ---------------------------------------------------------------------------
# workbook structure


@dataclass(frozen=True)
class Column:
    name: str
    target: Optional[str] = None
    type: Optional[str] = None
    formula: Optional[Formula] = None

    @property
    def is_fk(self) -> bool:
        return self.target is not None

    def header(self) -> str:
        if self.is_fk:
            return f"{self.name} -> {self.target}"
        text = f"{self.name} : {self.type}"
        return f"{text} {self.formula}" if self.formula else text


@dataclass
class Table:
    name: str
    pk: str
    columns: list[Column]
    rows: list[tuple[str, list[Cell]]] = field(default_factory=list)
    line: int = 0
    row_lines: list[int] = field(default_factory=list)

    def column(self, name: str) -> Optional[Column]:
        for c in self.columns:
            if c.name == name:
                return c
        return None

    def index(self, name: str) -> int:
        return [c.name for c in self.columns].index(name)

    def row_ids(self) -> list[str]:
        return [r for r, _ in self.rows]

    def cells(self, column: str) -> list[Cell]:
        i = self.index(column)
        return [cells[i] for _, cells in self.rows]


@dataclass
class Workbook:
    name: str
    tables: list[Table]
    typeside: TypeSide = EXCEL

    def table(self, name: str) -> Optional[Table]:
        for t in self.tables:
            if t.name == name:
                return t
        return None

    def kind(self, t: Table) -> str:
        """``entity``, ``type`` (a list of nulls) or ``equations`` (ground type equations)."""
        types = self.typeside.types
        if t.name in types and not t.columns:
            return "type"
        if (
            t.name.endswith("Eqs")
            and t.name[:-3] in types
            and len(t.columns) == 1
            and t.columns[0].type == BOOL
        ):
            return "equations"
        return "entity"

    def entity_tables(self) -> list[Table]:
        return [t for t in self.tables if self.kind(t) == "entity"]

    def __str__(self) -> str:
        return print_workbook(self)


# ---------------------------------------------------------------------------
# printing


def _show_cell(c: Cell, col: Column) -> str:
    if c is None:
        return ""
    if isinstance(c, Formula):
        return str(c)
    if isinstance(c, bool):
        return "true" if c else "false"
    if isinstance(c, Fraction):
        return show_number(c)
    if col.is_fk:
        return c
    if c == "" or c != c.strip() or c[0] in "='#" or "|" in c or "\n" in c or c in ("true", "false"):
        return "'" + c.replace("'", "''") + "'"
    return c


def print_workbook(w: Workbook) -> str:
    out = [f"workbook {w.name}"]
    for t in w.tables:
        out.append("")
        out.append(f"table {t.name}")
        out.append(" | ".join([t.pk] + [c.header() for c in t.columns]))
        for rid, cells in t.rows:
            out.append(" | ".join([rid] + [_show_cell(x, c) for x, c in zip(cells, t.columns)]).rstrip())
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# parsing

_DATA_HEADER = re.compile(r"^(?P<name>.+?)\s*:\s*(?P<type>[A-Za-z_]\w*)\s*(?P<formula>=.*)?$")
_FK_HEADER = re.compile(r"^(?P<name>.+?)\s*->\s*(?P<target>.+?)$")


def _split_row(line: str) -> list[str]:
    """Split on ``|`` outside quoted text and formula brackets."""
    cells, i, n = [], 0, len(line)
    while True:
        while i < n and line[i] in " \t":
            i += 1
        start = i
        if i < n and line[i] == "'":
            i += 1
            while i < n:
                if line[i] == "'" and i + 1 < n and line[i + 1] == "'":
                    i += 2
                elif line[i] == "'":
                    i += 1
                    break
                else:
                    i += 1
            while i < n and line[i] != "|":
                i += 1
        elif i < n and line[i] == "=":
            quote = depth = 0
            while i < n and not (line[i] == "|" and not quote and not depth):
                ch = line[i]
                if ch == "'":
                    quote ^= 1
                elif not quote and ch in "[{":
                    depth += 1
                elif not quote and ch in "]}":
                    depth -= 1
                i += 1
        else:
            while i < n and line[i] != "|":
                i += 1
        cells.append(line[start:i].strip())
        if i >= n:
            return cells
        i += 1


def _parse_value(text: str, col: Column) -> Cell:
    if text == "":
        return None
    if text.startswith("="):
        return Formula.parse(text)
    if col.type == STRING:
        if text.startswith("'"):
            if len(text) < 2 or not text.endswith("'"):
                raise ValueError(f"unterminated string {text!r}")
            return text[1:-1].replace("''", "'")
        return text
    if col.type == BOOL:
        if text not in ("true", "false"):
            raise ValueError(f"{text!r} is not a boolean")
        return text == "true"
    if col.type in NUMERIC:
        try:
            v = Fraction(text)
        except ValueError:
            raise ValueError(f"{text!r} is not a number") from None
        if col.type == INTEGER and v.denominator != 1:
            raise ValueError(f"{text!r} is not an integer")
        return v
    raise ValueError(f"column {col.name} has unknown type {col.type}")


def _parse_header(cells: list[str], types, line: int, diags: list[Diagnostic]) -> tuple[str, list[Column]]:
    cols = []
    for h in cells[1:]:
        m = _DATA_HEADER.match(h)
        if m and m["type"] in types:
            f = None
            if m["formula"]:
                try:
                    f = Formula.parse(m["formula"])
                except LarkError as exc:
                    diags.append(Diagnostic(line, MalformedFormula, f"header {h!r}: {exc}"))
            cols.append(Column(m["name"], type=m["type"], formula=f))
            continue
        m = _FK_HEADER.match(h)
        if m:
            cols.append(Column(m["name"], target=m["target"]))
            continue
        diags.append(Diagnostic(line, NormalFormViolation, f"column {h!r} is neither `Name : Type` nor `Name -> Table`"))
    return cells[0], cols


def parse_workbook(text: str, typeside: TypeSide = EXCEL) -> Workbook:
    """Parse and validate a workbook; all normal-form violations are reported together."""
    diags: list[Diagnostic] = []
    name = "Workbook"
    tables: list[Table] = []
    cur: Optional[Table] = None
    expect_header = False
    types = typeside.types
    for no, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("workbook ") and not tables:
            name = line[len("workbook "):].strip()
            continue
        if line.startswith("table "):
            cur = Table(line[len("table "):].strip(), "id", [], line=no)
            tables.append(cur)
            expect_header = True
            continue
        if cur is None:
            diags.append(Diagnostic(no, NormalFormViolation, "content outside of a table"))
            continue
        if expect_header:
            cur.pk, cur.columns = _parse_header([c.strip() for c in line.split("|")], types, no, diags)
            expect_header = False
            continue
        cells = _split_row(line)
        if len(cells) < len(cur.columns) + 1:
            cells += [""] * (len(cur.columns) + 1 - len(cells))
        if len(cells) != len(cur.columns) + 1:
            diags.append(
                Diagnostic(no, NormalFormViolation, f"table {cur.name}: {len(cells)} cells for {len(cur.columns) + 1} columns")
            )
            continue
        rid, values = cells[0], []
        if not rid:
            diags.append(Diagnostic(no, NormalFormViolation, f"table {cur.name}: blank row id"))
            continue
        for text_cell, col in zip(cells[1:], cur.columns):
            if col.is_fk:
                values.append(text_cell or None)
                continue
            try:
                values.append(_parse_value(text_cell, col))
            except LarkError as exc:
                diags.append(Diagnostic(no, MalformedFormula, f"{cur.name}.{col.name}: {exc}".splitlines()[0]))
                values.append(None)
            except ValueError as exc:
                diags.append(Diagnostic(no, NormalFormViolation, f"{cur.name}.{col.name}: {exc}"))
                values.append(None)
        cur.rows.append((rid, values))
        cur.row_lines.append(no)
    w = Workbook(name, tables, typeside)
    diags += _validate(w)
    if diags:
        diags.sort(key=lambda d: d.line)
        raise diags[0].kind(diags)
    return w


def _validate(w: Workbook) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    names = [t.name for t in w.tables]
    for t in w.tables:
        if names.count(t.name) > 1:
            diags.append(Diagnostic(t.line, NormalFormViolation, f"table {t.name} declared twice"))
        cols = [c.name for c in t.columns]
        for c in set(cols):
            if cols.count(c) > 1:
                diags.append(Diagnostic(t.line, NormalFormViolation, f"table {t.name}: column {c} declared twice"))
        kind = w.kind(t)
        if kind == "entity" and t.name in w.typeside.types:
            diags.append(Diagnostic(t.line, NormalFormViolation, f"type table {t.name} may only have an id column"))
        seen: dict[str, int] = {}
        for (rid, _), no in zip(t.rows, t.row_lines):
            if rid in seen:
                diags.append(Diagnostic(no, DuplicateRowId, f"table {t.name}: row id {rid} repeats line {seen[rid]}"))
            seen.setdefault(rid, no)
        for c in t.columns:
            if c.is_fk:
                target = w.table(c.target)
                if target is None or w.kind(target) != "entity":
                    diags.append(Diagnostic(t.line, NormalFormViolation, f"{t.name}.{c.name} targets unknown table {c.target}"))
                    continue
                ids = set(target.row_ids())
                i = t.index(c.name)
                for (rid, cells), no in zip(t.rows, t.row_lines):
                    if cells[i] is None:
                        diags.append(Diagnostic(no, DanglingForeignKey, f"{t.name}.{c.name} is blank in row {rid}"))
                    elif cells[i] not in ids:
                        diags.append(
                            Diagnostic(no, DanglingForeignKey, f"{t.name}.{c.name} names missing row {cells[i]} of {c.target}")
                        )
            formulas = [(t.line, c.formula)] if c.formula else []
            if not c.is_fk:
                i = t.index(c.name)
                formulas += [(no, cells[i]) for (_, cells), no in zip(t.rows, t.row_lines) if isinstance(cells[i], Formula)]
            for no, f in formulas:
                msg = _check_formula(w, t, f, top=kind != "entity" or c.type == BOOL)
                if msg:
                    diags.append(Diagnostic(no, MalformedFormula, f"{t.name}.{c.name}: {msg}"))
    return diags


def _resolve_path(w: Workbook, table: Table, segs: tuple[str, ...]) -> tuple[Optional[Column], str]:
    """Follow a reference path; returns the final column (None for `@`) and an error."""
    cur = table
    for i, s in enumerate(segs):
        col = cur.column(s)
        if col is None:
            return None, f"{cur.name} has no column [{s}]"
        if i == len(segs) - 1:
            return col, ""
        if not col.is_fk:
            return None, f"[{s}] is not a foreign key of {cur.name}"
        nxt = w.table(col.target)
        if nxt is None:
            return None, f"unknown table {col.target}"
        cur = nxt
    return None, ""


def _check_formula(w: Workbook, t: Table, f: Formula, top: bool) -> str:
    for node in _walk(f.ast):
        k = node[0]
        if k == "cmp" and not (top and node is f.ast):
            return "comparisons are only allowed at the top of a boolean column"
        if k == "ref":
            _, err = _resolve_path(w, t, node[1])
            if err:
                return err
        if k == "null":
            tt = w.table(node[1])
            if tt is None or w.kind(tt) != "type":
                return f"no type table {node[1]}"
            if node[2] not in tt.row_ids():
                return f"type table {node[1]} has no row {node[2]}"
        if k == "lookup":
            key, err = _resolve_path(w, t, node[1])
            if err:
                return err
            for tab, col in ((node[2], node[3]), node[4]):
                rt = w.table(tab)
                if rt is None:
                    return f"LOOKUP range names unknown table {tab}"
                if col != rt.pk and rt.column(col) is None:
                    return f"LOOKUP range names unknown column {tab}.{col}"
    return ""


# ---------------------------------------------------------------------------
# sheet -> olog

_VAR = "x"


def _normalize_lookups(w: Workbook, t: Table, ast: tuple) -> tuple[tuple, bool]:
    """Rewrite absolute-range LOOKUPs as fk paths; the flag reports an unmatched range."""
    bad = False

    def go(a: tuple) -> tuple:
        nonlocal bad
        k = a[0]
        if k == "lookup":
            key_segs, tab, pk, (rtab, rcol) = a[1], a[2], a[3], a[4]
            key, _ = _resolve_path(w, t, key_segs)
            target = w.table(tab)
            if key is not None and key.is_fk and key.target == tab and target and pk == target.pk and rtab == tab:
                return ("ref", tuple(key_segs) + (rcol,))
            bad = True
            return a
        if k == "call":
            return ("call", a[1], tuple(go(x) for x in a[2]))
        if k == "op":
            return ("op", a[1], go(a[2]), go(a[3]))
        if k == "neg":
            return ("neg", go(a[1]))
        if k == "cmp":
            return ("cmp", go(a[1]), go(a[2]))
        return a

    return go(ast), bad


def _to_raw(ast: tuple, base: tuple, null_gens: dict[tuple[str, str], str]) -> tuple:
    k = ast[0]
    if k == "self":
        return base
    if k == "ref":
        out = base
        for s in ast[1]:
            out = ("dot", out, s)
        return out
    if k == "null":
        return ("id", null_gens[(ast[1], ast[2])])
    if k == "call":
        return ("call", ast[1], [_to_raw(x, base, null_gens) for x in ast[2]])
    if k == "op":
        return ("op", ast[1], _to_raw(ast[2], base, null_gens), _to_raw(ast[3], base, null_gens))
    if k == "neg":
        return ("neg", _to_raw(ast[1], base, null_gens))
    if k in ("num", "str", "bool"):
        return ast
    raise MalformedFormula([Diagnostic(0, MalformedFormula, f"cannot translate {show_formula(ast)}")])


def _has_nulls(ast: tuple) -> bool:
    return any(n[0] == "null" for n in _walk(ast))


@dataclass
class _ColumnPlan:
    role: str  # "data", "definition" or "witness"
    formula: Optional[tuple] = None
    drop: bool = False  # cells cannot be imported (ambiguous lookup)


def _plan_column(w: Workbook, t: Table, c: Column) -> _ColumnPlan:
    where = f"{t.name}.{c.name}"
    if c.formula is not None:
        ast, bad = _normalize_lookups(w, t, c.formula.ast)
        for no, cell in zip(t.row_lines, t.cells(c.name)):
            if cell is not None and not (isinstance(cell, Formula) and _normalize_lookups(w, t, cell.ast)[0] == ast):
                raise MalformedFormula([Diagnostic(no, MalformedFormula, f"{where}: cell disagrees with the column formula")])
        if bad:
            warnings.warn(AmbiguousLookup(f"{where}: LOOKUP range does not match its key; column kept as data"))
            return _ColumnPlan("data", drop=True)
        return _ColumnPlan("witness" if ast[0] == "cmp" else "definition", ast)
    cells = t.cells(c.name)
    forms = [x for x in cells if isinstance(x, Formula)]
    if not any(x.relative for x in forms) and (len(forms) < len(cells) or len(set(forms)) != 1):
        return _ColumnPlan("data")
    norm = [_normalize_lookups(w, t, x.ast) for x in forms]
    same = len(forms) == len(cells) and len({a for a, _ in norm}) == 1
    if same and norm[0][1]:
        warnings.warn(AmbiguousLookup(f"{where}: LOOKUP range does not match its key; column kept as data"))
        return _ColumnPlan("data", drop=True)
    if same and not _has_nulls(norm[0][0]):
        ast = norm[0][0]
        return _ColumnPlan("witness" if ast[0] == "cmp" else "definition", ast)
    if not same:
        warnings.warn(MixedFormulaColumn(f"{where}: rows do not share one formula; imported as data"))
    return _ColumnPlan("data")


def import_olog(w: Workbook) -> tuple[Schema, Instance]:
    """Lift a normal-form workbook to a schema (tables, columns, formulas) and an instance (cells)."""
    ents = w.entity_tables()
    type_tables = [t for t in w.tables if w.kind(t) == "type"]
    counts: dict[str, int] = {}
    for t in ents + type_tables:
        for r in t.row_ids():
            counts[r] = counts.get(r, 0) + 1

    def gname(table: str, rid: str) -> str:
        return rid if counts[rid] == 1 else f"{table}/{rid}"

    row_gens = {(t.name, r): gname(t.name, r) for t in ents for r in t.row_ids()}
    null_gens = {(t.name, r): gname(t.name, r) for t in type_tables for r in t.row_ids()}

    plans = {(t.name, c.name): _plan_column(w, t, c) for t in ents for c in t.columns if not c.is_fk}
    sig = Schema.build(
        w.name,
        [t.name for t in ents],
        fks=[(c.name, t.name, c.target) for t in ents for c in t.columns if c.is_fk],
        attrs=[
            (c.name, t.name, c.type)
            for t in ents
            for c in t.columns
            if not c.is_fk and plans[(t.name, c.name)].role != "witness"
        ],
        typeside=w.typeside,
    )

    def fail(line: int, where: str, exc: Exception) -> MalformedFormula:
        return MalformedFormula([Diagnostic(line, MalformedFormula, f"{where}: {exc}")])

    eqs: list[Equation] = []
    witnesses: list[Equation] = []
    base = ("id", _VAR)
    for t in ents:
        ctx = ((_VAR, t.name),)
        for c in t.columns:
            plan = plans.get((t.name, c.name))
            if plan is None or plan.role == "data":
                continue
            el = _Elab(sig, dict(ctx), {})
            try:
                if plan.role == "witness":
                    lhs, rhs = el.equation(_to_raw(plan.formula[1], base, {}), _to_raw(plan.formula[2], base, {}))
                else:
                    lhs = App(sig.symbol(c.name, t.name), (Var(_VAR, t.name),))
                    rhs = el.term(_to_raw(plan.formula, base, {}), c.type)
                    if term_sort(rhs) != c.type:
                        raise TypeError(f"formula has sort {term_sort(rhs)}, column is {c.type}")
            except (OlogError, TypeError) as exc:
                raise fail(t.line, f"{t.name}.{c.name}", exc) from None
            eq = Equation(ctx, lhs, rhs, term_sort(lhs))
            eqs.append(eq)
            if plan.role == "witness":
                witnesses.append(eq)
    schema = replace(sig.with_equations(eqs), constraints=frozenset(witnesses))

    gens = [(row_gens[(t.name, r)], t.name) for t in ents for r in t.row_ids()]
    gens += [(null_gens[(t.name, r)], t.name) for t in type_tables for r in t.row_ids()]
    gen_sorts = dict(gens)
    el = _Elab(schema, {}, gen_sorts)
    facts: list[tuple[Term, Term]] = []
    for t in ents:
        for (rid, cells), no in zip(t.rows, t.row_lines):
            g = gen_term(row_gens[(t.name, rid)], t.name)
            for c, cell in zip(t.columns, cells):
                if c.is_fk:
                    f = schema.symbol(c.name, t.name)
                    facts.append((App(f, (g,)), gen_term(row_gens[(c.target, cell)], c.target)))
                    continue
                plan = plans[(t.name, c.name)]
                if plan.role != "data" or plan.drop or cell is None:
                    continue
                f = schema.symbol(c.name, t.name)
                if not isinstance(cell, Formula):
                    facts.append((App(f, (g,)), Lit(cell, c.type)))
                    continue
                if cell.is_comparison:
                    warnings.warn(MixedFormulaColumn(f"{t.name}.{c.name}: row {rid} comparison dropped"))
                    continue
                ast, bad = _normalize_lookups(w, t, cell.ast)
                if bad:
                    warnings.warn(AmbiguousLookup(f"{t.name}.{c.name}: row {rid} LOOKUP dropped"))
                    continue
                try:
                    value = el.term(_to_raw(ast, ("id", g.symbol.name), null_gens), c.type)
                except OlogError as exc:
                    raise fail(no, f"{t.name}.{c.name}", exc) from None
                facts.append((App(f, (g,)), value))
    for t in w.tables:
        if w.kind(t) != "equations":
            continue
        for (rid, cells), no in zip(t.rows, t.row_lines):
            cell = cells[0]
            if cell is None:
                continue
            if not (isinstance(cell, Formula) and cell.is_comparison):
                raise MalformedFormula([Diagnostic(no, MalformedFormula, f"{t.name}: row {rid} is not an equation")])
            try:
                lhs, rhs = el.equation(_to_raw(cell.ast[1], base, null_gens), _to_raw(cell.ast[2], base, null_gens))
            except OlogError as exc:
                raise fail(no, t.name, exc) from None
            facts.append((lhs, rhs))
    return schema, Instance.build(w.name, schema, gens, facts)


# ---------------------------------------------------------------------------
# olog -> sheet


def term_to_formula(t: Term, schema: Schema) -> tuple:
    """Formula AST for a term in at most one row variable."""
    if isinstance(t, Var):
        return ("self",)
    if isinstance(t, Null):
        return ("null", t.sort, t.name)
    if isinstance(t, Lit):
        v = t.value
        if isinstance(v, bool):
            return ("bool", v)
        if isinstance(v, str):
            return ("str", v)
        if v < 0:
            return ("neg", ("num", show_number(-v)))
        return ("num", show_number(v))
    syms = set(schema.symbols)
    if t.symbol in syms:
        segs, u = [], t
        while isinstance(u, App) and u.symbol in syms:
            segs.append(u.symbol.name)
            u = u.args[0]
        if not isinstance(u, Var):
            raise ValueError(f"cannot render {t} as a formula")
        return ("ref", tuple(reversed(segs)))
    name = t.symbol.name
    if name in _PREC and len(t.args) == 2:
        return ("op", name, term_to_formula(t.args[0], schema), term_to_formula(t.args[1], schema))
    return ("call", name, tuple(term_to_formula(a, schema) for a in t.args))


def witness_label(ast: tuple) -> str:
    """Column header for a boolean witness column."""
    return f"{show_formula(ast[1])} = {show_formula(ast[2])}"


def _witnesses(schema: Schema) -> dict[str, list[tuple[Equation, tuple]]]:
    _, constraints = split_definitional(schema)
    out: dict[str, list[tuple[Equation, tuple]]] = {}
    for eq in constraints:
        ast = ("cmp", term_to_formula(eq.lhs, schema), term_to_formula(eq.rhs, schema))
        cols = out.setdefault(eq.ctx[0][1], [])
        if all(witness_label(a) != witness_label(ast) for _, a in cols):
            cols.append((eq, ast))
    return out


def export_olog(schema: Schema, model: InstanceModel, name: Optional[str] = None) -> Workbook:
    """Render a saturated model as a workbook.

    Definitional equations become per-row formulas, other equations boolean
    witness columns. Labelled nulls that carry information (named in the
    instance, shared between cells, or constrained by a type equation) are
    listed in per-type tables; the rest are blank cells.
    """
    defs, _ = split_definitional(schema)
    wit = _witnesses(schema)
    gen_nulls = {v for v in model.generator_values.values() if isinstance(v, Null)}

    values: dict[tuple[str, str, FuncSymbol], Term] = {}
    uses: dict[Null, int] = {}
    for e in schema.entities:
        for f in schema.attrs_of(e):
            if f in defs:
                continue
            for r in model.rows.get(e, []):
                v = model.attr(f, r)
                values[(e, r, f)] = v
                for n in nulls_of(v):
                    uses[n] = uses.get(n, 0) + 1
    data_nulls = set(uses) | gen_nulls
    type_eqs = [
        eq for eq in model.type_equations if (nulls_of(eq.lhs) | nulls_of(eq.rhs)) <= data_nulls
    ]
    constrained = set().union(*(nulls_of(eq.lhs) | nulls_of(eq.rhs) for eq in type_eqs))

    def blank(v: Term) -> bool:
        return isinstance(v, Null) and v not in gen_nulls and v not in constrained and uses.get(v) == 1

    listed = set(gen_nulls) | constrained
    tables: list[Table] = []
    for e in schema.entities:
        rows = model.rows.get(e, [])
        empty = not rows
        cols = [Column(f.name, target=f.result_sort) for f in schema.fks_of(e)]
        for f in schema.attrs_of(e):
            annot = Formula(term_to_formula(defs[f].rhs, schema)) if f in defs and empty else None
            cols.append(Column(f.name, type=f.result_sort, formula=annot))
        for _, ast in wit.get(e, []):
            cols.append(Column(witness_label(ast), type=BOOL, formula=Formula(ast) if empty else None))
        t = Table(e, "id", cols)
        for r in rows:
            cells: list[Cell] = [model.fk(f, r) for f in schema.fks_of(e)]
            for f in schema.attrs_of(e):
                if f in defs:
                    cells.append(Formula(term_to_formula(defs[f].rhs, schema)))
                    continue
                v = values[(e, r, f)]
                if blank(v):
                    cells.append(None)
                elif isinstance(v, Lit):
                    cells.append(v.value)
                else:
                    listed |= nulls_of(v)
                    cells.append(Formula(term_to_formula(v, schema)))
            cells += [Formula(ast) for _, ast in wit.get(e, [])]
            t.rows.append((r, cells))
        tables.append(t)
    for s in schema.types:
        nulls = sorted((n for n in listed if n.sort == s), key=lambda n: n.name)
        if nulls:
            tables.append(Table(s, "id", [], [(n.name, []) for n in nulls]))
        eqs = [eq for eq in type_eqs if eq.sort == s]
        if eqs:
            rows = [
                (f"e{i}", [Formula(("cmp", term_to_formula(eq.lhs, schema), term_to_formula(eq.rhs, schema)))])
                for i, eq in enumerate(eqs, 1)
            ]
            tables.append(Table(s + "Eqs", "id", [Column("eq", type=BOOL)], rows))
    return Workbook(name or schema.name, tables, schema.typeside)


def witness_values(schema: Schema, model: InstanceModel) -> dict[tuple[str, str], list[bool]]:
    """Evaluate every witness column of ``export_olog`` on every row."""
    out = {}
    for e, cols in _witnesses(schema).items():
        for eq, ast in cols:
            v = eq.ctx[0][0]
            out[(e, witness_label(ast))] = [
                model.values_equal(model.evaluate(eq.lhs, {v: r}), model.evaluate(eq.rhs, {v: r}))
                for r in model.rows.get(e, [])
            ]
    return out


# ---------------------------------------------------------------------------
# canonical form and round trip


def canonical_workbook(w: Workbook) -> Workbook:
    """Sort tables, columns and rows; translate LOOKUPs; name witness columns by their formula."""
    ents, typed = [], []
    for t in sorted(w.entity_tables(), key=lambda t: t.name):
        cols, cells_by_col = [], []
        for c in t.columns:
            cells = t.cells(c.name)
            if not c.is_fk:
                cells = [
                    Formula(_normalize_lookups(w, t, x.ast)[0]) if isinstance(x, Formula) else x for x in cells
                ]
            annot = Formula(_normalize_lookups(w, t, c.formula.ast)[0]) if c.formula else None
            if annot is not None and t.rows:
                cells = [annot if x is None else x for x in cells]
                annot = None
            c = replace(c, formula=annot)
            probe = annot or (cells[0] if cells else None)
            witness = (
                c.type == BOOL
                and isinstance(probe, Formula)
                and probe.is_comparison
                and probe.relative
                and all(x == probe for x in cells)
            )
            if witness:
                c = replace(c, name=witness_label(probe.ast))
            cols.append(((2 if witness else 0 if c.is_fk else 1, c.name), c, cells))
        cols.sort(key=lambda x: x[0])
        rows = sorted(
            ((rid, [cells[i] for _, _, cells in cols]) for i, rid in enumerate(t.row_ids())), key=lambda r: r[0]
        )
        ents.append(Table(t.name, "id", [c for _, c, _ in cols], rows))
    for s in w.typeside.types:
        tt = w.table(s)
        if tt is not None and w.kind(tt) == "type":
            typed.append(Table(s, "id", [], sorted((r, []) for r in tt.row_ids())))
        et = w.table(s + "Eqs")
        if et is not None and w.kind(et) == "equations":
            forms = sorted({str(f): f for f in (_orient(cells[0]) for _, cells in et.rows) if f}.items())
            rows = [(f"e{i}", [f]) for i, (_, f) in enumerate(forms, 1)]
            typed.append(Table(s + "Eqs", "id", [Column("eq", type=BOOL)], rows))
    return Workbook(w.name, ents + typed, w.typeside)


def _orient(f: Optional[Formula]) -> Optional[Formula]:
    if f is None or not f.is_comparison:
        return f
    a, b = f.ast[1], f.ast[2]
    return Formula(("cmp", a, b) if show_formula(a) <= show_formula(b) else ("cmp", b, a))


def roundtrip(w: Workbook, bounds=None) -> Workbook:
    """``export_olog`` of the saturated import, in canonical form."""
    from .instance import Bounds, saturate

    schema, inst = import_olog(w)
    model = saturate(inst, bounds or Bounds())
    return canonical_workbook(export_olog(schema, model, name=w.name))
