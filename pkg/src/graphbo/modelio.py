"""Model file export (MPS and LP) with a bundled reader for round-trips.

Exponential links are expanded at export time into big-M piecewise-linear
rows over the argument range [0, 1]; the internal solver never uses the
expansion. Export requires fixed-size models because bounded-size kernel
normalizations are not linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encode import ConstraintBlock, LinearConstraint, MipModel, MipVariable
from .errors import UnsupportedBoundedSizeExportError

PWL_BIG_M = 4.0
DEFAULT_BREAKPOINTS = 64
OBJ_NAME = "OBJ"


def piecewise_exp_table(breakpoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform interpolation nodes of exp on [0, 1]."""
    if breakpoints < 2:
        raise ValueError("need at least two breakpoints")
    xs = np.linspace(0.0, 1.0, breakpoints)
    return xs, np.exp(xs)


def piecewise_exp_error(breakpoints: int, grid_size: int = 10_000) -> float:
    """Max deviation of the chord interpolant from exp on a dense grid."""
    xs, ys = piecewise_exp_table(breakpoints)
    grid = np.linspace(0.0, 1.0, grid_size)
    return float(np.max(np.abs(np.interp(grid, xs, ys) - np.exp(grid))))


@dataclass
class QuadEntry:
    row: str
    entries: list[tuple[str, str, float]]


@dataclass
class ExportedModel:
    """Flat model as written to disk: variables, linear rows, objective,
    and the quadratic-constraint entries."""

    variables: list[MipVariable]
    constraints: list[LinearConstraint]
    objective: dict[int, float]
    quad: QuadEntry | None

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]


def expand_model(model: MipModel, breakpoints: int = DEFAULT_BREAKPOINTS) -> ExportedModel:
    """Copy the model, replacing each exp link with piecewise-linear rows."""
    if not model.kernel_rows_linear:
        raise UnsupportedBoundedSizeExportError(
            "bounded-size models cannot be exported; fix the size first")
    block = ConstraintBlock()
    for v in model.variables:
        block.add_var(v.name, v.kind, v.lb, v.ub, v.tag, v.index)
    for con in model.constraints:
        block.add_con(con.name, dict(con.coeffs), con.sense, con.rhs)

    xs, ys = piecewise_exp_table(breakpoints)
    m = PWL_BIG_M
    for li, link in enumerate(model.exp_links):
        seg_ids = []
        for j in range(len(xs) - 1):
            seg_ids.append(block.add_var(f"z_{link.name}_{j}", "binary", 0, 1,
                                         "pwl", (li, j)))
        block.add_con(f"EXP_{li}_sum", {z: 1.0 for z in seg_ids}, "==", 1.0)
        for j, z in enumerate(seg_ids):
            x0, x1 = float(xs[j]), float(xs[j + 1])
            slope = (float(ys[j + 1]) - float(ys[j])) / (x1 - x0)
            intercept = float(ys[j]) - slope * x0
            block.add_con(f"EXP_{li}_{j}_arglo",
                          {link.arg: 1.0, z: -m}, ">=", x0 - m)
            block.add_con(f"EXP_{li}_{j}_arghi",
                          {link.arg: 1.0, z: m}, "<=", x1 + m)
            block.add_con(f"EXP_{li}_{j}_ub",
                          {link.out: 1.0, link.arg: -slope, z: m}, "<=",
                          intercept + m)
            block.add_con(f"EXP_{li}_{j}_lb",
                          {link.out: 1.0, link.arg: -slope, z: -m}, ">=",
                          intercept - m)

    quad = None
    if model.quad is not None:
        names = [model.variables[i].name for i in model.quad.kernel_vars]
        sigma = model.variables[model.quad.sigma].name
        entries = [(sigma, sigma, 1.0)]
        q = model.quad.q
        for i in range(len(names)):
            for j in range(len(names)):
                if q[i, j] != 0.0:
                    entries.append((names[i], names[j], float(q[i, j])))
        # linear part of the variance row: -kxx <= 0
        block.add_con(model.quad.name,
                      {model.quad.kxx: -1.0}, "<=", 0.0)
        quad = QuadEntry(model.quad.name, entries)

    return ExportedModel(block.variables, block.constraints,
                         dict(model.objective), quad)


def export_model(model: MipModel, path, fmt: str = "mps",
                 breakpoints: int = DEFAULT_BREAKPOINTS) -> ExportedModel:
    """Write the model to ``path`` in MPS or LP form; returns the flat model."""
    flat = expand_model(model, breakpoints)
    if fmt == "mps":
        text = render_mps(flat)
    elif fmt == "lp":
        text = render_lp(flat)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return flat


# ---------------------------------------------------------------------------
# writers


def _num(x: float) -> str:
    return repr(float(x))


def render_mps(flat: ExportedModel) -> str:
    sense_code = {"<=": "L", ">=": "G", "==": "E"}
    lines = ["NAME graphbo_acquisition", "OBJSENSE", "    MIN", "ROWS",
             f" N  {OBJ_NAME}"]
    for con in flat.constraints:
        lines.append(f" {sense_code[con.sense]}  {con.name}")

    by_var: dict[int, list[tuple[str, float]]] = {i: [] for i in range(len(flat.variables))}
    for con in flat.constraints:
        for vid, coef in con.coeffs:
            by_var[vid].append((con.name, coef))
    for vid, coef in flat.objective.items():
        by_var[vid].append((OBJ_NAME, coef))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for vid, var in enumerate(flat.variables):
        want_int = var.kind in ("binary", "integer")
        if want_int != in_int:
            flag = "'INTORG'" if want_int else "'INTEND'"
            lines.append(f"    MARKER{marker}    'MARKER'    {flag}")
            marker += 1
            in_int = want_int
        for row, coef in by_var[vid]:
            lines.append(f"    {var.name}  {row}  {_num(coef)}")
        if not by_var[vid]:
            lines.append(f"    {var.name}  {OBJ_NAME}  0.0")
    if in_int:
        lines.append(f"    MARKER{marker}    'MARKER'    'INTEND'")

    lines.append("RHS")
    for con in flat.constraints:
        if con.rhs != 0.0:
            lines.append(f"    RHS  {con.name}  {_num(con.rhs)}")

    lines.append("BOUNDS")
    for var in flat.variables:
        if var.kind == "binary":
            lines.append(f" BV BND  {var.name}")
        elif var.kind == "integer":
            lines.append(f" LI BND  {var.name}  {int(var.lb)}")
            lines.append(f" UI BND  {var.name}  {int(var.ub)}")
        else:
            if math.isinf(var.lb) and math.isinf(var.ub):
                lines.append(f" FR BND  {var.name}")
            else:
                if not math.isinf(var.lb):
                    lines.append(f" LO BND  {var.name}  {_num(var.lb)}")
                else:
                    lines.append(f" MI BND  {var.name}")
                if not math.isinf(var.ub):
                    lines.append(f" UP BND  {var.name}  {_num(var.ub)}")

    if flat.quad is not None:
        lines.append(f"QCMATRIX   {flat.quad.row}")
        for a, b, coef in flat.quad.entries:
            lines.append(f"    {a}  {b}  {_num(coef)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def _lp_terms(coeffs: list[tuple[str, float]]) -> str:
    parts = []
    for name, coef in coeffs:
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {name}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def render_lp(flat: ExportedModel) -> str:
    names = flat.names
    lines = ["\\ graphbo acquisition model", "Minimize"]
    obj = [(names[vid], coef) for vid, coef in flat.objective.items()]
    lines.append(" obj: " + (_lp_terms(obj) if obj else "0"))
    lines.append("Subject To")
    sense_txt = {"<=": "<=", ">=": ">=", "==": "="}
    for con in flat.constraints:
        terms = _lp_terms([(names[vid], coef) for vid, coef in con.coeffs])
        if flat.quad is not None and con.name == flat.quad.row:
            q_parts = []
            for a, b, coef in flat.quad.entries:
                sign = "-" if coef < 0 else "+"
                if a == b:
                    q_parts.append(f"{sign} {_num(abs(coef))} {a} ^ 2")
                else:
                    q_parts.append(f"{sign} {_num(abs(coef))} {a} * {b}")
            q_text = " ".join(q_parts)
            if q_text.startswith("+ "):
                q_text = q_text[2:]
            terms = f"[ {q_text} ] " + ("+ " if not terms.startswith("-") else "") + terms
        lines.append(f" {con.name}: {terms} {sense_txt[con.sense]} {_num(con.rhs)}")
    lines.append("Bounds")
    for var in flat.variables:
        if var.kind == "binary":
            continue
        if math.isinf(var.lb) and math.isinf(var.ub):
            lines.append(f" {var.name} free")
        else:
            lo = "-inf" if math.isinf(var.lb) else _num(var.lb)
            hi = "+inf" if math.isinf(var.ub) else _num(var.ub)
            lines.append(f" {lo} <= {var.name} <= {hi}")
    generals = [v.name for v in flat.variables if v.kind == "integer"]
    if generals:
        lines.append("Generals")
        for name in generals:
            lines.append(f" {name}")
    binaries = [v.name for v in flat.variables if v.kind == "binary"]
    if binaries:
        lines.append("Binaries")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# readers


@dataclass
class ParsedModel:
    """What the bundled reader recovers from an exported file."""

    variables: dict[str, dict]
    constraints: list[dict]
    objective: dict[str, float]
    quad_entries: list[tuple[str, str, float]] = field(default_factory=list)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)


def read_mps(path) -> ParsedModel:
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    section = None
    rows: dict[str, dict] = {}
    row_order: list[str] = []
    variables: dict[str, dict] = {}
    objective: dict[str, float] = {}
    quad_entries: list[tuple[str, str, float]] = []
    in_int = False
    sense_map = {"L": "<=", "G": ">=", "E": "=="}
    quad_row = None

    for line in raw:
        stripped = line.strip()
        if not stripped or stripped.startswith("*"):
            continue
        head = stripped.split()
        if head[0] in ("NAME", "ENDATA"):
            continue
        # section headers are single-token lines; data lines may reuse the
        # conventional "RHS"/"BND" set names as their first field
        if len(head) == 1 and head[0] in ("OBJSENSE", "ROWS", "COLUMNS", "RHS",
                                          "BOUNDS"):
            section = head[0]
            continue
        if head[0] == "QCMATRIX" and len(head) == 2:
            section = "QCMATRIX"
            quad_row = head[1]
            continue
        if section == "OBJSENSE":
            continue
        if section == "ROWS":
            kind, name = head
            if kind == "N":
                continue
            rows[name] = {"name": name, "sense": sense_map[kind], "rhs": 0.0,
                          "coeffs": {}}
            row_order.append(name)
        elif section == "COLUMNS":
            if len(head) >= 3 and head[1] == "'MARKER'":
                in_int = head[2] == "'INTORG'"
                continue
            name, row, coef = head[0], head[1], float(head[2])
            variables.setdefault(name, {"kind": "integer" if in_int else "continuous",
                                        "lb": 0.0, "ub": math.inf})
            if row == OBJ_NAME:
                if coef != 0.0:
                    objective[name] = objective.get(name, 0.0) + coef
            else:
                rows[row]["coeffs"][name] = rows[row]["coeffs"].get(name, 0.0) + coef
        elif section == "RHS":
            _, row, value = head
            rows[row]["rhs"] = float(value)
        elif section == "BOUNDS":
            btype, _, name = head[0], head[1], head[2]
            var = variables.setdefault(name, {"kind": "continuous", "lb": 0.0,
                                              "ub": math.inf})
            if btype == "BV":
                var.update(kind="binary", lb=0.0, ub=1.0)
            elif btype == "UI":
                var.update(kind="integer", ub=float(head[3]))
            elif btype == "LI":
                var.update(kind="integer", lb=float(head[3]))
            elif btype == "UP":
                var["ub"] = float(head[3])
            elif btype == "LO":
                var["lb"] = float(head[3])
            elif btype == "FR":
                var.update(lb=-math.inf, ub=math.inf)
            elif btype == "MI":
                var["lb"] = -math.inf
        elif section == "QCMATRIX":
            quad_entries.append((head[0], head[1], float(head[2])))
            variables.setdefault(head[0], {"kind": "continuous", "lb": 0.0,
                                           "ub": math.inf})

    constraints = [rows[name] for name in row_order]
    return ParsedModel(variables, constraints, objective, quad_entries)


def _parse_lp_terms(text: str) -> dict[str, float]:
    """Parse whitespace-separated "[sign] coef name" term streams.

    Relies on the writer always separating sign tokens, coefficients, and
    names with spaces, so scientific notation like 1e-06 stays one token.
    """
    coeffs: dict[str, float] = {}
    sign = 1.0
    pending: float | None = None
    for tok in text.split():
        if tok == "+":
            sign = 1.0
        elif tok == "-":
            sign = -1.0
        else:
            try:
                value = float(tok)
            except ValueError:
                coef = pending if pending is not None else sign
                coeffs[tok] = coeffs.get(tok, 0.0) + coef
                pending = None
                sign = 1.0
            else:
                pending = sign * value
                sign = 1.0
    return coeffs


def _parse_lp_quad(text: str) -> list[tuple[str, str, float]]:
    """Parse "[sign] coef a ^ 2" / "[sign] coef a * b" token streams."""
    entries: list[tuple[str, str, float]] = []
    tokens = text.split()
    i = 0
    sign = 1.0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1.0
            i += 1
            continue
        if tok == "-":
            sign = -1.0
            i += 1
            continue
        coef = sign * float(tok)
        name_a = tokens[i + 1]
        if tokens[i + 2] == "^":
            entries.append((name_a, name_a, coef))
            i += 4
        else:  # "* b"
            entries.append((name_a, tokens[i + 3], coef))
            i += 4
        sign = 1.0
    return entries


def read_lp(path) -> ParsedModel:
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.rstrip() for ln in fh.read().splitlines()]
    section = None
    variables: dict[str, dict] = {}
    constraints: list[dict] = []
    objective: dict[str, float] = {}
    quad_entries: list[tuple[str, str, float]] = []

    def note_vars(coeffs: dict[str, float]) -> None:
        for name in coeffs:
            variables.setdefault(name, {"kind": "continuous", "lb": 0.0,
                                        "ub": math.inf})

    for line in raw:
        stripped = line.strip()
        if not stripped or stripped.startswith("\\"):
            continue
        lowered = stripped.lower()
        if lowered in ("minimize", "maximize", "subject to", "bounds",
                       "generals", "binaries", "end"):
            section = lowered
            continue
        if section == "minimize":
            _, expr = stripped.split(":", 1)
            objective.update(_parse_lp_terms(expr))
            note_vars(objective)
        elif section == "subject to":
            name, expr = stripped.split(":", 1)
            if "[" in expr:
                quad_text = expr[expr.index("[") + 1 : expr.index("]")]
                quad_entries.extend(_parse_lp_quad(quad_text))
                for a, b, _ in quad_entries:
                    variables.setdefault(a, {"kind": "continuous", "lb": 0.0,
                                             "ub": math.inf})
                    variables.setdefault(b, {"kind": "continuous", "lb": 0.0,
                                             "ub": math.inf})
                expr = expr[: expr.index("[")] + expr[expr.index("]") + 1 :]
                expr = expr.strip()
                if expr.startswith("+"):
                    expr = expr[1:]
            for op in ("<=", ">=", "="):
                if f" {op} " in expr:
                    lhs, rhs = expr.rsplit(f" {op} ", 1)
                    sense = "==" if op == "=" else op
                    coeffs = _parse_lp_terms(lhs)
                    note_vars(coeffs)
                    constraints.append({"name": name.strip(), "sense": sense,
                                        "rhs": float(rhs), "coeffs": coeffs})
                    break
        elif section == "bounds":
            if stripped.endswith(" free"):
                name = stripped[: -len(" free")].strip()
                variables.setdefault(name, {"kind": "continuous"})
                variables[name].update(lb=-math.inf, ub=math.inf)
            else:
                lo, rest = stripped.split("<=", 1)
                name, hi = rest.split("<=", 1)
                name = name.strip()
                variables.setdefault(name, {"kind": "continuous"})
                variables[name]["lb"] = float(lo) if "inf" not in lo else -math.inf
                variables[name]["ub"] = float(hi) if "inf" not in hi else math.inf
        elif section == "generals":
            variables.setdefault(stripped, {"lb": 0.0, "ub": math.inf})
            variables[stripped]["kind"] = "integer"
        elif section == "binaries":
            variables.setdefault(stripped, {})
            variables[stripped].update(kind="binary", lb=0.0, ub=1.0)

    return ParsedModel(variables, constraints, objective, quad_entries)
