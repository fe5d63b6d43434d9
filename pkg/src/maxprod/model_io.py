"""Reading and writing models in the UAI-style MARKOV text format.

Layout: the token MARKOV; the variable count; one cardinality per variable;
the factor count; one scope line per factor (arity, then 0-based variable
ids); then each factor's table as its entry count followed by that many
values, row-major in the declared scope order (last variable fastest).
Comment lines start with '#'; the extension ``# latent <factor-index>``
tags a factor as data-independent.
"""

from __future__ import annotations

import numpy as np

from .factors import Factor, Variable
from .graph import FactorGraph


class ModelParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class _Tokens:
    def __init__(self, text: str):
        self.items: list[tuple[str, int]] = []
        self.latent: list[tuple[int, int]] = []  # (factor index, line)
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if stripped.startswith("#"):
                fields = stripped[1:].split()
                if fields and fields[0] == "latent":
                    for tok in fields[1:]:
                        try:
                            self.latent.append((int(tok), lineno))
                        except ValueError:
                            raise ModelParseError(f"bad latent annotation {tok!r}", lineno) from None
                continue
            for tok in stripped.split():
                self.items.append((tok, lineno))
        self.pos = 0

    @property
    def line(self) -> int:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.items):
            raise ModelParseError(f"unexpected end of input, expected {what}", self.line)
        tok, _ = self.items[self.pos]
        self.pos += 1
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ModelParseError(f"expected integer {what}, got {tok!r}", self.line) from None

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ModelParseError(f"expected number {what}, got {tok!r}", self.line) from None


def parse_model(text: str) -> FactorGraph:
    """Parse MARKOV-format text into a factor graph.

    Factors default to data-dependent; ``# latent i`` annotations mark factor
    i as data-independent.  Errors carry the offending line number.
    """
    toks = _Tokens(text)
    preamble = toks.next("file type")
    if preamble.upper() != "MARKOV":
        raise ModelParseError(f"expected MARKOV header, got {preamble!r}", toks.line)
    n_vars = toks.next_int("variable count")
    if n_vars < 0:
        raise ModelParseError("variable count must be non-negative", toks.line)
    cards = [toks.next_int(f"cardinality of variable {i}") for i in range(n_vars)]
    graph = FactorGraph()
    variables = []
    for i, card in enumerate(cards):
        if card < 1:
            raise ModelParseError(f"variable {i} has cardinality {card}", toks.line)
        variables.append(graph.add_variable(Variable(i, card)))
    n_factors = toks.next_int("factor count")
    scopes: list[list[int]] = []
    for f in range(n_factors):
        arity = toks.next_int(f"arity of factor {f}")
        scope = []
        for _ in range(arity):
            vid = toks.next_int(f"variable id in factor {f}")
            if not 0 <= vid < n_vars:
                raise ModelParseError(f"factor {f} references unknown variable {vid}", toks.line)
            if vid in scope:
                raise ModelParseError(f"factor {f} repeats variable {vid}", toks.line)
            scope.append(vid)
        scopes.append(scope)
    latent_ids = set()
    for fi, lineno in toks.latent:
        if not 0 <= fi < n_factors:
            raise ModelParseError(f"latent annotation for unknown factor {fi}", lineno)
        latent_ids.add(fi)
    for f, scope in enumerate(scopes):
        declared = toks.next_int(f"table size of factor {f}")
        expect = 1
        for vid in scope:
            expect *= cards[vid]
        if declared != expect:
            raise ModelParseError(
                f"factor {f} declares {declared} entries but its scope holds {expect}",
                toks.line,
            )
        values = np.empty(expect)
        for t in range(expect):
            values[t] = toks.next_float(f"entry {t} of factor {f}")
        # table is row-major in the declared order; realign to id-sorted scope
        shape = [cards[vid] for vid in scope]
        table = values.reshape(shape)
        order = sorted(range(len(scope)), key=lambda pos: scope[pos])
        table = np.transpose(table, order)
        scope_vars = [variables[scope[pos]] for pos in order]
        graph.add_factor(Factor(scope_vars, table), data_independent=f in latent_ids)
    if toks.pos != len(toks.items):
        raise ModelParseError(f"unexpected trailing token {toks.items[toks.pos][0]!r}", toks.line)
    return graph


def serialize_model(graph: FactorGraph) -> str:
    """Inverse of :func:`parse_model`, up to scope reordering."""
    var_ids = sorted(graph.variables)
    index = {vid: pos for pos, vid in enumerate(var_ids)}
    lines = ["MARKOV", str(len(var_ids))]
    lines.append(" ".join(str(graph.variables[vid].cardinality) for vid in var_ids))
    lines.append(str(len(graph.factors)))
    for fn in graph.factors:
        ids = " ".join(str(index[v.id]) for v in fn.scope)
        lines.append(f"{len(fn.scope)} {ids}")
    for fn in graph.factors:
        flat = fn.factor.values.ravel()
        lines.append(str(flat.size))
        lines.append(" ".join(repr(float(x)) for x in flat))
    latent = [str(fn.index) for fn in graph.factors if fn.data_independent]
    if latent:
        lines.append("# latent " + " ".join(latent))
    return "\n".join(lines) + "\n"
