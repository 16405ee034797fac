"""Canonical text grammar for scalar expressions and operator polynomials.

Printing is deterministic: numerator terms are emitted in descending
graded-lexicographic order, coefficients as ``a/b + c/d*i``, and a rational
function as ``(num)/(den)``.  Everything printed here re-parses to an equal
expression, which is what the golden-file comparisons rely on.
"""

from __future__ import annotations

from fractions import Fraction

from .gaussrat import GaussRat
from .ring import MONO_ONE, RingError, ScalarExpr, poly_is_const, sorted_monos


class GrammarError(ValueError):
    pass


# ---------------------------------------------------------------------------
# printing


def _frac_str(f: Fraction) -> str:
    return str(f)


def _coeff_parts(c: GaussRat):
    """Return (negative, magnitude-string, needs_parens)."""
    if c.im == 0:
        return c.re < 0, _frac_str(abs(c.re)), False
    if c.re == 0:
        mag = abs(c.im)
        s = "i" if mag == 1 else f"{_frac_str(mag)}*i"
        return c.im < 0, s, False
    # mixed coefficient: sign taken from the real part
    neg = c.re < 0
    re, im = (abs(c.re), -c.im if neg else c.im)
    inner_sign = " - " if im < 0 else " + "
    mag_im = abs(im)
    im_s = "i" if mag_im == 1 else f"{_frac_str(mag_im)}*i"
    return neg, f"({_frac_str(re)}{inner_sign}{im_s})", True


def _mono_str(table, mono) -> str:
    parts = []
    for s, e in mono:
        name = table.symbols[s].name
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)


def format_poly(table, poly) -> str:
    if not poly:
        return "0"
    pieces = []
    for mono in sorted_monos(poly):
        c = poly[mono]
        neg, mag, _ = _coeff_parts(c)
        if mono == MONO_ONE:
            body = mag
        elif mag == "1":
            body = _mono_str(table, mono)
        else:
            body = f"{mag}*{_mono_str(table, mono)}"
        if not pieces:
            pieces.append(f"-{body}" if neg else body)
        else:
            pieces.append(f" - {body}" if neg else f" + {body}")
    return "".join(pieces)


def format_expr(e: ScalarExpr) -> str:
    num = format_poly(e.table, e.num)
    if poly_is_const(e.den) is not None:
        # denominator is monic, so a constant denominator is exactly 1
        return num
    return f"({num})/({format_poly(e.table, e.den)})"


def format_operator(op) -> str:
    """Normal-ordered operator text: qhat(i)^a phat(i)^b factors per pair."""
    if not op.terms:
        return "0"
    pieces = []
    for mono in sorted(op.terms, key=lambda m: (sum(m), m), reverse=True):
        coeff = op.terms[mono]
        factors = []
        for pair in range(op.space.npairs):
            a, b = mono[2 * pair], mono[2 * pair + 1]
            if a:
                factors.append(f"qhat({pair})" + (f"^{a}" if a > 1 else ""))
            if b:
                factors.append(f"phat({pair})" + (f"^{b}" if b > 1 else ""))
        cs = format_expr(coeff)
        neg = False
        if cs.startswith("-") and "+" not in cs and "-" not in cs[1:]:
            neg, cs = True, cs[1:]
        elif any(ch in cs for ch in "+-") or "/" in cs:
            cs = f"({cs})"
        body = "*".join(factors) if factors else "1"
        if cs == "1":
            term = body
        elif factors:
            term = f"{cs}*{body}"
        else:
            term = cs
        if not pieces:
            pieces.append(f"-{term}" if neg else term)
        else:
            pieces.append(f" - {term}" if neg else f" + {term}")
    return "".join(pieces)


# ---------------------------------------------------------------------------
# parsing


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str]] = []
        self._lex()
        self.idx = 0

    def _lex(self):
        t, n = self.text, len(self.text)
        i = 0
        while i < n:
            ch = t[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit():
                j = i
                while j < n and t[j].isdigit():
                    j += 1
                self.tokens.append(("num", t[i:j]))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < n and (t[j].isalnum() or t[j] == "_"):
                    j += 1
                self.tokens.append(("name", t[i:j]))
                i = j
                continue
            if ch in "+-*/^()[],;=":
                self.tokens.append((ch, ch))
                i += 1
                continue
            raise GrammarError(f"unexpected character {ch!r} in {self.text!r}")

    def peek(self):
        return self.tokens[self.idx] if self.idx < len(self.tokens) else ("end", "")

    def next(self):
        tok = self.peek()
        self.idx += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise GrammarError(f"expected {kind!r}, got {tok[1]!r} in {self.text!r}")
        return tok


def _parse_int_list(lx: _Lexer):
    """Parse the bracket body of G[...] / F[...]: groups split by ';'."""
    lx.expect("[")
    groups, current = [], []
    while True:
        neg = False
        if lx.peek()[0] == "-":
            lx.next()
            neg = True
        tok = lx.expect("num")
        current.append(-int(tok[1]) if neg else int(tok[1]))
        kind = lx.next()
        if kind[0] == ",":
            continue
        if kind[0] == ";":
            groups.append(tuple(current))
            current = []
            continue
        if kind[0] == "]":
            groups.append(tuple(current))
            return groups
        raise GrammarError(f"bad index list in {lx.text!r}")


def _parse_expr(lx: _Lexer):
    node = _parse_term(lx)
    while lx.peek()[0] in "+-":
        op = lx.next()[0]
        rhs = _parse_term(lx)
        node = (("add" if op == "+" else "sub"), node, rhs)
    return node


def _parse_term(lx: _Lexer):
    node = _parse_factor(lx)
    while lx.peek()[0] in "*/":
        op = lx.next()[0]
        rhs = _parse_factor(lx)
        node = (("mul" if op == "*" else "div"), node, rhs)
    return node


def _parse_factor(lx: _Lexer):
    if lx.peek()[0] == "-":
        lx.next()
        return ("neg", _parse_factor(lx))
    if lx.peek()[0] == "+":
        lx.next()
        return _parse_factor(lx)
    return _parse_power(lx)


def _parse_power(lx: _Lexer):
    base = _parse_atom(lx)
    if lx.peek()[0] == "^":
        lx.next()
        neg = False
        if lx.peek()[0] == "-":
            lx.next()
            neg = True
        tok = lx.expect("num")
        expo = -int(tok[1]) if neg else int(tok[1])
        return ("pow", base, expo)
    return base


def _parse_atom(lx: _Lexer):
    kind, val = lx.next()
    if kind == "num":
        return ("num", int(val))
    if kind == "(":
        node = _parse_expr(lx)
        lx.expect(")")
        return node
    if kind == "name":
        if val == "i":
            return ("i",)
        if val in ("G", "F") and lx.peek()[0] == "[":
            return ("moment" if val == "G" else "fvar", tuple(_parse_int_list(lx)))
        if val in ("qhat", "phat") and lx.peek()[0] == "(":
            lx.next()
            tok = lx.next()
            if tok[0] not in ("num", "name"):
                raise GrammarError(f"bad pair reference in {lx.text!r}")
            lx.expect(")")
            return (val, tok[1])
        return ("sym", val)
    raise GrammarError(f"unexpected token {val!r} in {lx.text!r}")


def parse_ast(text: str):
    lx = _Lexer(text)
    node = _parse_expr(lx)
    if lx.peek()[0] != "end":
        raise GrammarError(f"trailing input in {text!r}")
    return node


def eval_ast(node, ctx):
    """Evaluate a parsed AST against a context providing atom constructors."""
    tag = node[0]
    if tag == "num":
        return ctx.number(node[1])
    if tag == "i":
        return ctx.imag_unit()
    if tag == "sym":
        return ctx.symbol(node[1])
    if tag == "moment":
        return ctx.moment(node[1])
    if tag == "fvar":
        return ctx.fvar(node[1])
    if tag == "qhat":
        return ctx.basic_op("q", node[1])
    if tag == "phat":
        return ctx.basic_op("p", node[1])
    if tag == "neg":
        return -eval_ast(node[1], ctx)
    if tag == "add":
        return eval_ast(node[1], ctx) + eval_ast(node[2], ctx)
    if tag == "sub":
        return eval_ast(node[1], ctx) - eval_ast(node[2], ctx)
    if tag == "mul":
        return eval_ast(node[1], ctx) * eval_ast(node[2], ctx)
    if tag == "div":
        return eval_ast(node[1], ctx) / eval_ast(node[2], ctx)
    if tag == "pow":
        return eval_ast(node[1], ctx) ** node[2]
    raise GrammarError(f"bad AST node {tag!r}")
