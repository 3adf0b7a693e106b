"""Minimal arithmetic expression language for user-supplied metrics.

Supports +, -, *, /, ^ (right associative), unary minus, parentheses,
the functions sin, cos, exp, log, sqrt, numeric literals, the constants
pi and e, and coordinates x0..x{n-1}.  Domain predicates additionally
allow comparisons (<, <=, >, >=) combined with && and ||.

Expressions parse to plain nested tuples, so they are hashable,
picklable, and cheap to differentiate symbolically.  Exact symbolic
derivatives are what make user metrics as accurate as the built-in
catalog: no finite differencing of the metric itself is needed.
"""

from __future__ import annotations

import math
import re

from .errors import SpecError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\&\&|\|\||<=|>=|<|>|[-+*/^(),]))"
)

_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise SpecError(f"cannot tokenize expression at: {rest!r}")
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, text, dimension):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.dimension = dimension
        self.text = text

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, value = self.advance()
        if kind != "op" or value != op:
            raise SpecError(f"expected {op!r} in {self.text!r}, found {value!r}")

    # arithmetic -----------------------------------------------------------

    def parse_expr(self):
        node = self.parse_term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.advance()
            rhs = self.parse_term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.advance()
            rhs = self.parse_unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def parse_unary(self):
        if self.peek() == ("op", "-"):
            self.advance()
            return ("neg", self.parse_unary())
        if self.peek() == ("op", "+"):
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.peek() == ("op", "^"):
            self.advance()
            # right associative, exponent may itself carry a unary minus
            exponent = self.parse_unary()
            return ("pow", base, exponent)
        return base

    def parse_atom(self):
        kind, value = self.advance()
        if kind == "num":
            return ("num", value)
        if kind == "name":
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return ("call", value, arg)
            if value in _CONSTANTS:
                return ("num", _CONSTANTS[value])
            m = re.fullmatch(r"x(\d+)", value)
            if m:
                index = int(m.group(1))
                if index >= self.dimension:
                    raise SpecError(
                        f"coordinate {value} out of range for dimension {self.dimension}"
                    )
                return ("var", index)
            raise SpecError(f"unknown identifier {value!r} in {self.text!r}")
        if (kind, value) == ("op", "("):
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise SpecError(f"unexpected token {value!r} in {self.text!r}")

    # predicates -----------------------------------------------------------

    def parse_predicate(self):
        node = self.parse_and()
        while self.peek() == ("op", "||"):
            self.advance()
            node = ("or", node, self.parse_and())
        return node

    def parse_and(self):
        node = self.parse_comparison()
        while self.peek() == ("op", "&&"):
            self.advance()
            node = ("and", node, self.parse_comparison())
        return node

    def parse_comparison(self):
        lhs = self.parse_expr()
        kind, value = self.peek()
        if kind == "op" and value in ("<", "<=", ">", ">="):
            self.advance()
            rhs = self.parse_expr()
            return ("cmp", value, lhs, rhs)
        raise SpecError(f"expected comparison in predicate {self.text!r}")


def parse_expression(text, dimension):
    """Parse an arithmetic expression over x0..x{dimension-1}."""
    parser = _Parser(str(text), dimension)
    node = parser.parse_expr()
    if parser.peek()[0] != "end":
        raise SpecError(f"trailing input in expression {text!r}")
    return fold(node)


def parse_predicate(text, dimension):
    """Parse a domain predicate (comparisons joined by && / ||)."""
    parser = _Parser(str(text), dimension)
    node = parser.parse_predicate()
    if parser.peek()[0] != "end":
        raise SpecError(f"trailing input in predicate {text!r}")
    return node


def evaluate(node, x):
    """Evaluate an expression node at coordinate tuple ``x``."""
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return float(x[node[1]])
    if tag == "neg":
        return -evaluate(node[1], x)
    if tag == "add":
        return evaluate(node[1], x) + evaluate(node[2], x)
    if tag == "sub":
        return evaluate(node[1], x) - evaluate(node[2], x)
    if tag == "mul":
        return evaluate(node[1], x) * evaluate(node[2], x)
    if tag == "div":
        return evaluate(node[1], x) / evaluate(node[2], x)
    if tag == "pow":
        return evaluate(node[1], x) ** evaluate(node[2], x)
    if tag == "call":
        return _FUNCTIONS[node[1]](evaluate(node[2], x))
    raise SpecError(f"cannot evaluate node {node!r}")


def evaluate_predicate(node, x):
    tag = node[0]
    if tag == "and":
        return evaluate_predicate(node[1], x) and evaluate_predicate(node[2], x)
    if tag == "or":
        return evaluate_predicate(node[1], x) or evaluate_predicate(node[2], x)
    if tag == "cmp":
        lhs = evaluate(node[2], x)
        rhs = evaluate(node[3], x)
        op = node[1]
        if op == "<":
            return lhs < rhs
        if op == "<=":
            return lhs <= rhs
        if op == ">":
            return lhs > rhs
        return lhs >= rhs
    raise SpecError(f"cannot evaluate predicate node {node!r}")


def fold(node):
    """Constant-fold and apply trivial identities (0*x, x+0, x^1, ...).

    Keeps repeated differentiation from blowing up the tree.
    """
    tag = node[0]
    if tag in ("num", "var"):
        return node
    if tag == "neg":
        inner = fold(node[1])
        if inner[0] == "num":
            return ("num", -inner[1])
        if inner[0] == "neg":
            return inner[1]
        return ("neg", inner)
    if tag == "call":
        arg = fold(node[2])
        if arg[0] == "num":
            return ("num", _FUNCTIONS[node[1]](arg[1]))
        return ("call", node[1], arg)
    if tag in ("add", "sub", "mul", "div", "pow"):
        a = fold(node[1])
        b = fold(node[2])
        if a[0] == "num" and b[0] == "num":
            return ("num", evaluate((tag, a, b), ()))
        if tag == "add":
            if a == ("num", 0.0):
                return b
            if b == ("num", 0.0):
                return a
        elif tag == "sub":
            if b == ("num", 0.0):
                return a
            if a == ("num", 0.0):
                return ("neg", b)
        elif tag == "mul":
            if a == ("num", 0.0) or b == ("num", 0.0):
                return ("num", 0.0)
            if a == ("num", 1.0):
                return b
            if b == ("num", 1.0):
                return a
        elif tag == "div":
            if a == ("num", 0.0):
                return ("num", 0.0)
            if b == ("num", 1.0):
                return a
        elif tag == "pow":
            if b == ("num", 1.0):
                return a
            if b == ("num", 0.0):
                return ("num", 1.0)
        return (tag, a, b)
    raise SpecError(f"cannot fold node {node!r}")


def differentiate(node, var):
    """Exact derivative of an expression node with respect to x{var}."""
    return fold(_diff(node, var))


def _diff(node, var):
    tag = node[0]
    if tag == "num":
        return ("num", 0.0)
    if tag == "var":
        return ("num", 1.0 if node[1] == var else 0.0)
    if tag == "neg":
        return ("neg", _diff(node[1], var))
    if tag == "add" or tag == "sub":
        return (tag, _diff(node[1], var), _diff(node[2], var))
    if tag == "mul":
        a, b = node[1], node[2]
        return ("add", ("mul", _diff(a, var), b), ("mul", a, _diff(b, var)))
    if tag == "div":
        a, b = node[1], node[2]
        return (
            "div",
            ("sub", ("mul", _diff(a, var), b), ("mul", a, _diff(b, var))),
            ("mul", b, b),
        )
    if tag == "pow":
        a, b = node[1], node[2]
        if b[0] == "num":
            # c * a^(c-1) * a'
            return (
                "mul",
                ("mul", b, ("pow", a, ("num", b[1] - 1.0))),
                _diff(a, var),
            )
        # general a^b = exp(b log a)
        return (
            "mul",
            ("pow", a, b),
            (
                "add",
                ("mul", _diff(b, var), ("call", "log", a)),
                ("div", ("mul", b, _diff(a, var)), a),
            ),
        )
    if tag == "call":
        fname, arg = node[1], node[2]
        inner = _diff(arg, var)
        if fname == "sin":
            outer = ("call", "cos", arg)
        elif fname == "cos":
            outer = ("neg", ("call", "sin", arg))
        elif fname == "exp":
            outer = ("call", "exp", arg)
        elif fname == "log":
            outer = ("div", ("num", 1.0), arg)
        elif fname == "sqrt":
            outer = ("div", ("num", 0.5), ("call", "sqrt", arg))
        else:
            raise SpecError(f"no derivative rule for {fname}")
        return ("mul", outer, inner)
    raise SpecError(f"cannot differentiate node {node!r}")
