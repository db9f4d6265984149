"""A tiny expression language for writing f and g in text model files.

Model file layout::

    # comment
    n=2 m=1
    param a = 0.5
    f1 = -4*w1 - a*cos(z1)
    f2 = ...
    g1 = 4*z1 + a*sin(z1) + w1 + (3 + sin(t))*w2

Equations are separated by newlines or ``;``. ``t``, ``w<k>`` and ``z<k>``
are reserved; ``pi`` and ``e`` are constants. Precedence, tightest first:
``^`` (right associative), unary minus, ``* /``, ``+ -``. So ``-2^2 == -4``.

Evaluation works on plain floats and on :class:`Dual` numbers, which gives
exact first partial derivatives.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

UNARY_FUNCS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "tanh", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}


class DslSyntaxError(ValueError):
    def __init__(self, line, col, message):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class DimensionMismatch(DslSyntaxError):
    pass


class EvalError(ArithmeticError):
    """Domain violation during evaluation (kind is e.g. 'DivideByZero')."""

    def __init__(self, kind, position=None, message=""):
        where = f" at {position}" if position is not None else ""
        super().__init__(f"{kind}{where}{': ' + message if message else ''}")
        self.kind = kind
        self.position = position


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    kind: str  # 't', 'w' or 'z'
    index: int = 0  # 1-based for w/z


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or a function name
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


PREC_ADD, PREC_MUL, PREC_UNARY, PREC_POW, PREC_ATOM = 1, 2, 3, 4, 5
_BIN_PREC = {"+": PREC_ADD, "-": PREC_ADD, "*": PREC_MUL, "/": PREC_MUL, "^": PREC_POW}


def _prec(node):
    if isinstance(node, Binary):
        return _BIN_PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return PREC_UNARY
    return PREC_ATOM


def pretty(node):
    """Render an AST so that ``parse_expr(pretty(node)) == node``."""

    def wrap(child, need):
        s = pretty(child)
        return f"({s})" if _prec(child) < need else s

    if isinstance(node, Num):
        if node.value < 0 or not math.isfinite(node.value):
            raise ValueError(f"literal {node.value!r} has no source form")
        return repr(float(node.value))
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return "t" if node.kind == "t" else f"{node.kind}{node.index}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return "-" + wrap(node.arg, PREC_UNARY)
        return f"{node.op}({pretty(node.arg)})"
    if isinstance(node, Binary):
        p = _BIN_PREC[node.op]
        if node.op == "^":
            return f"{wrap(node.left, PREC_ATOM)}^{wrap(node.right, PREC_UNARY)}"
        return f"{wrap(node.left, p)} {node.op} {wrap(node.right, p + 1)}"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node):
    """Set of Var nodes referenced by an expression."""
    if isinstance(node, Var):
        return {node}
    if isinstance(node, Unary):
        return variables(node.arg)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    return set()


# --- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),;=])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # 'num', 'ident', 'op', 'sep', 'eof'
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise DslSyntaxError(line, col, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            tokens.append(Token("sep", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "op" and m.group() == ";":
            tokens.append(Token("sep", ";", line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --- parser ------------------------------------------------------------------

_VAR_RE = re.compile(r"([wz])([1-9]\d*)$")


class _Parser:
    def __init__(self, tokens, n=None, m=None, params=None):
        self.toks = tokens
        self.i = 0
        self.n = n
        self.m = m
        self.params = params or {}
        self.depth = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def skip_newlines_in_parens(self):
        while self.depth > 0 and self.tok.kind == "sep" and self.tok.text == "\n":
            self.i += 1

    def expect(self, text):
        self.skip_newlines_in_parens()
        tok = self.tok
        if tok.text != text or tok.kind not in ("op", "ident"):
            raise DslSyntaxError(tok.line, tok.col, f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.advance()

    def peek_op(self, *ops):
        self.skip_newlines_in_parens()
        return self.tok.kind == "op" and self.tok.text in ops

    def expression(self):
        node = self.term()
        while self.peek_op("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek_op("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek_op("-"):
            self.advance()
            return Unary("neg", self.unary())
        if self.peek_op("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek_op("^"):
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        self.skip_newlines_in_parens()
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            self.depth += 1
            node = self.expression()
            self.expect(")")
            self.depth -= 1
            return node
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in UNARY_FUNCS:
                self.expect("(")
                self.depth += 1
                arg = self.expression()
                self.expect(")")
                self.depth -= 1
                return Unary(name, arg)
            if name == "t":
                return Var("t")
            vm = _VAR_RE.match(name)
            if vm:
                kind, idx = vm.group(1), int(vm.group(2))
                limit = self.n if kind == "w" else self.m
                if limit is not None and idx > limit:
                    raise DimensionMismatch(
                        tok.line, tok.col, f"{name} out of range for {'n' if kind == 'w' else 'm'}={limit}")
                return Var(kind, idx)
            if name in self.params:
                return Num(self.params[name])
            if name in CONSTANTS:
                return Const(name)
            raise DslSyntaxError(tok.line, tok.col, f"unknown identifier {name!r}")
        raise DslSyntaxError(tok.line, tok.col, f"unexpected {tok.text or 'end of input'!r}")


def parse_expr(text, n=None, m=None, params=None):
    """Parse a single expression. Dimension checks apply when n/m are given."""
    toks = [t for t in tokenize(text) if not (t.kind == "sep" and t.text == "\n")]
    p = _Parser(toks, n, m, params)
    node = p.expression()
    if p.tok.kind != "eof":
        raise DslSyntaxError(p.tok.line, p.tok.col, f"unexpected {p.tok.text!r}")
    return node


@dataclass(frozen=True)
class ModelFile:
    n: int
    m: int
    f: tuple
    g: tuple
    params: dict = field(default_factory=dict)
    name: str = "model"


_EQ_RE = re.compile(r"([fg])([1-9]\d*)$")


def parse_model(text, overrides=None, name="model"):
    """Parse model-file text; ``overrides`` replaces ``param`` values."""
    overrides = dict(overrides or {})
    toks = tokenize(text)
    p = _Parser(toks)

    def skip_seps():
        while p.tok.kind == "sep":
            p.advance()

    def header_int(key):
        skip_seps()
        tok = p.tok
        if tok.kind != "ident" or tok.text != key:
            raise DslSyntaxError(tok.line, tok.col, f"expected header '{key}=<int>'")
        p.advance()
        p.expect("=")
        val = p.advance()
        if val.kind != "num" or not val.text.isdigit():
            raise DslSyntaxError(val.line, val.col, f"{key} must be a non-negative integer")
        return int(val.text)

    n = header_int("n")
    m = header_int("m")
    if n < 1:
        raise DimensionMismatch(1, 1, "n must be at least 1")
    p.n, p.m = n, m
    params = {}
    eqs = {"f": {}, "g": {}}
    while True:
        skip_seps()
        tok = p.tok
        if tok.kind == "eof":
            break
        if tok.kind != "ident":
            raise DslSyntaxError(tok.line, tok.col, f"expected an equation, found {tok.text!r}")
        if tok.text == "param":
            p.advance()
            nm = p.advance()
            if nm.kind != "ident" or nm.text in CONSTANTS or nm.text in UNARY_FUNCS or nm.text == "t" \
                    or _VAR_RE.match(nm.text):
                raise DslSyntaxError(nm.line, nm.col, f"invalid parameter name {nm.text!r}")
            p.expect("=")
            value_node = p.expression()
            try:
                value = evaluate(value_node, 0.0, np.zeros(n), np.zeros(m)) if not variables(value_node) else None
            except EvalError as exc:
                raise DslSyntaxError(nm.line, nm.col, f"parameter {nm.text}: {exc}") from None
            if value is None:
                raise DslSyntaxError(nm.line, nm.col, "parameter values must be constant")
            params[nm.text] = float(overrides.get(nm.text, value))
            p.params = params
            continue
        em = _EQ_RE.match(tok.text)
        if not em:
            raise DslSyntaxError(tok.line, tok.col, f"unknown identifier {tok.text!r}")
        kind, idx = em.group(1), int(em.group(2))
        limit = n if kind == "f" else m
        if idx > limit:
            raise DimensionMismatch(tok.line, tok.col, f"{tok.text} exceeds declared {'n' if kind == 'f' else 'm'}={limit}")
        if idx in eqs[kind]:
            raise DslSyntaxError(tok.line, tok.col, f"duplicate equation {tok.text}")
        p.advance()
        p.expect("=")
        eqs[kind][idx] = p.expression()
        if p.tok.kind not in ("sep", "eof"):
            raise DslSyntaxError(p.tok.line, p.tok.col, f"unexpected {p.tok.text!r}")
    unknown = set(overrides) - set(params)
    if unknown:
        raise DslSyntaxError(1, 1, f"override for undeclared parameter(s): {', '.join(sorted(unknown))}")
    for kind, limit in (("f", n), ("g", m)):
        missing = [f"{kind}{i}" for i in range(1, limit + 1) if i not in eqs[kind]]
        if missing:
            raise DimensionMismatch(p.tok.line, p.tok.col, f"missing equation(s): {', '.join(missing)}")
    return ModelFile(n, m, tuple(eqs["f"][i] for i in range(1, n + 1)),
                     tuple(eqs["g"][i] for i in range(1, m + 1)), params, name)


# --- evaluation --------------------------------------------------------------

class Dual:
    """Forward-mode dual number ``val + der*eps``."""

    __slots__ = ("val", "der")

    def __init__(self, val, der=0.0):
        self.val = float(val)
        self.der = float(der)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.der!r})"


def _lift(x):
    return x if isinstance(x, Dual) else Dual(x, 0.0)


def _check(x, kind, pos):
    v = x.val if isinstance(x, Dual) else x
    if not math.isfinite(v) or (isinstance(x, Dual) and not math.isfinite(x.der)):
        raise EvalError(kind, pos)
    return x


def _unary(op, x, pos):
    dual = isinstance(x, Dual)
    v = x.val if dual else x
    try:
        if op == "neg":
            return Dual(-v, -x.der) if dual else -v
        if op == "sin":
            val, d = math.sin(v), math.cos(v)
        elif op == "cos":
            val, d = math.cos(v), -math.sin(v)
        elif op == "tan":
            c = math.cos(v)
            if c == 0.0:
                raise EvalError("DomainError", pos, "tan at a pole")
            val, d = math.tan(v), 1.0 / (c * c)
        elif op == "exp":
            val = math.exp(v)
            d = val
        elif op == "ln":
            if v <= 0.0:
                raise EvalError("DomainError", pos, "ln of a non-positive number")
            val, d = math.log(v), 1.0 / v
        elif op == "sqrt":
            if v < 0.0:
                raise EvalError("DomainError", pos, "sqrt of a negative number")
            val = math.sqrt(v)
            if dual and val == 0.0:
                raise EvalError("DomainError", pos, "sqrt not differentiable at 0")
            d = 0.5 / val if val else 0.0
        elif op == "tanh":
            val = math.tanh(v)
            d = 1.0 - val * val
        elif op == "abs":
            val, d = abs(v), (1.0 if v > 0 else -1.0 if v < 0 else 0.0)
        else:
            raise EvalError("UnknownOp", pos, op)
    except OverflowError:
        raise EvalError("Overflow", pos) from None
    if dual:
        return _check(Dual(val, d * x.der), "Overflow", pos)
    return _check(val, "Overflow", pos)


def _binary(op, a, b, pos):
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        try:
            if op == "+":
                r = a + b
            elif op == "-":
                r = a - b
            elif op == "*":
                r = a * b
            elif op == "/":
                if b == 0.0:
                    raise EvalError("DivideByZero", pos)
                r = a / b
            else:
                r = _pow(a, b, pos)
        except OverflowError:
            raise EvalError("Overflow", pos) from None
        return _check(r, "Overflow", pos)
    a, b = _lift(a), _lift(b)
    try:
        if op == "+":
            r = Dual(a.val + b.val, a.der + b.der)
        elif op == "-":
            r = Dual(a.val - b.val, a.der - b.der)
        elif op == "*":
            r = Dual(a.val * b.val, a.der * b.val + a.val * b.der)
        elif op == "/":
            if b.val == 0.0:
                raise EvalError("DivideByZero", pos)
            r = Dual(a.val / b.val, (a.der * b.val - a.val * b.der) / (b.val * b.val))
        else:
            val = _pow(a.val, b.val, pos)
            if b.der == 0.0:
                if a.der == 0.0:
                    d = 0.0
                elif b.val == 0.0:
                    d = 0.0
                else:
                    d = b.val * _pow(a.val, b.val - 1.0, pos) * a.der
            else:
                if a.val <= 0.0:
                    raise EvalError("DomainError", pos, "variable exponent needs a positive base")
                d = val * (b.der * math.log(a.val) + b.val * a.der / a.val)
            r = Dual(val, d)
    except OverflowError:
        raise EvalError("Overflow", pos) from None
    return _check(r, "Overflow", pos)


def _pow(a, b, pos):
    if a < 0.0 and b != math.floor(b):
        raise EvalError("DomainError", pos, "negative base with non-integer exponent")
    if a == 0.0 and b < 0.0:
        raise EvalError("DivideByZero", pos)
    return math.pow(a, b)


def evaluate(node, t, w, z, _pos="0"):
    """Evaluate an expression at (t, w, z). Inputs may hold Dual numbers."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        if node.kind == "t":
            return t
        vec = w if node.kind == "w" else z
        if node.index > len(vec):
            raise EvalError("DimensionMismatch", _pos, f"{node.kind}{node.index}")
        return vec[node.index - 1]
    if isinstance(node, Unary):
        return _unary(node.op, evaluate(node.arg, t, w, z, _pos + ".0"), _pos)
    if isinstance(node, Binary):
        return _binary(node.op, evaluate(node.left, t, w, z, _pos + ".0"),
                       evaluate(node.right, t, w, z, _pos + ".1"), _pos)
    raise TypeError(f"not an expression node: {node!r}")


def eval_dual(node, t, w, z, seed):
    """Value and derivative of ``node`` w.r.t. the seeded variable.

    ``seed`` is ``'t'``, ``('w', k)`` or ``('z', k)`` with 1-based ``k``.
    """
    if seed == "t" or seed == ("t",) or seed == ("t", 0):
        td, wd, zd = Dual(t, 1.0), list(w), list(z)
    else:
        kind, k = seed
        td, wd, zd = t, list(w), list(z)
        target = wd if kind == "w" else zd
        if not 1 <= k <= len(target):
            raise ValueError(f"seed {kind}{k} out of range")
        target[k - 1] = Dual(target[k - 1], 1.0)
    r = evaluate(node, td, wd, zd)
    if isinstance(r, Dual):
        return r.val, r.der
    return float(r), 0.0
