"""
Expression language for integrands and point predicates.

Grammar (EBNF)::

    expr       = "if" condition "then" expr "else" expr | additive ;
    additive   = term { ("+" | "-") term } ;
    term       = unary { ("*" | "/") unary } ;
    unary      = "-" unary | primary ;
    primary    = NUMBER | RATIONAL | VARIABLE | GALLERY
               | NAME "(" expr { "," expr } ")" | "(" expr ")" ;
    condition  = conjunct { "or" conjunct } ;
    conjunct   = negation { "and" negation } ;
    negation   = "not" negation | comparison | "(" condition ")" ;
    comparison = additive ( "<" | "<=" | ">" | ">=" | "==" | "!=" ) additive ;

    VARIABLE   = "x" digit { digit } ;             (* x1 .. xn *)
    RATIONAL   = digit { digit } "/" digit { digit } ;   (* no spaces *)
    GALLERY    = "gallery:" name [ "?" key "=" int { "&" key "=" int } ] ;

``p/q`` literals stay exact; decimal literals are rounded to the nearest
multiple of ``BRICKINT_PRECISION`` when parsed. Values
stay rational while every operation is rational and become mpmath decimals
after the first transcendental function.
"""
import json
import re

import mpmath

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from . import gallery
from .geometry import Brick
from .utils import get_precision, to_fraction, to_mpf

__all__ = [
    "ParseError",
    "EvaluationError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Piecewise",
    "Compare",
    "BoolOp",
    "Not",
    "GalleryRef",
    "FunctionSpec",
    "Parser",
    "tokenize",
    "parse",
    "parse_expression",
    "parse_condition",
    "evaluate",
    "evaluate_condition",
    "to_text",
    "roundtrip",
]


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class EvaluationError(ValueError):
    pass


# nodes


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple[object, ...]


@dataclass(frozen=True)
class Piecewise:
    condition: object
    then: object
    otherwise: object


@dataclass(frozen=True)
class Compare:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class BoolOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    operand: object


@dataclass(frozen=True)
class GalleryRef:
    reference: str
    dimension: int


FUNCTIONS: Dict[str, int] = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}
KEYWORDS = {"if", "then", "else", "and", "or", "not"}
COMPARISONS = ("<=", ">=", "==", "!=", "<", ">")


# tokenizer


@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER, RATIONAL, NAME, GALLERY, OP, EOF
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<gallery>gallery:[A-Za-z_][A-Za-z0-9_\-]*(\?[A-Za-z0-9_=&\-]*)?)
  | (?P<rational>\d+/\d+(?![\d.]))
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[-+*/(),<>])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> List[Token]:
    tokens = []
    position, line, line_start = 0, 1, 0
    while position < len(text):
        match = _TOKEN_RE.match(text, position)
        column = position - line_start + 1
        if match is None:
            raise ParseError(f"Unexpected character {text[position]!r}", line, column)
        kind = match.lastgroup
        value = match.group()
        if kind == "newline":
            line += 1
            line_start = match.end()
        elif kind != "ws":
            tokens.append(Token(kind.upper(), value, line, column))
        position = match.end()
    tokens.append(Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


# parser


class Parser:
    def __init__(self, text: str, dimension: Optional[int] = None):
        self.tokens = tokenize(text)
        self.position = 0
        self.dimension = dimension
        self.max_index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def error(self, message: str, token: Optional[Token] = None):
        token = token or self.current
        raise ParseError(message, token.line, token.column)

    def advance(self) -> Token:
        token = self.current
        if token.kind != "EOF":
            self.position += 1
        return token

    def accept(self, text: str) -> bool:
        token = self.current
        if token.kind in ("OP", "NAME") and token.text == text:
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        token = self.current
        if token.kind in ("OP", "NAME") and token.text == text:
            return self.advance()
        found = "end of input" if token.kind == "EOF" else repr(token.text)
        self.error(f"Expected {text!r}, found {found}")

    def finish(self):
        if self.current.kind != "EOF":
            self.error(f"Unexpected {self.current.text!r}")

    def expression(self):
        if self.accept("if"):
            condition = self.condition()
            self.expect("then")
            then = self.expression()
            self.expect("else")
            otherwise = self.expression()
            return Piecewise(condition, then, otherwise)
        return self.additive()

    def additive(self):
        node = self.term()
        while self.current.kind == "OP" and self.current.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.current.kind == "OP" and self.current.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        token = self.current
        if token.kind == "RATIONAL":
            self.advance()
            numerator, denominator = token.text.split("/")
            if int(denominator) == 0:
                self.error("Zero denominator in rational literal", token)
            return Num(Fraction(int(numerator), int(denominator)))
        if token.kind == "NUMBER":
            self.advance()
            quantum = get_precision()
            return Num(round(Fraction(token.text) / quantum) * quantum)
        if token.kind == "GALLERY":
            self.advance()
            try:
                fixture = gallery.resolve(token.text)
            except ValueError as e:
                self.error(str(e), token)
            self.max_index = max(self.max_index, fixture.dimension)
            return GalleryRef(fixture.reference, fixture.dimension)
        if token.kind == "NAME":
            if token.text in KEYWORDS:
                self.error(f"Unexpected keyword {token.text!r}", token)
            match = re.fullmatch(r"x(\d+)", token.text)
            if match:
                self.advance()
                index = int(match.group(1))
                if index < 1:
                    self.error("Variables are numbered from x1", token)
                if self.dimension is not None and index > self.dimension:
                    self.error(
                        f"Variable {token.text} exceeds dimension {self.dimension}", token
                    )
                self.max_index = max(self.max_index, index)
                return Var(index)
            if token.text not in FUNCTIONS:
                self.error(f"Unknown identifier {token.text!r}", token)
            self.advance()
            self.expect("(")
            args = [self.expression()]
            while self.accept(","):
                args.append(self.expression())
            self.expect(")")
            if len(args) != FUNCTIONS[token.text]:
                self.error(
                    f"{token.text} takes {FUNCTIONS[token.text]} argument(s), got {len(args)}",
                    token,
                )
            return Call(token.text, tuple(args))
        if self.accept("("):
            node = self.expression()
            self.expect(")")
            return node
        found = "end of input" if token.kind == "EOF" else repr(token.text)
        self.error(f"Unexpected {found}")

    def condition(self):
        node = self.conjunct()
        while self.accept("or"):
            node = BoolOp("or", node, self.conjunct())
        return node

    def conjunct(self):
        node = self.negation()
        while self.accept("and"):
            node = BoolOp("and", node, self.negation())
        return node

    def negation(self):
        if self.accept("not"):
            return Not(self.negation())
        if self.current.kind == "OP" and self.current.text == "(":
            saved = (self.position, self.max_index)
            try:
                return self.comparison()
            except ParseError:
                self.position, self.max_index = saved
            self.advance()
            node = self.condition()
            self.expect(")")
            return node
        return self.comparison()

    def comparison(self):
        left = self.additive()
        token = self.current
        if token.kind != "OP" or token.text not in COMPARISONS:
            found = "end of input" if token.kind == "EOF" else repr(token.text)
            self.error(f"Expected a comparison, found {found}")
        self.advance()
        return Compare(token.text, left, self.additive())


# evaluation

Value = Union[Fraction, mpmath.mpf]


def _coerce(a: Value, b: Value) -> Tuple[Value, Value]:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a, b
    return to_mpf(a), to_mpf(b)


def _normalise(value) -> Value:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, bool)):
        return Fraction(int(value))
    if isinstance(value, float):
        return to_fraction(value)
    return to_mpf(value)


def _call(name: str, args: List[Value]) -> Value:
    if name == "abs":
        return abs(args[0])
    if name in ("min", "max"):
        a, b = _coerce(args[0], args[1])
        return min(a, b) if name == "min" else max(a, b)
    x = to_mpf(args[0])
    if name == "log" and x <= 0:
        raise EvaluationError(f"log of nonpositive value {x}")
    if name == "sqrt" and x < 0:
        raise EvaluationError(f"sqrt of negative value {x}")
    if name == "tan" and mpmath.cos(x) == 0:
        raise EvaluationError(f"tan undefined at {x}")
    return getattr(mpmath, name)(x)


def evaluate(node, point: Sequence) -> Value:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.index > len(point):
            raise EvaluationError(f"x{node.index} needs a point of dimension {node.index}")
        return _normalise(point[node.index - 1])
    if isinstance(node, Neg):
        return -evaluate(node.operand, point)
    if isinstance(node, BinOp):
        a, b = _coerce(evaluate(node.left, point), evaluate(node.right, point))
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise EvaluationError("Division by zero")
        return a / b
    if isinstance(node, Call):
        return _call(node.name, [evaluate(arg, point) for arg in node.args])
    if isinstance(node, Piecewise):
        branch = node.then if evaluate_condition(node.condition, point) else node.otherwise
        return evaluate(branch, point)
    if isinstance(node, GalleryRef):
        if node.dimension > len(point):
            raise EvaluationError(f"{node.reference} needs {node.dimension} coordinates")
        return _normalise(_fixture(node.reference)(tuple(point[: node.dimension])))
    raise EvaluationError(f"Cannot evaluate {type(node).__name__} as a number")


def evaluate_condition(node, point: Sequence) -> bool:
    if isinstance(node, Compare):
        a, b = _coerce(evaluate(node.left, point), evaluate(node.right, point))
        return {
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
            "==": a == b,
            "!=": a != b,
        }[node.op]
    if isinstance(node, BoolOp):
        if node.op == "and":
            return evaluate_condition(node.left, point) and evaluate_condition(node.right, point)
        return evaluate_condition(node.left, point) or evaluate_condition(node.right, point)
    if isinstance(node, Not):
        return not evaluate_condition(node.operand, point)
    raise EvaluationError(f"Cannot evaluate {type(node).__name__} as a condition")


_FIXTURE_CACHE: Dict[str, gallery.GalleryFunction] = {}


def _fixture(reference: str) -> gallery.GalleryFunction:
    fixture = _FIXTURE_CACHE.get(reference)
    if fixture is None:
        fixture = gallery.resolve(reference)
        _FIXTURE_CACHE[reference] = fixture
    return fixture


# printing

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _precedence(node) -> int:
    if isinstance(node, Piecewise):
        return 0
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return 3
    return 4


def _wrap(node, minimum: int) -> str:
    text = to_text(node)
    return f"({text})" if _precedence(node) < minimum else text


def _condition_precedence(node) -> int:
    if isinstance(node, BoolOp):
        return 1 if node.op == "or" else 2
    if isinstance(node, Not):
        return 3
    return 4


def _condition_text(node) -> str:
    if isinstance(node, Compare):
        return f"{_wrap(node.left, 1)} {node.op} {_wrap(node.right, 1)}"
    if isinstance(node, BoolOp):
        level = _condition_precedence(node)
        left = _condition_text(node.left)
        if _condition_precedence(node.left) < level:
            left = f"({left})"
        right = _condition_text(node.right)
        if _condition_precedence(node.right) <= level:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Not):
        inner = _condition_text(node.operand)
        if _condition_precedence(node.operand) < 3:
            inner = f"({inner})"
        return f"not {inner}"
    raise TypeError(f"Not a condition: {node!r}")


def to_text(node) -> str:
    """Print a tree with the fewest parentheses that parse back to it."""
    if isinstance(node, Num):
        value = node.value
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, GalleryRef):
        return node.reference
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, 3)
    if isinstance(node, BinOp):
        level = _PRECEDENCE[node.op]
        return f"{_wrap(node.left, level)} {node.op} {_wrap(node.right, level + 1)}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(arg) for arg in node.args)})"
    if isinstance(node, Piecewise):
        return (
            f"if {_condition_text(node.condition)} then {to_text(node.then)}"
            f" else {to_text(node.otherwise)}"
        )
    if isinstance(node, (Compare, BoolOp, Not)):
        return _condition_text(node)
    raise TypeError(f"Not an expression node: {node!r}")


# specs


@dataclass(frozen=True)
class FunctionSpec:
    dimension: int
    ambient: Brick
    body: object

    def evaluate(self, point: Sequence) -> Value:
        self.ambient.check_dimension(len(point))
        return evaluate(self.body, point)

    def __call__(self, point: Sequence) -> Value:
        return self.evaluate(point)

    @property
    def text(self) -> str:
        return to_text(self.body)

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension,
            "ambient": self.ambient.to_json(),
            "expr": self.text,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FunctionSpec":
        if "expr" not in data:
            raise ValueError("Function spec needs an 'expr' entry")
        ambient = Brick.from_json(data["ambient"]) if "ambient" in data else None
        spec = parse(data["expr"], ambient=ambient)
        if "dimension" in data and int(data["dimension"]) != spec.dimension:
            raise ValueError(
                f"Declared dimension {data['dimension']} does not match {spec.dimension}"
            )
        return spec

    @classmethod
    def from_file(cls, path: str) -> "FunctionSpec":
        with open(path) as f:
            return cls.from_json(json.load(f))


def parse_expression(text: str, dimension: Optional[int] = None) -> Tuple[object, int]:
    parser = Parser(text, dimension)
    node = parser.expression()
    parser.finish()
    return node, max(parser.max_index, 1)


def parse(text: str, ambient: Optional[Brick] = None) -> FunctionSpec:
    """
    Parse an expression into a ``FunctionSpec``. Without ``ambient`` the
    dimension is inferred from the variables used; the ambient brick is then
    the one of a lone gallery reference or the unit cube.
    """
    node, dimension = parse_expression(
        text, None if ambient is None else ambient.dimension
    )
    if ambient is None:
        if isinstance(node, GalleryRef):
            ambient = _fixture(node.reference).ambient
        else:
            ambient = Brick.unit(dimension)
    return FunctionSpec(dimension=ambient.dimension, ambient=ambient, body=node)


def parse_condition(text: str, dimension: Optional[int] = None) -> Callable[[Sequence], bool]:
    """Parse a condition into a point predicate."""
    parser = Parser(text, dimension)
    node = parser.condition()
    parser.finish()

    def predicate(point: Sequence) -> bool:
        return evaluate_condition(node, point)

    predicate.node = node
    return predicate


def roundtrip(spec: FunctionSpec) -> FunctionSpec:
    """Print and re-parse; the result has a structurally equal body."""
    return parse(to_text(spec.body), ambient=spec.ambient)
