"""Restricted arithmetic expressions for configuration fields.

Data densities, coefficient entries, kernel perturbations and exponent
fields may be given as strings over the node coordinates.  Expressions are
parsed once with :mod:`ast`, checked against a whitelist and evaluated with
numpy, so they vectorize over node arrays and cannot run arbitrary code.

Available names:

``x``, ``y``
    node coordinates (``y`` only for two-dimensional domains);
``rho``
    distance to the origin, ``|x|``;
``r``
    distance to the domain center (filled in by the caller);
``pi``, ``e``
    the usual constants.

Available functions: ``abs``, ``sqrt``, ``exp``, ``log``, ``sin``, ``cos``,
``tan``, ``pow``, ``hypot``, ``minimum``, ``maximum``.
"""

from __future__ import annotations

import ast

import numpy as np

_FUNCTIONS = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "pow": np.power,
    "hypot": np.hypot,
    "minimum": np.minimum,
    "maximum": np.maximum,
}

_CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

_UNARYOPS = {ast.UAdd: lambda v: v, ast.USub: np.negative}


class ExpressionError(ValueError):
    """Raised when an expression uses names or syntax outside the whitelist."""


class Expression:
    """A compiled, numpy-vectorized arithmetic expression."""

    def __init__(self, source: str):
        self.source = source
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._validate(tree.body)
        self._tree = tree.body

    def _validate(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ExpressionError(f"literal {node.value!r} is not numeric")
        elif isinstance(node, ast.Name):
            pass  # resolved at evaluation time against the environment
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            self._validate(node.left)
            self._validate(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARYOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            self._validate(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                raise ExpressionError("only whitelisted function calls are allowed")
            if node.keywords:
                raise ExpressionError("keyword arguments are not allowed")
            for arg in node.args:
                self._validate(arg)
        else:
            raise ExpressionError(f"syntax {type(node).__name__} not allowed")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            if node.id in _CONSTANTS:
                return _CONSTANTS[node.id]
            raise ExpressionError(
                f"unknown name {node.id!r} in {self.source!r} "
                f"(available: {sorted(env)})"
            )
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](
                self._eval(node.left, env), self._eval(node.right, env)
            )
        if isinstance(node, ast.UnaryOp):
            return _UNARYOPS[type(node.op)](self._eval(node.operand, env))
        if isinstance(node, ast.Call):
            args = [self._eval(a, env) for a in node.args]
            return _FUNCTIONS[node.func.id](*args)
        raise AssertionError(f"unvalidated node {node!r}")

    def __call__(self, env):
        return self._eval(self._tree, env)

    def __repr__(self):
        return f"Expression({self.source!r})"


def point_environment(points, center=None):
    """Build the name environment for an ``(M, N)`` array of points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    env = {"x": points[:, 0], "rho": np.linalg.norm(points, axis=1)}
    if points.shape[1] > 1:
        env["y"] = points[:, 1]
    if center is not None:
        env["r"] = np.linalg.norm(points - np.asarray(center, dtype=float), axis=1)
    return env


class Field:
    """A scalar field over points: a constant, an expression, or a callable."""

    def __init__(self, spec, center=None):
        self.center = None if center is None else tuple(center)
        if isinstance(spec, Field):
            self._kind, self._payload = spec._kind, spec._payload
            if spec.center is not None:
                self.center = spec.center
        elif isinstance(spec, Expression):
            self._kind, self._payload = "expr", spec
        elif isinstance(spec, str):
            self._kind, self._payload = "expr", Expression(spec)
        elif isinstance(spec, (int, float)):
            self._kind, self._payload = "const", float(spec)
        elif callable(spec):
            self._kind, self._payload = "call", spec
        else:
            raise ExpressionError(f"cannot interpret {spec!r} as a field")

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._kind == "const":
            return np.full(points.shape[0], self._payload)
        if self._kind == "call":
            return np.asarray(self._payload(points), dtype=float)
        env = point_environment(points, self.center)
        value = self._payload(env)
        return np.broadcast_to(np.asarray(value, dtype=float), (points.shape[0],)).copy()

    def describe(self):
        if self._kind == "const":
            return repr(self._payload)
        if self._kind == "expr":
            return self._payload.source
        return getattr(self._payload, "__name__", "<callable>")

    def __repr__(self):
        return f"Field({self.describe()})"
