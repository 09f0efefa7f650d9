"""Single-excitation defects in an otherwise polarized nuclear ensemble."""
from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from ..hilbert import SectorBasis, SparseKet

UNIFORM = "uniform"
LORENTZIAN = "lorentzian"
SINGLE_SITE = "single_site"


@dataclass(frozen=True)
class DefectDistribution:
    """Real amplitudes a_j over sites j = 1..N with sum a_j^2 = 1.

    ``j0`` is 1-based; site 1 sits at the dot centre and site N at its edge.
    """
    kind: str
    N: int
    j0: int | None = None
    Gamma: float | None = None
    amplitudes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        N = int(self.N)
        if N < 1:
            raise ValueError("N must be >= 1")
        j = np.arange(1, N + 1)
        if self.kind == UNIFORM:
            a = np.full(N, 1.0 / np.sqrt(N))
        elif self.kind == LORENTZIAN:
            if self.j0 is None or self.Gamma is None:
                raise ValueError("lorentzian defect needs j0 and Gamma")
            if not 1 <= self.j0 <= N:
                raise ValueError(f"j0={self.j0} outside 1..{N}")
            if self.Gamma <= 0:
                raise ValueError("Gamma must be positive")
            h = (self.Gamma / 2.0) ** 2
            a = h / ((j - self.j0) ** 2 + h)
            a = a / np.linalg.norm(a)
        elif self.kind == SINGLE_SITE:
            if self.j0 is None or not 1 <= self.j0 <= N:
                raise ValueError(f"single-site defect needs 1 <= j0 <= {N}")
            a = (j == self.j0).astype(float)
        else:
            raise ValueError(f"unknown defect kind {self.kind!r}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def ket(self) -> SparseKet:
        """The defect as a normalized one-excitation ket."""
        return SparseKet.from_dense(SectorBasis(self.N, 1), self.amplitudes)

    def mixture_weights(self) -> np.ndarray:
        """Squared amplitudes, used as probabilities of an incoherent mixture."""
        return self.amplitudes ** 2


def defect_from_spec(spec, N) -> DefectDistribution:
    """Build a defect from a config entry; j0 and Gamma may be expressions in N."""
    kind = spec.get("kind", UNIFORM)
    j0 = spec.get("j0")
    Gamma = spec.get("Gamma")
    if j0 is not None:
        j0 = int(round(eval_in_N(j0, N)))
    if Gamma is not None:
        Gamma = float(eval_in_N(Gamma, N))
    return DefectDistribution(kind, N, j0=j0, Gamma=Gamma)


def eval_in_N(expr, N):
    """Evaluate a number or a small arithmetic expression such as ``3N/4``.

    Only digits, ``N``, ``+ - * / ( ) .`` and spaces are accepted; an
    implicit product like ``3N`` is read as ``3*N``.
    """
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        return expr
    text = str(expr).replace(" ", "")
    if not text or any(c not in "0123456789N+-*/()." for c in text):
        raise ValueError(f"cannot evaluate {expr!r}")
    out = []
    for i, c in enumerate(text):
        if c == "N" and i and (text[i - 1].isdigit() or text[i - 1] == ")"):
            out.append("*")
        out.append(c)
    tree = ast.parse("".join(out), mode="eval")
    return _eval_node(tree.body, N)


def _eval_node(node, N):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id == "N":
        return N
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, N)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _eval_node(node.left, N), _eval_node(node.right, N)
        ops = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
               ast.Div: np.divide}
        for typ, fn in ops.items():
            if isinstance(node.op, typ):
                return float(fn(a, b)) if isinstance(node.op, ast.Div) else fn(a, b)
    raise ValueError("unsupported expression")
