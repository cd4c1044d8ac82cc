"""Two-level designs, centering/scaling, and the classical heuristic criteria.

Conventions
-----------
* A design is an ``n x p`` matrix with entries exactly +-1. Column indices are
  0-based everywhere in this package.
* ``S = L^T L`` with ``L = (1 | X)``; the heuristic criteria summarize the
  off-diagonal entries ``s_ij`` for ``0 <= i < j <= p`` (index 0 is the
  intercept column).
* UE(s^2) and UE(s) are reported in the mean / mean-square convention,
  dividing the raw sums by ``binom(p+1, 2)``; Var(s) is the resulting
  variance ``UE(s^2) - UE(s)^2``. Raw sums are a single multiplication away
  and the convention is applied in exactly one place (`_PAIR_COUNT`).
* Constant (zero-variance) columns are legal: the optimal local designs use
  them deliberately. They scale to an all-zero column of F with V entry 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from .errors import DegenerateSupport, InputError, SingularCA, ZeroUe2

__all__ = [
    "Design",
    "StandardizedDesign",
    "HeuristicSummary",
    "SupportViews",
    "standardize",
    "heuristics",
    "ue2_efficiency",
    "submatrix_views",
    "load_design_csv",
    "save_design_csv",
    "random_design",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class Design:
    """An n x p matrix of +-1 run settings."""

    X: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.X)
        if X.ndim != 2:
            raise InputError("design matrix must be two-dimensional")
        if not np.all(np.isin(X, (-1, 1))):
            raise InputError("design entries must be exactly +1 or -1")
        X = X.astype(np.int8)
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise InputError("design needs n >= 2 runs and p >= 1 factors")
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def flip_columns(self, signs: np.ndarray) -> "Design":
        """Design with columns multiplied by the +-1 vector ``signs``."""
        signs = np.asarray(signs, dtype=np.int8)
        if signs.shape != (self.p,) or not np.all(np.isin(signs, (-1, 1))):
            raise InputError("signs must be a +-1 vector of length p")
        return Design(self.X * signs[None, :])

    def permute_columns(self, order) -> "Design":
        return Design(self.X[:, np.asarray(order, dtype=int)])


@dataclass(frozen=True)
class StandardizedDesign:
    """Centered/scaled model matrix and its correlation structure.

    F has centered columns scaled so that (1/n) F_j' F_j = 1 on non-degenerate
    columns; C = (1/n) F'F; V holds the centered column variances (each in
    [0, 1], zero exactly for constant columns, whose F column is identically
    zero).
    """

    F: np.ndarray
    C: np.ndarray
    V: np.ndarray
    degenerate_columns: frozenset[int]
    n: int

    @property
    def p(self) -> int:
        return self.V.shape[0]


@dataclass(frozen=True)
class HeuristicSummary:
    """UE(s^2), UE(s), Var(s) in the mean convention; E(s^2) when balanced."""

    ue_s2: float
    ue_s: float
    var_s: float
    e_s2: float | None = None
    ue2_efficiency: float | None = None


@dataclass(frozen=True)
class SupportViews:
    """Blocks of C and V for one active set A (all indices 0-based)."""

    support: tuple[int, ...]
    inactive: tuple[int, ...]
    C_A: np.ndarray
    C_IA: np.ndarray
    C_I: np.ndarray
    V_A: np.ndarray
    F_A: np.ndarray
    inactive_degenerate: tuple[int, ...]


def standardize(design: Design) -> StandardizedDesign:
    """Center and scale: F = (I - P1) X V^{-1/2} with V the centered variances.

    Constant columns are detected exactly (all entries equal) and mapped to
    zero columns of F with V = 0.
    """
    X = design.X.astype(float)
    n = design.n
    means = X.mean(axis=0)
    centered = X - means[None, :]
    degenerate = [j for j in range(design.p) if np.all(design.X[:, j] == design.X[0, j])]
    V = 1.0 - means**2
    F = np.zeros_like(centered)
    for j in range(design.p):
        if j in degenerate:
            V[j] = 0.0
            continue
        F[:, j] = centered[:, j] / np.sqrt(V[j])
    C = F.T @ F / n
    return StandardizedDesign(
        F=F, C=C, V=V, degenerate_columns=frozenset(degenerate), n=n
    )


def _s_matrix(design: Design) -> np.ndarray:
    L = np.hstack([np.ones((design.n, 1), dtype=np.int64), design.X.astype(np.int64)])
    return L.T @ L


def heuristics(design: Design) -> HeuristicSummary:
    """UE(s^2), UE(s), Var(s) over all pairs 0 <= i < j <= p, plus E(s^2).

    E(s^2) (over factor pairs only) is reported only for column-balanced
    designs (X' 1 = 0), matching its classical definition.
    """
    S = _s_matrix(design)
    p1 = design.p + 1
    iu = np.triu_indices(p1, k=1)
    s = S[iu].astype(float)
    pairs = comb(p1, 2)
    ue_s2 = float(np.sum(s**2) / pairs)
    ue_s = float(np.sum(s) / pairs)
    var_s = ue_s2 - ue_s**2
    e_s2 = None
    if np.all(S[0, 1:] == 0):
        iu_f = np.triu_indices(design.p, k=1)
        sf = S[1:, 1:][iu_f].astype(float)
        e_s2 = float(np.sum(sf**2) / comb(design.p, 2)) if design.p >= 2 else 0.0
    return HeuristicSummary(ue_s2=ue_s2, ue_s=ue_s, var_s=var_s, e_s2=e_s2)


def ue2_efficiency(design: Design, reference: float) -> float:
    """UE*(s^2) / UE(s^2) for this design, given the reference optimum."""
    ue2 = heuristics(design).ue_s2
    if ue2 == 0.0:
        if reference == 0.0:
            return 1.0
        raise ZeroUe2("UE(s^2) is zero; efficiency undefined for positive reference")
    return float(reference) / ue2


def submatrix_views(std: StandardizedDesign, support) -> SupportViews:
    """Blocks (C_A, C_IA, C_I, V_A, F_A) for an active set.

    Raises :class:`DegenerateSupport` if the support touches a constant
    column and :class:`SingularCA` if C_A has condition number above 1e12
    (the criterion is undefined for aliased active sets).
    """
    support = tuple(int(j) for j in support)
    if len(set(support)) != len(support):
        raise InputError("support contains duplicate indices")
    if any(j < 0 or j >= std.p for j in support):
        raise InputError("support index out of range")
    touched = [j for j in support if j in std.degenerate_columns]
    if touched:
        raise DegenerateSupport(f"support touches degenerate columns {touched}")
    inactive = tuple(j for j in range(std.p) if j not in support)
    a = np.asarray(support, dtype=int)
    i = np.asarray(inactive, dtype=int)
    C_A = std.C[np.ix_(a, a)]
    if C_A.size:
        if np.linalg.cond(C_A) > _COND_LIMIT:
            raise SingularCA(f"C_A condition number exceeds {_COND_LIMIT:g}")
    C_IA = std.C[np.ix_(i, a)] if len(i) else np.zeros((0, len(a)))
    C_I = std.C[np.ix_(i, i)] if len(i) else np.zeros((0, 0))
    inactive_degenerate = tuple(j for j in inactive if j in std.degenerate_columns)
    return SupportViews(
        support=support,
        inactive=inactive,
        C_A=C_A,
        C_IA=C_IA,
        C_I=C_I,
        V_A=std.V[a],
        F_A=std.F[:, a],
        inactive_degenerate=inactive_degenerate,
    )


def load_design_csv(path) -> Design:
    """Load a design from CSV: one row per run, entries '1' or '-1', no header."""
    rows = []
    text = Path(path).read_text()
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        row = []
        for tok in line.split(","):
            tok = tok.strip()
            if tok == "1":
                row.append(1)
            elif tok == "-1":
                row.append(-1)
            else:
                raise InputError(f"{path}:{ln}: invalid token {tok!r} (need '1' or '-1')")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: empty design file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InputError(f"{path}: ragged rows (widths {sorted(widths)})")
    return Design(np.array(rows, dtype=np.int8))


def save_design_csv(design: Design, path) -> None:
    lines = [",".join(str(int(v)) for v in row) for row in design.X]
    Path(path).write_text("\n".join(lines) + "\n")


def random_design(n: int, p: int, rng: np.random.Generator) -> Design:
    """Uniformly random +-1 design."""
    return Design(rng.integers(0, 2, size=(n, p)).astype(np.int8) * 2 - 1)
