"""First-order syntactic matching of strategy patterns against entailments.

`?x` occurrences bind; bare occurrences must agree with the binding found so
far.  No matching modulo arithmetic or commutativity: nth(i - 0, l) only
matches nth(i - 0, l).  Enumeration is lazy and deterministic: patterns in
declaration order, candidate conjuncts in heap insertion order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

from .core import (
    Apply,
    Arith,
    Bin,
    DataAt,
    Emp,
    Entailment,
    Eq,
    FieldAddr,
    IntLit,
    Not,
    PredP,
    PredS,
    PureFormula,
    Rel,
    SpatialAtom,
    Term,
    TrueF,
    Var,
)
from .frontend import Pattern, PatternAtom, Strategy

LEFT = "left"
RIGHT = "right"
PURE = "pure"
SPATIAL = "spatial"


@dataclass(frozen=True, slots=True)
class PatternSubstitution:
    """bindings: pattern variable -> matched term; used_conjuncts: pattern
    index -> (side, kind, conjunct index), injective on occurrences."""

    bindings: dict[str, Term]
    used_conjuncts: dict[int, tuple[str, str, int]]


def _match_term(pat: Term, target: Term, m: dict[str, Term], binders: frozenset[str]) -> dict[str, Term] | None:
    match pat:
        case Var(name):
            if name in m:
                return m if m[name] == target else None
            if name in binders:
                m2 = dict(m)
                m2[name] = target
                return m2
            return m if pat == target else None
        case IntLit():
            return m if pat == target else None
        case FieldAddr(base, fld):
            if isinstance(target, FieldAddr) and target.field == fld:
                return _match_term(base, target.base, m, binders)
            return None
        case Apply(fn, args):
            if isinstance(target, Apply) and target.fn == fn and len(target.args) == len(args):
                return _match_seq(args, target.args, m, binders)
            return None
        case Arith(op, l, r):
            if isinstance(target, Arith) and target.op == op:
                m2 = _match_term(l, target.left, m, binders)
                if m2 is None:
                    return None
                return _match_term(r, target.right, m2, binders)
            return None
    raise TypeError(f"match: unsupported pattern term {pat!r}")


def _match_seq(pats, targets, m: dict[str, Term], binders: frozenset[str]) -> dict[str, Term] | None:
    for p, t in zip(pats, targets):
        m = _match_term(p, t, m, binders)
        if m is None:
            return None
    return m


def _match_formula(
    pat: PureFormula | SpatialAtom,
    target: PureFormula | SpatialAtom,
    m: dict[str, Term],
    binders: frozenset[str],
) -> dict[str, Term] | None:
    match pat:
        case TrueF():
            return m if isinstance(target, TrueF) else None
        case Eq(l, r):
            if isinstance(target, Eq):
                m2 = _match_term(l, target.left, m, binders)
                if m2 is None:
                    return None
                return _match_term(r, target.right, m2, binders)
            return None
        case Rel(op, l, r):
            if isinstance(target, Rel) and target.op == op:
                m2 = _match_term(l, target.left, m, binders)
                if m2 is None:
                    return None
                return _match_term(r, target.right, m2, binders)
            return None
        case Not(inner):
            if isinstance(target, Not):
                return _match_formula(inner, target.inner, m, binders)
            return None
        case Bin(op, l, r):
            if isinstance(target, Bin) and target.op == op:
                m2 = _match_formula(l, target.left, m, binders)
                if m2 is None:
                    return None
                return _match_formula(r, target.right, m2, binders)
            return None
        case PredP(name, args):
            if isinstance(target, PredP) and target.name == name and len(target.args) == len(args):
                return _match_seq(args, target.args, m, binders)
            return None
        case Emp():
            return m if isinstance(target, Emp) else None
        case DataAt(addr, value):
            if isinstance(target, DataAt):
                m2 = _match_term(addr, target.addr, m, binders)
                if m2 is None:
                    return None
                return _match_term(value, target.value, m2, binders)
            return None
        case PredS(name, args):
            if isinstance(target, PredS) and target.name == name and len(target.args) == len(args):
                return _match_seq(args, target.args, m, binders)
            return None
    raise TypeError(f"match: unsupported pattern formula {pat!r}")


def match_atom(
    pat: PatternAtom,
    target: PureFormula | SpatialAtom,
    partial: Mapping[str, Term],
) -> dict[str, Term] | None:
    """Match one pattern conjunct against one conjunct occurrence, extending
    the partial binding.  Returns the extended mapping or None."""
    if isinstance(pat.formula, PureFormula) != isinstance(target, PureFormula):
        return None
    return _match_formula(pat.formula, target, dict(partial), frozenset(pat.binders))


def _candidates(e: Entailment, side: str, kind: str) -> tuple:
    heap = e.lhs if side == LEFT else e.rhs
    return heap.pures if kind == PURE else heap.spatials


def match_strategy(s: Strategy, e: Entailment) -> Iterator[PatternSubstitution]:
    """All substitutions matching the strategy's patterns against distinct
    conjunct occurrences of the entailment, lazily, in deterministic order."""
    patterns: list[Pattern] = list(s.patterns)
    existential_names = set(e.existentials)

    def ok_exists(m: dict[str, Term]) -> bool:
        for p in patterns:
            for b in p.exists_binders:
                t = m.get(b)
                if not (isinstance(t, Var) and t.name in existential_names):
                    return False
        return True

    def go(i: int, m: dict[str, Term], used: dict[int, tuple[str, str, int]]) -> Iterator[PatternSubstitution]:
        if i == len(patterns):
            if ok_exists(m):
                yield PatternSubstitution(dict(m), dict(used))
            return
        p = patterns[i]
        kind = PURE if isinstance(p.atom.formula, PureFormula) else SPATIAL
        occupied = set(used.values())
        for idx, conj in enumerate(_candidates(e, p.side, kind)):
            occ = (p.side, kind, idx)
            if occ in occupied:
                continue
            m2 = match_atom(p.atom, conj, m)
            if m2 is None:
                continue
            used[i] = occ
            yield from go(i + 1, m2, used)
            del used[i]

    return go(0, {}, {})
