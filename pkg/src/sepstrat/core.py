"""Core syntax of symbolic-heap entailments and assertion-level formulas.

Terms, pure formulas, spatial atoms, symbolic heaps, entailments and the
assertion language (with separating conjunction, magic wand and quantifiers)
are immutable dataclasses.  Conjunct collections have multiset semantics but
keep insertion order so that matching and printing stay deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

ARITH_OPS = ("+", "-", "*")
REL_OPS = ("!=", "<", "<=", ">", ">=")
BIN_OPS = ("&&", "||", "->", "<->")

SPATIAL = "spatial"
PURE = "pure"
FUNC = "func"

# Identifiers with fixed meaning in the surface syntax; they may not be
# declared in a signature.
RESERVED = frozenset({"emp", "true", "data_at", "field_addr"})


class CaptureError(Exception):
    """A substitution would capture a free variable under a binder."""


class DuplicateDeclarationError(Exception):
    """A signature entry clashes with an earlier or built-in declaration."""


# ---------------------------------------------------------------------------
# Terms


class Term:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True, slots=True)
class Var(Term):
    name: str


@dataclass(frozen=True, slots=True)
class FieldAddr(Term):
    base: Term
    field: str


@dataclass(frozen=True, slots=True)
class Apply(Term):
    fn: str
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True, slots=True)
class Arith(Term):
    op: str  # one of ARITH_OPS
    left: Term
    right: Term


# ---------------------------------------------------------------------------
# Pure formulas


class PureFormula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class TrueF(PureFormula):
    pass


@dataclass(frozen=True, slots=True)
class Eq(PureFormula):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Rel(PureFormula):
    op: str  # one of REL_OPS
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Not(PureFormula):
    inner: PureFormula


@dataclass(frozen=True, slots=True)
class Bin(PureFormula):
    op: str  # one of BIN_OPS
    left: PureFormula
    right: PureFormula


@dataclass(frozen=True, slots=True)
class PredP(PureFormula):
    name: str
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))


# ---------------------------------------------------------------------------
# Spatial atoms


class SpatialAtom:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Emp(SpatialAtom):
    pass


@dataclass(frozen=True, slots=True)
class DataAt(SpatialAtom):
    addr: Term
    value: Term


@dataclass(frozen=True, slots=True)
class PredS(SpatialAtom):
    name: str
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))


# ---------------------------------------------------------------------------
# Heaps and entailments


@dataclass(frozen=True, slots=True)
class SymbolicHeap:
    """Pure and spatial conjunct multisets; emp conjuncts are dropped eagerly."""

    pures: tuple[PureFormula, ...] = ()
    spatials: tuple[SpatialAtom, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pures", tuple(self.pures))
        object.__setattr__(
            self, "spatials", tuple(s for s in self.spatials if not isinstance(s, Emp))
        )

    @property
    def empty(self) -> bool:
        return not self.pures and not self.spatials


@dataclass(frozen=True, slots=True)
class Entailment:
    universals: tuple[str, ...]
    lhs: SymbolicHeap
    existentials: tuple[str, ...]
    rhs: SymbolicHeap

    def __post_init__(self) -> None:
        object.__setattr__(self, "universals", tuple(self.universals))
        object.__setattr__(self, "existentials", tuple(self.existentials))


# ---------------------------------------------------------------------------
# Assertions


class Assertion:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class PureA(Assertion):
    formula: PureFormula


@dataclass(frozen=True, slots=True)
class SpatialA(Assertion):
    atom: SpatialAtom


@dataclass(frozen=True, slots=True)
class SepConj(Assertion):
    parts: tuple[Assertion, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parts", tuple(self.parts))


@dataclass(frozen=True, slots=True)
class AndA(Assertion):
    parts: tuple[Assertion, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parts", tuple(self.parts))


@dataclass(frozen=True, slots=True)
class Wand(Assertion):
    left: Assertion
    right: Assertion


@dataclass(frozen=True, slots=True)
class ForallA(Assertion):
    vars: tuple[str, ...]
    body: Assertion

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", tuple(self.vars))


@dataclass(frozen=True, slots=True)
class ExistsA(Assertion):
    vars: tuple[str, ...]
    body: Assertion

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", tuple(self.vars))


@dataclass(frozen=True, slots=True)
class SoundnessCondition:
    hypothesis: Assertion
    conclusion: Assertion
    free_vars: tuple[str, ...]


Syntax = Union[Term, PureFormula, SpatialAtom, SymbolicHeap, Assertion]


# ---------------------------------------------------------------------------
# Signature


@dataclass
class Signature:
    """Declared predicate and function symbols: name -> (kind, arity)."""

    entries: dict[str, tuple[str, int]]

    def __init__(self, entries: Mapping[str, tuple[str, int]] | None = None) -> None:
        self.entries = dict(entries) if entries else {}

    def declare(self, name: str, kind: str, arity: int) -> None:
        if kind not in (SPATIAL, PURE, FUNC):
            raise ValueError(f"unknown declaration kind {kind!r}")
        if arity < 0:
            raise ValueError("arity must be non-negative")
        if name in RESERVED:
            raise DuplicateDeclarationError(f"{name} is a built-in and cannot be redeclared")
        if name in self.entries:
            raise DuplicateDeclarationError(f"{name} is already declared")
        self.entries[name] = (kind, arity)

    def kind_of(self, name: str) -> str | None:
        e = self.entries.get(name)
        return e[0] if e else None

    def arity_of(self, name: str) -> int | None:
        e = self.entries.get(name)
        return e[1] if e else None


# ---------------------------------------------------------------------------
# Free variables


def free_vars(x: Syntax) -> set[str]:
    match x:
        case IntLit():
            return set()
        case Var(name):
            return {name}
        case FieldAddr(base, _):
            return free_vars(base)
        case Apply(_, args) | PredP(_, args) | PredS(_, args):
            out: set[str] = set()
            for a in args:
                out |= free_vars(a)
            return out
        case Arith(_, l, r) | Eq(l, r) | Rel(_, l, r) | DataAt(l, r):
            return free_vars(l) | free_vars(r)
        case TrueF() | Emp():
            return set()
        case Not(inner):
            return free_vars(inner)
        case Bin(_, l, r):
            return free_vars(l) | free_vars(r)
        case SymbolicHeap(pures, spatials):
            out = set()
            for f in itertools.chain(pures, spatials):
                out |= free_vars(f)
            return out
        case PureA(f):
            return free_vars(f)
        case SpatialA(s):
            return free_vars(s)
        case SepConj(parts) | AndA(parts):
            out = set()
            for p in parts:
                out |= free_vars(p)
            return out
        case Wand(l, r):
            return free_vars(l) | free_vars(r)
        case ForallA(vs, body) | ExistsA(vs, body):
            return free_vars(body) - set(vs)
    raise TypeError(f"free_vars: unsupported value {x!r}")


def occurring_vars(x: Syntax) -> list[str]:
    """Free variables in first-occurrence order (left-to-right traversal)."""
    seen: list[str] = []

    def walk(y: Syntax, bound: frozenset[str]) -> None:
        match y:
            case IntLit() | TrueF() | Emp():
                return
            case Var(name):
                if name not in bound and name not in seen:
                    seen.append(name)
            case FieldAddr(base, _):
                walk(base, bound)
            case Apply(_, args) | PredP(_, args) | PredS(_, args):
                for a in args:
                    walk(a, bound)
            case Arith(_, l, r) | Eq(l, r) | Rel(_, l, r) | DataAt(l, r) | Bin(_, l, r):
                walk(l, bound)
                walk(r, bound)
            case Not(inner):
                walk(inner, bound)
            case SymbolicHeap(pures, spatials):
                for f in itertools.chain(pures, spatials):
                    walk(f, bound)
            case PureA(f):
                walk(f, bound)
            case SpatialA(s):
                walk(s, bound)
            case SepConj(parts) | AndA(parts):
                for p in parts:
                    walk(p, bound)
            case Wand(l, r):
                walk(l, bound)
                walk(r, bound)
            case ForallA(vs, body) | ExistsA(vs, body):
                walk(body, bound | frozenset(vs))
            case _:
                raise TypeError(f"occurring_vars: unsupported value {y!r}")

    walk(x, frozenset())
    return seen


# ---------------------------------------------------------------------------
# Fresh names


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    """Return base, or base with the smallest prime-suffix not in avoid."""
    taken = set(avoid)
    if base not in taken:
        return base
    for k in itertools.count(1):
        cand = f"{base}'{k}"
        if cand not in taken:
            return cand
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Substitution


def substitute(x: Syntax, mapping: Mapping[str, Term], *, rename_on_capture: bool = True) -> Syntax:
    """Capture-avoiding simultaneous substitution of terms for free variables.

    Binders that would capture a substituted variable are alpha-renamed, or a
    CaptureError is raised when rename_on_capture is False.
    """
    if not mapping:
        return x
    match x:
        case IntLit() | TrueF() | Emp():
            return x
        case Var(name):
            return mapping.get(name, x)
        case FieldAddr(base, field):
            return FieldAddr(substitute(base, mapping), field)
        case Apply(fn, args):
            return Apply(fn, tuple(substitute(a, mapping) for a in args))
        case Arith(op, l, r):
            return Arith(op, substitute(l, mapping), substitute(r, mapping))
        case Eq(l, r):
            return Eq(substitute(l, mapping), substitute(r, mapping))
        case Rel(op, l, r):
            return Rel(op, substitute(l, mapping), substitute(r, mapping))
        case Not(inner):
            return Not(substitute(inner, mapping, rename_on_capture=rename_on_capture))
        case Bin(op, l, r):
            return Bin(
                op,
                substitute(l, mapping, rename_on_capture=rename_on_capture),
                substitute(r, mapping, rename_on_capture=rename_on_capture),
            )
        case PredP(name, args):
            return PredP(name, tuple(substitute(a, mapping) for a in args))
        case DataAt(addr, value):
            return DataAt(substitute(addr, mapping), substitute(value, mapping))
        case PredS(name, args):
            return PredS(name, tuple(substitute(a, mapping) for a in args))
        case SymbolicHeap(pures, spatials):
            return SymbolicHeap(
                tuple(substitute(p, mapping) for p in pures),
                tuple(substitute(s, mapping) for s in spatials),
            )
        case PureA(f):
            return PureA(substitute(f, mapping, rename_on_capture=rename_on_capture))
        case SpatialA(s):
            return SpatialA(substitute(s, mapping))
        case SepConj(parts):
            return SepConj(tuple(substitute(p, mapping, rename_on_capture=rename_on_capture) for p in parts))
        case AndA(parts):
            return AndA(tuple(substitute(p, mapping, rename_on_capture=rename_on_capture) for p in parts))
        case Wand(l, r):
            return Wand(
                substitute(l, mapping, rename_on_capture=rename_on_capture),
                substitute(r, mapping, rename_on_capture=rename_on_capture),
            )
        case ForallA(vs, body):
            vs2, body2, live = _under_binders(vs, body, mapping, rename_on_capture)
            return ForallA(vs2, substitute(body2, live, rename_on_capture=rename_on_capture)) if live else ForallA(vs2, body2)
        case ExistsA(vs, body):
            vs2, body2, live = _under_binders(vs, body, mapping, rename_on_capture)
            return ExistsA(vs2, substitute(body2, live, rename_on_capture=rename_on_capture)) if live else ExistsA(vs2, body2)
    raise TypeError(f"substitute: unsupported value {x!r}")


def _under_binders(
    vs: tuple[str, ...],
    body: Assertion,
    mapping: Mapping[str, Term],
    rename_on_capture: bool,
) -> tuple[tuple[str, ...], Assertion, dict[str, Term]]:
    body_free = free_vars(body)
    live = {k: t for k, t in mapping.items() if k not in vs and k in body_free}
    if not live:
        return vs, body, {}
    range_free: set[str] = set()
    for t in live.values():
        range_free |= free_vars(t)
    captured = [v for v in vs if v in range_free]
    if not captured:
        return vs, body, live
    if not rename_on_capture:
        raise CaptureError(f"binder {captured[0]!r} captures a substituted term")
    avoid = body_free | range_free | set(vs) | set(live)
    renaming: dict[str, Term] = {}
    vs2: list[str] = []
    for v in vs:
        if v in captured:
            nv = fresh_name(v, avoid)
            avoid.add(nv)
            renaming[v] = Var(nv)
            vs2.append(nv)
        else:
            vs2.append(v)
    body2 = substitute(body, renaming, rename_on_capture=True)
    return tuple(vs2), body2, live


# ---------------------------------------------------------------------------
# Well-formedness


def well_formed_report(e: Entailment) -> list[str]:
    """Diagnostics for a closed entailment; empty means well formed."""
    problems: list[str] = []
    if len(set(e.universals)) != len(e.universals):
        problems.append("duplicate universal binder")
    if len(set(e.existentials)) != len(e.existentials):
        problems.append("duplicate existential binder")
    overlap = set(e.universals) & set(e.existentials)
    if overlap:
        problems.append(f"binder declared both forall and exists: {', '.join(sorted(overlap))}")
    u = set(e.universals)
    loose_l = free_vars(e.lhs) - u
    if loose_l:
        problems.append(f"antecedent uses unbound variables: {', '.join(sorted(loose_l))}")
    loose_r = free_vars(e.rhs) - u - set(e.existentials)
    if loose_r:
        problems.append(f"consequent uses unbound variables: {', '.join(sorted(loose_r))}")
    return problems


def well_formed(e: Entailment) -> bool:
    return not well_formed_report(e)


# ---------------------------------------------------------------------------
# Normalization


def normalize(a: Assertion) -> Assertion:
    """Drop conjunction units, flatten nested conjunctions, prune empty binders.

    Idempotent and free-variable preserving.  An empty separating conjunction
    collapses to emp, an empty plain conjunction to true.
    """
    match a:
        case PureA() | SpatialA():
            return a
        case SepConj(parts):
            flat: list[Assertion] = []
            for p in parts:
                q = normalize(p)
                if isinstance(q, SepConj):
                    flat.extend(q.parts)
                else:
                    flat.append(q)
            kept = [p for p in flat if p != SpatialA(Emp())]
            if not kept:
                return SpatialA(Emp())
            if len(kept) == 1:
                return kept[0]
            return SepConj(tuple(kept))
        case AndA(parts):
            flat = []
            for p in parts:
                q = normalize(p)
                if isinstance(q, AndA):
                    flat.extend(q.parts)
                else:
                    flat.append(q)
            kept = [p for p in flat if p != PureA(TrueF())]
            if not kept:
                return PureA(TrueF())
            if len(kept) == 1:
                return kept[0]
            return AndA(tuple(kept))
        case Wand(l, r):
            return Wand(normalize(l), normalize(r))
        case ForallA(vs, body):
            body2 = normalize(body)
            return body2 if not vs else ForallA(vs, body2)
        case ExistsA(vs, body):
            body2 = normalize(body)
            return body2 if not vs else ExistsA(vs, body2)
    raise TypeError(f"normalize: unsupported value {a!r}")


# ---------------------------------------------------------------------------
# Alpha-equivalence


def _canon(a: Assertion, env: dict[str, int], ignore_order: bool):
    def canon_term(t: Term):
        match t:
            case IntLit(v):
                return ("lit", v)
            case Var(name):
                if name in env:
                    return ("bv", env[name])
                return ("fv", name)
            case FieldAddr(base, field):
                return ("fld", field, canon_term(base))
            case Apply(fn, args):
                return ("app", fn, tuple(canon_term(x) for x in args))
            case Arith(op, l, r):
                return ("arith", op, canon_term(l), canon_term(r))
        raise TypeError(t)

    def canon_pure(f: PureFormula):
        match f:
            case TrueF():
                return ("true",)
            case Eq(l, r):
                return ("eq", canon_term(l), canon_term(r))
            case Rel(op, l, r):
                return ("rel", op, canon_term(l), canon_term(r))
            case Not(inner):
                return ("not", canon_pure(inner))
            case Bin(op, l, r):
                return ("bin", op, canon_pure(l), canon_pure(r))
            case PredP(name, args):
                return ("predp", name, tuple(canon_term(x) for x in args))
        raise TypeError(f)

    def canon_spatial(s: SpatialAtom):
        match s:
            case Emp():
                return ("emp",)
            case DataAt(addr, value):
                return ("data_at", canon_term(addr), canon_term(value))
            case PredS(name, args):
                return ("preds", name, tuple(canon_term(x) for x in args))
        raise TypeError(s)

    match a:
        case PureA(f):
            return ("pure", canon_pure(f))
        case SpatialA(s):
            return ("spatial", canon_spatial(s))
        case SepConj(parts):
            keys = [_canon(p, env, ignore_order) for p in parts]
            return ("sep", tuple(sorted(keys)) if ignore_order else tuple(keys))
        case AndA(parts):
            keys = [_canon(p, env, ignore_order) for p in parts]
            return ("and", tuple(sorted(keys)) if ignore_order else tuple(keys))
        case Wand(l, r):
            return ("wand", _canon(l, env, ignore_order), _canon(r, env, ignore_order))
        case ForallA(vs, body) | ExistsA(vs, body):
            tag = "forall" if isinstance(a, ForallA) else "exists"
            env2 = dict(env)
            for v in vs:
                env2[v] = len(env2)
            return (tag, len(vs), _canon(body, env2, ignore_order))
    raise TypeError(a)


def alpha_equivalent(a: Assertion, b: Assertion, *, ignore_conjunct_order: bool = True) -> bool:
    """Equality up to positional renaming of bound variables.

    With ignore_conjunct_order, operands of SepConj and AndA compare as
    multisets.  Binder lists compare positionally.
    """
    return _canon(a, {}, ignore_conjunct_order) == _canon(b, {}, ignore_conjunct_order)
