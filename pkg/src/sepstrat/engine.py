"""Strategy application and the priority-driven reduction loop.

A step picks the first applicable (strategy, match) pair: strategies ordered
by (priority, declaration index), matches in the matcher's order.  Checks and
the action run per candidate match; a failure moves on to the next candidate.
Applied steps are never undone.  Traces serialize to a versioned JSON
document and can be replayed against it.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from . import smt
from .core import (
    Emp,
    Entailment,
    PureFormula,
    Signature,
    SpatialAtom,
    SymbolicHeap,
    Term,
    Var,
    free_vars,
    fresh_name,
    substitute,
    well_formed,
)
from .frontend import (
    ExistAdd,
    ForallAdd,
    Infer,
    Instantiate,
    LeftAbsent,
    LeftAdd,
    LeftErase,
    OpSeq,
    Program,
    RightAbsent,
    RightAdd,
    RightErase,
    Strategy,
    parse_entailment,
    parse_term,
    print_entailment,
    print_heap,
    print_pure,
    print_term,
)
from .matcher import match_strategy
from .smt import ProofStatus

TRACE_SCHEMA_VERSION = 1


class Verdict(str, Enum):
    PURIFIED = "purified"
    FRAME_INFERRED = "frame_inferred"
    STUCK = "stuck"
    STEP_LIMIT = "step_limit"


class ReplayError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class SideCondition:
    hypothesis_pures: tuple[PureFormula, ...]
    goal: PureFormula
    status: ProofStatus
    strategy: str
    step_index: int


@dataclass(frozen=True, slots=True)
class TraceStep:
    strategy: str
    substitution: tuple[tuple[str, Term], ...]
    side_conditions: tuple[SideCondition, ...]
    entailment_after: Entailment


@dataclass(frozen=True, slots=True)
class ReductionTrace:
    input: Entailment
    steps: tuple[TraceStep, ...]
    verdict: Verdict
    frame: SymbolicHeap | None

    @property
    def final(self) -> Entailment:
        return self.steps[-1].entailment_after if self.steps else self.input


# ---------------------------------------------------------------------------
# Checks


def _subst_formula(f: PureFormula | SpatialAtom, binding: Mapping[str, Term]):
    return substitute(f, binding)


def run_checks(s: Strategy, binding: Mapping[str, Term], e: Entailment) -> list[SideCondition] | None:
    """Evaluate the strategy's checks under the binding; None on failure."""
    conditions: list[SideCondition] = []
    for c in s.checks:
        f = _subst_formula(c.formula, binding)
        match c:
            case LeftAbsent():
                if f in e.lhs.pures:
                    return None
            case RightAbsent():
                if f in e.rhs.pures:
                    return None
            case Infer():
                res = smt.infer(e.lhs.pures, f)
                conditions.append(
                    SideCondition(
                        hypothesis_pures=e.lhs.pures,
                        goal=f,
                        status=res.status,
                        strategy=s.name,
                        step_index=-1,
                    )
                )
                if res.status is not ProofStatus.PROVEN:
                    return None
    return conditions


# ---------------------------------------------------------------------------
# Actions


def _entailment_names(e: Entailment) -> set[str]:
    names = set(e.universals) | set(e.existentials)
    names |= free_vars(e.lhs) | free_vars(e.rhs)
    return names


def _erase_one(items: list, f) -> bool:
    for i, g in enumerate(items):
        if g == f:
            del items[i]
            return True
    return False


def apply_action(
    s: Strategy, binding: Mapping[str, Term], e: Entailment
) -> tuple[Entailment, dict[str, Term]] | None:
    """Apply the strategy's action under the binding; None on failure.

    Returns the new entailment and the binding extended with the names chosen
    for forall_add/exist_add.  A pre-seeded binding for such a name forces
    that choice (used by trace replay)."""
    sigma = dict(binding)
    if isinstance(s.action, Instantiate):
        v = sigma.get(s.action.var)
        if not isinstance(v, Var) or v.name not in e.existentials:
            return None
        t = substitute(s.action.term, sigma)
        fv = free_vars(t)
        if v.name in fv:
            return None
        remaining = tuple(x for x in e.existentials if x != v.name)
        if not fv <= set(e.universals) | set(remaining):
            return None
        rhs = substitute(e.rhs, {v.name: t})
        e2 = Entailment(e.universals, e.lhs, remaining, rhs)
        if not well_formed(e2):
            return None
        return e2, sigma

    lp = list(e.lhs.pures)
    ls = list(e.lhs.spatials)
    rp = list(e.rhs.pures)
    rs = list(e.rhs.spatials)
    universals = list(e.universals)
    existentials = list(e.existentials)

    def current_names() -> set[str]:
        names = set(universals) | set(existentials)
        for f in lp + rp:
            names |= free_vars(f)
        for a in ls + rs:
            names |= free_vars(a)
        return names

    for op in s.action.ops:
        match op:
            case LeftAdd(f) | RightAdd(f) | LeftErase(f) | RightErase(f):
                g = _subst_formula(f, sigma)
                left = isinstance(op, (LeftAdd, LeftErase))
                pure = isinstance(g, PureFormula)
                target = (lp if pure else ls) if left else (rp if pure else rs)
                if isinstance(op, (LeftAdd, RightAdd)):
                    if not isinstance(g, Emp):
                        target.append(g)
                else:
                    if isinstance(g, Emp) or not _erase_one(target, g):
                        return None
            case ForallAdd(x) | ExistAdd(x):
                seeded = sigma.get(x)
                if seeded is not None:
                    if not isinstance(seeded, Var):
                        return None
                    name = seeded.name
                    if name in current_names():
                        return None
                else:
                    avoid = current_names()
                    for t in sigma.values():
                        avoid |= free_vars(t)
                    name = fresh_name(x, avoid)
                    sigma[x] = Var(name)
                (universals if isinstance(op, ForallAdd) else existentials).append(name)
    e2 = Entailment(
        tuple(universals),
        SymbolicHeap(tuple(lp), tuple(ls)),
        tuple(existentials),
        SymbolicHeap(tuple(rp), tuple(rs)),
    )
    if not well_formed(e2):
        return None
    return e2, sigma


# ---------------------------------------------------------------------------
# The reduction loop


def _ordered(prog: Program) -> list[Strategy]:
    return [s for _, _, s in sorted((s.priority, i, s) for i, s in enumerate(prog.strategies))]


def step(prog: Program, e: Entailment, *, _order: list[Strategy] | None = None) -> TraceStep | None:
    """First applicable strategy application, or None when none applies."""
    for s in _order if _order is not None else _ordered(prog):
        for m in match_strategy(s, e):
            conditions = run_checks(s, m.bindings, e)
            if conditions is None:
                continue
            applied = apply_action(s, m.bindings, e)
            if applied is None:
                continue
            e2, sigma = applied
            return TraceStep(
                strategy=s.name,
                substitution=tuple(sigma.items()),
                side_conditions=tuple(conditions),
                entailment_after=e2,
            )
    return None


def run(prog: Program, e: Entailment, max_steps: int = 1000) -> ReductionTrace:
    """Iterate step up to max_steps times and classify the outcome."""
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    if not well_formed(e):
        raise ValueError("input entailment is not well-formed")
    order = _ordered(prog)
    steps: list[TraceStep] = []
    cur = e
    while len(steps) < max_steps:
        ts = step(prog, cur, _order=order)
        if ts is None:
            break
        if ts.side_conditions:
            ts = dataclasses.replace(
                ts,
                side_conditions=tuple(
                    dataclasses.replace(c, step_index=len(steps)) for c in ts.side_conditions
                ),
            )
        steps.append(ts)
        cur = ts.entailment_after
    purified = not cur.lhs.spatials and not cur.rhs.spatials
    if purified:
        verdict = Verdict.PURIFIED
    elif len(steps) == max_steps and step(prog, cur, _order=order) is not None:
        verdict = Verdict.STEP_LIMIT
    elif not cur.rhs.spatials:
        verdict = Verdict.FRAME_INFERRED
    else:
        verdict = Verdict.STUCK
    frame = cur.lhs if verdict is Verdict.FRAME_INFERRED else None
    return ReductionTrace(input=e, steps=tuple(steps), verdict=verdict, frame=frame)


# ---------------------------------------------------------------------------
# Trace serialization and replay


def trace_to_dict(trace: ReductionTrace) -> dict:
    return {
        "input": print_entailment(trace.input),
        "steps": [
            {
                "strategy": ts.strategy,
                "substitution": {x: print_term(t) for x, t in ts.substitution},
                "side_conditions": [
                    {"goal": print_pure(c.goal), "status": c.status.value} for c in ts.side_conditions
                ],
                "entailment_after": print_entailment(ts.entailment_after),
            }
            for ts in trace.steps
        ],
        "verdict": trace.verdict.value,
        "frame": print_heap(trace.frame) if trace.frame is not None else None,
    }


def traces_to_document(traces: Iterable[ReductionTrace]) -> dict:
    return {
        "schema_version": TRACE_SCHEMA_VERSION,
        "traces": [trace_to_dict(t) for t in traces],
    }


def document_to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def replay_document(doc: dict, sig: Signature, prog: Program) -> None:
    """Re-execute every step of a trace document; raises ReplayError on any
    divergence from the recorded entailments or verdicts."""
    if doc.get("schema_version") != TRACE_SCHEMA_VERSION:
        raise ReplayError(f"unsupported schema_version {doc.get('schema_version')!r}")
    for t_idx, tr in enumerate(doc.get("traces", [])):
        try:
            cur = parse_entailment(tr["input"], sig)
        except Exception as exc:
            raise ReplayError(f"trace {t_idx}: cannot parse input: {exc}") from exc
        for s_idx, st in enumerate(tr.get("steps", [])):
            where = f"trace {t_idx} step {s_idx}"
            s = prog.by_name(st["strategy"])
            if s is None:
                raise ReplayError(f"{where}: unknown strategy {st['strategy']!r}")
            try:
                binding = {x: parse_term(text, sig) for x, text in st["substitution"].items()}
                expected = parse_entailment(st["entailment_after"], sig)
            except Exception as exc:
                raise ReplayError(f"{where}: cannot parse recorded step: {exc}") from exc
            pattern_vars = {b for p in s.patterns for b in p.atom.binders}
            match_binding = {x: t for x, t in binding.items() if x in pattern_vars}
            found = None
            for m in match_strategy(s, cur):
                if m.bindings == match_binding:
                    found = m
                    break
            if found is None:
                raise ReplayError(f"{where}: recorded substitution does not match {s.name}")
            conditions = run_checks(s, binding, cur)
            if conditions is None:
                raise ReplayError(f"{where}: checks of {s.name} no longer pass")
            recorded = st.get("side_conditions", [])
            if len(recorded) != len(conditions):
                raise ReplayError(f"{where}: side condition count differs")
            for rec, got in zip(recorded, conditions):
                if rec["goal"] != print_pure(got.goal) or rec["status"] != got.status.value:
                    raise ReplayError(f"{where}: side condition diverges on {rec['goal']!r}")
            applied = apply_action(s, binding, cur)
            if applied is None:
                raise ReplayError(f"{where}: action of {s.name} fails on replay")
            cur = applied[0]
            if cur != expected:
                raise ReplayError(
                    f"{where}: entailment diverges:\n  got      {print_entailment(cur)}\n"
                    f"  recorded {print_entailment(expected)}"
                )
        final_purified = not cur.lhs.spatials and not cur.rhs.spatials
        verdict = tr.get("verdict")
        if verdict == Verdict.PURIFIED.value and not final_purified:
            raise ReplayError(f"trace {t_idx}: verdict claims purified but spatial conjuncts remain")
        if verdict == Verdict.FRAME_INFERRED.value:
            if cur.rhs.spatials or not cur.lhs.spatials:
                raise ReplayError(f"trace {t_idx}: verdict claims frame_inferred but the final shape disagrees")
            if tr.get("frame") != print_heap(cur.lhs):
                raise ReplayError(f"trace {t_idx}: recorded frame differs from the final antecedent")
