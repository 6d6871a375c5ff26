from __future__ import annotations

import copy

import pytest

import gen
from conftest import load_entailments, load_library
from sepstrat.core import Entailment, IntLit, SymbolicHeap, Var
from sepstrat.engine import (
    ReplayError,
    TRACE_SCHEMA_VERSION,
    Verdict,
    apply_action,
    document_to_json,
    replay_document,
    run,
    run_checks,
    step,
    trace_to_dict,
    traces_to_document,
)
from sepstrat.frontend import (
    LeftAdd,
    LeftErase,
    RightAdd,
    RightErase,
    parse_entailment,
    parse_strategies,
)
from sepstrat.matcher import match_strategy
from sepstrat.smt import ProofStatus

SIG = gen.test_signature()


def stg(text):
    return parse_strategies(text, SIG).strategies[0]


def ent(text):
    return parse_entailment(text, SIG)


def first_binding(s, e):
    return next(iter(match_strategy(s, e))).bindings


class TestRunChecks:
    ABSENT = stg(
        "strategy s\n  left: data_at(?p, ?v)\n  check: left_absent(p != p);\n"
        "  action: left_add(p != p);\n"
    )

    def test_absence_holds(self):
        e = ent("forall p v, data_at(p, v) |-- emp")
        assert run_checks(self.ABSENT, first_binding(self.ABSENT, e), e) == []

    def test_absence_fails_on_structural_presence(self):
        e = ent("forall p v, p != p && data_at(p, v) |-- emp")
        assert run_checks(self.ABSENT, first_binding(self.ABSENT, e), e) is None

    def test_absence_is_structural_not_semantic(self):
        # q != p is logically the same fact but not structurally equal
        s = stg(
            "strategy s\n  left: data_at(?p, ?v)\n  left: data_at(?q, ?w)\n"
            "  check: left_absent(p != q);\n  action: left_add(p != q);\n"
        )
        e = ent("forall p q v w, q != p && data_at(p, v) * data_at(q, w) |-- emp")
        b = {"p": Var("p"), "q": Var("q"), "v": Var("v"), "w": Var("w")}
        assert run_checks(s, b, e) == []

    def test_right_absent(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?v)\n  check: right_absent(v == 0);\n"
            "  action: left_erase(data_at(p, v));\n"
        )
        free = ent("forall p v, data_at(p, v) |-- emp")
        assert run_checks(s, first_binding(s, free), free) == []
        present = ent("forall p v, data_at(p, v) |-- v == 0")
        assert run_checks(s, first_binding(s, present), present) is None

    def test_infer_records_condition(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?v)\n  check: infer(0 <= v);\n"
            "  action: left_erase(data_at(p, v));\n"
        )
        e = ent("forall p v, 1 <= v && data_at(p, v) |-- emp")
        conds = run_checks(s, first_binding(s, e), e)
        assert len(conds) == 1
        c = conds[0]
        assert c.status is ProofStatus.PROVEN
        assert c.goal == ent("forall v, 0 <= v |-- emp").lhs.pures[0]
        assert c.hypothesis_pures == e.lhs.pures
        assert c.strategy == "s" and c.step_index == -1

    def test_infer_failure_rejects(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?v)\n  check: infer(v < 0);\n"
            "  action: left_erase(data_at(p, v));\n"
        )
        e = ent("forall p v, data_at(p, v) |-- emp")
        assert run_checks(s, first_binding(s, e), e) is None


class TestApplyAction:
    def test_erase_removes_first_occurrence_only(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?v)\n"
            "  action: left_erase(data_at(p, v));\n"
        )
        e = ent("forall p v, data_at(p, v) * data_at(p, v) |-- emp")
        e2, _ = apply_action(s, first_binding(s, e), e)
        assert len(e2.lhs.spatials) == 1

    def test_erase_missing_fails(self):
        s = stg(
            "strategy s\n  right: ?x == ?y\n"
            "  action: right_erase(x == y); right_erase(x == y);\n"
        )
        e = ent("forall a b, emp |-- a == b")
        assert apply_action(s, first_binding(s, e), e) is None

    def test_adds_append_in_order(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?v)\n"
            "  action: right_add(v == 0); right_add(v == 1); left_add(0 <= p);\n"
        )
        e = ent("forall p v, data_at(p, v) |-- emp")
        e2, _ = apply_action(s, first_binding(s, e), e)
        assert e2.rhs.pures == ent("forall v, v == 0 && v == 1 |-- emp").lhs.pures
        assert e2.lhs.pures[-1] == ent("forall p, 0 <= p |-- emp").lhs.pures[0]

    def test_fresh_names_avoid_entailment_names(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?w)\n"
            "  action: exist_add(v); right_add(v == w); left_erase(data_at(p, w));\n"
        )
        plain = ent("forall p w, data_at(p, w) |-- emp")
        e2, sigma = apply_action(s, first_binding(s, plain), plain)
        assert e2.existentials == ("v",) and sigma["v"] == Var("v")

        taken = ent("forall p v, data_at(p, v) |-- emp")
        e2, sigma = apply_action(s, first_binding(s, taken), taken)
        assert e2.existentials == ("v'1",) and sigma["v"] == Var("v'1")

    def test_forall_add(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?w)\n"
            "  action: forall_add(u); left_add(u == u);\n"
        )
        e = ent("forall p w, data_at(p, w) |-- emp")
        e2, _ = apply_action(s, first_binding(s, e), e)
        assert e2.universals == ("p", "w", "u")

    def test_seeded_fresh_name_is_respected(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?w)\n"
            "  action: exist_add(v); right_add(v == w);\n"
        )
        e = ent("forall p w, data_at(p, w) |-- emp")
        b = dict(first_binding(s, e))
        b["v"] = Var("fresh")
        e2, sigma = apply_action(s, b, e)
        assert e2.existentials == ("fresh",) and sigma["v"] == Var("fresh")

    def test_seeded_fresh_name_collision_fails(self):
        s = stg(
            "strategy s\n  left: data_at(?p, ?w)\n"
            "  action: exist_add(v); right_add(v == w);\n"
        )
        e = ent("forall p w, data_at(p, w) |-- emp")
        b = dict(first_binding(s, e))
        b["v"] = Var("p")
        assert apply_action(s, b, e) is None

    def test_emp_is_not_a_legal_operand(self):
        from sepstrat.frontend import ParseError

        with pytest.raises(ParseError, match="emp"):
            stg("strategy s\n  left: data_at(?p, ?w)\n  action: left_add(emp);\n")

    def test_emp_add_in_constructed_action_is_dropped(self):
        import dataclasses

        from sepstrat.core import Emp
        from sepstrat.frontend import OpSeq

        s = stg("strategy s\n  left: data_at(?p, ?w)\n  action: left_add(0 <= p);\n")
        s = dataclasses.replace(s, action=OpSeq((*s.action.ops, LeftAdd(Emp()))))
        e = ent("forall p w, data_at(p, w) |-- emp")
        e2, _ = apply_action(s, first_binding(s, e), e)
        assert len(e2.lhs.spatials) == 1 and len(e2.lhs.pures) == 1


class TestInstantiate:
    INST = stg(
        "strategy s\n  right: exists x, ?x == ?y\n  action: instantiate(x -> y);\n"
    )

    def test_substitutes_and_drops_binder(self):
        e = ent("forall v, emp |-- exists w, w == v && listrep(w, v)")
        e2, _ = apply_action(self.INST, first_binding(self.INST, e), e)
        assert e2 == ent("forall v, emp |-- v == v && listrep(v, v)")

    def test_rejects_non_variable_target(self):
        e = ent("forall v, emp |-- exists w, w == v")
        assert apply_action(self.INST, {"x": IntLit(3), "y": Var("v")}, e) is None

    def test_rejects_universal_target(self):
        e = ent("forall v, emp |-- exists w, w == v")
        assert apply_action(self.INST, {"x": Var("v"), "y": Var("v")}, e) is None

    def test_rejects_self_reference(self):
        e = ent("forall v, emp |-- exists w, w == w + 0")
        assert apply_action(self.INST, {"x": Var("w"), "y": Var("w")}, e) is None

    def test_rejects_escaping_variables(self):
        e = ent("forall v, emp |-- exists w, w == v")
        assert apply_action(self.INST, {"x": Var("w"), "y": Var("zz")}, e) is None

    def test_other_existentials_may_appear(self):
        e = ent("forall v, emp |-- exists w u, w == u")
        e2, _ = apply_action(self.INST, {"x": Var("w"), "y": Var("u")}, e)
        assert e2 == ent("forall v, emp |-- exists u, u == u")


class TestStep:
    def test_priority_order(self):
        prog = parse_strategies(
            "strategy late\n  priority: 9\n  right: ?x == ?y\n  action: right_erase(x == y);\n"
            "\n"
            "strategy early\n  priority: 1\n  right: ?x == ?y\n  action: right_erase(x == y);\n",
            SIG,
        )
        ts = step(prog, ent("forall a, emp |-- a == a"))
        assert ts.strategy == "early"

    def test_declaration_order_breaks_ties(self):
        prog = parse_strategies(
            "strategy first\n  right: ?x == ?y\n  action: right_erase(x == y);\n"
            "\n"
            "strategy second\n  right: ?x == ?y\n  action: right_erase(x == y);\n",
            SIG,
        )
        assert step(prog, ent("forall a, emp |-- a == a")).strategy == "first"

    def test_candidate_retry_within_strategy(self):
        # the first match fails its action (erase of a missing conjunct after
        # a double-erase); the second candidate succeeds
        prog = parse_strategies(
            "strategy pick\n  right: ?x == ?y\n"
            "  check: left_absent(x != y);\n"
            "  action: right_erase(x == y);\n",
            SIG,
        )
        e = ent("forall a b, a != a && emp |-- a == a && b == b")
        ts = step(prog, e)
        assert ts is not None
        assert ts.substitution == (("x", Var("b")), ("y", Var("b")))

    def test_none_when_nothing_applies(self):
        prog = parse_strategies(
            "strategy s\n  left: listrep(?p, ?l)\n  action: left_erase(listrep(p, l));\n",
            SIG,
        )
        assert step(prog, ent("forall a, emp |-- a == a")) is None


class TestRun:
    def test_rejects_bad_arguments(self):
        prog = parse_strategies("strategy s\n  right: ?x == ?y\n  action: right_erase(x == y);\n", SIG)
        with pytest.raises(ValueError):
            run(prog, ent("forall a, emp |-- a == a"), max_steps=0)
        from sepstrat.core import Eq

        unbound = Entailment((), SymbolicHeap((Eq(Var("zz"), Var("zz")),), ()), (), SymbolicHeap((), ()))
        with pytest.raises(ValueError):
            run(prog, unbound)

    def test_purified_immediately(self):
        prog = parse_strategies("strategy s\n  right: ?x == ?y\n  action: right_erase(x == y);\n", SIG)
        tr = run(prog, ent("forall a, emp |-- a == a"))
        assert tr.verdict is Verdict.PURIFIED and len(tr.steps) == 1
        assert tr.final == ent("forall a, emp |-- emp")
        assert tr.frame is None

    def test_side_condition_step_indices(self, array):
        sig, prog = array
        e = load_entailments("array_basic", sig)[0]
        tr = run(prog, e)
        seen = 0
        for i, ts in enumerate(tr.steps):
            for c in ts.side_conditions:
                assert c.step_index == i
                seen += 1
        assert seen >= 2

    def test_final_property_without_steps(self, sll):
        sig, prog = sll
        e = load_entailments("sll_cycle_guard", sig)[0]
        tr = run(prog, e)
        assert tr.verdict is Verdict.STUCK and tr.steps == () and tr.final == e


class TestVerdicts:
    def test_step_limit_probe(self, common):
        sig, prog = common
        cells = load_entailments("common_cells", sig)[0]
        limited = run(prog, cells, max_steps=5)
        assert limited.verdict is Verdict.STEP_LIMIT
        assert len(limited.steps) == 5 and limited.frame is None

        exact = run(prog, cells, max_steps=20)
        assert exact.verdict is Verdict.FRAME_INFERRED
        assert len(exact.steps) == 20
        assert exact.frame == exact.final.lhs

    def test_purified_wins_over_step_limit(self, common):
        sig, prog = common
        e = parse_entailment("forall v, emp |-- exists a b, a == v && b == v", sig)
        tr = run(prog, e, max_steps=1)
        # a second instantiation is still available, but the entailment is
        # already spatial-free
        assert tr.verdict is Verdict.PURIFIED and len(tr.steps) == 1

    def test_run_continues_past_purification(self, common):
        sig, prog = common
        e = parse_entailment("forall v, emp |-- exists a b, a == v && b == v", sig)
        tr = run(prog, e)
        assert tr.verdict is Verdict.PURIFIED
        assert [ts.strategy for ts in tr.steps] == ["com_inst_eq", "com_inst_eq"]
        assert tr.final == parse_entailment("forall v, emp |-- v == v && v == v", sig)


class TestConservation:
    def test_each_step_rewrites_only_declared_conjuncts(self, sll):
        sig, prog = sll
        e = load_entailments("sll_basic", sig)[0]
        tr = run(prog, e)
        strategies = {s.name: s for s in prog.strategies}
        cur = e
        for ts in tr.steps:
            s = strategies[ts.strategy]
            erased = sum(1 for op in s.action.ops if isinstance(op, (LeftErase, RightErase)))
            added = sum(1 for op in s.action.ops if isinstance(op, (LeftAdd, RightAdd)))
            before = len(cur.lhs.spatials) + len(cur.rhs.spatials) + len(cur.lhs.pures) + len(cur.rhs.pures)
            nxt = ts.entailment_after
            after = len(nxt.lhs.spatials) + len(nxt.rhs.spatials) + len(nxt.lhs.pures) + len(nxt.rhs.pures)
            assert after == before - erased + added
            cur = nxt


class TestTraceDocuments:
    def doc_for(self, lib, name):
        sig, prog = lib
        ents = load_entailments(name, sig)
        return traces_to_document([run(prog, e) for e in ents]), sig, prog

    def test_schema_shape(self, sll):
        doc, _, _ = self.doc_for(sll, "sll_basic")
        assert doc["schema_version"] == TRACE_SCHEMA_VERSION
        (tr,) = doc["traces"]
        assert set(tr) == {"input", "steps", "verdict", "frame"}
        assert tr["verdict"] == "purified" and tr["frame"] is None
        st = tr["steps"][0]
        assert set(st) == {"strategy", "substitution", "side_conditions", "entailment_after"}
        assert all(isinstance(v, str) for v in st["substitution"].values())

    def test_side_conditions_serialized(self, array):
        doc, _, _ = self.doc_for(array, "array_basic")
        conds = [c for tr in doc["traces"] for st in tr["steps"] for c in st["side_conditions"]]
        assert conds and all(c["status"] == "proven" for c in conds)

    def test_json_round_trip(self, sll):
        import json

        doc, _, _ = self.doc_for(sll, "sll_basic")
        assert json.loads(document_to_json(doc)) == doc

    def test_frame_recorded(self, common):
        doc, _, _ = self.doc_for(common, "common_cells")
        (tr,) = doc["traces"]
        assert tr["verdict"] == "frame_inferred"
        assert tr["frame"].startswith("p1 != p2")


class TestReplay:
    def replayable(self, lib, name):
        sig, prog = lib
        ents = load_entailments(name, sig)
        doc = traces_to_document([run(prog, e) for e in ents])
        return doc, sig, prog

    @pytest.mark.parametrize(
        "lib,name",
        [
            ("sll", "sll_basic"),
            ("sll", "sll_cycle_guard"),
            ("array", "array_basic"),
            ("array", "array_frame"),
            ("array", "array_obligations"),
            ("common", "common_cells"),
        ],
    )
    def test_replays_clean(self, lib, name, request):
        doc, sig, prog = self.replayable(request.getfixturevalue(lib), name)
        replay_document(doc, sig, prog)

    def test_schema_version_checked(self, sll):
        doc, sig, prog = self.replayable(sll, "sll_basic")
        doc["schema_version"] = 99
        with pytest.raises(ReplayError, match="schema_version"):
            replay_document(doc, sig, prog)

    def test_unknown_strategy(self, sll):
        doc, sig, prog = self.replayable(sll, "sll_basic")
        doc["traces"][0]["steps"][0]["strategy"] = "ghost"
        with pytest.raises(ReplayError, match="unknown strategy"):
            replay_document(doc, sig, prog)

    def test_tampered_substitution(self, sll):
        doc, sig, prog = self.replayable(sll, "sll_basic")
        st = doc["traces"][0]["steps"][0]
        var = next(iter(st["substitution"]))
        st["substitution"][var] = "q + 1"
        with pytest.raises(ReplayError, match="substitution"):
            replay_document(doc, sig, prog)

    def test_tampered_entailment(self, sll):
        doc, sig, prog = self.replayable(sll, "sll_basic")
        tr = doc["traces"][0]
        tr["steps"][1]["entailment_after"] = tr["input"]
        with pytest.raises(ReplayError, match="diverges"):
            replay_document(doc, sig, prog)

    def test_tampered_side_condition(self, array):
        doc, sig, prog = self.replayable(array, "array_basic")
        for tr in doc["traces"]:
            for st in tr["steps"]:
                if st["side_conditions"]:
                    st["side_conditions"][0]["goal"] = "1 < 0"
                    with pytest.raises(ReplayError, match="side condition"):
                        replay_document(doc, sig, prog)
                    return
        pytest.fail("no side conditions found")

    def test_tampered_verdict(self, sll):
        doc, sig, prog = self.replayable(sll, "sll_cycle_guard")
        doc["traces"][0]["verdict"] = "purified"
        with pytest.raises(ReplayError, match="purified"):
            replay_document(doc, sig, prog)

    def test_tampered_frame(self, common):
        doc, sig, prog = self.replayable(common, "common_cells")
        doc["traces"][0]["frame"] = "emp"
        with pytest.raises(ReplayError, match="frame"):
            replay_document(doc, sig, prog)

    def test_replay_does_not_mutate_document(self, sll):
        doc, sig, prog = self.replayable(sll, "sll_basic")
        snapshot = copy.deepcopy(doc)
        replay_document(doc, sig, prog)
        assert doc == snapshot
