import json
import math
import random

import pytest

import prompt_fixtures as pf
from codecorpus.backends import (Backend, BackendError, ConstantMockBackend,
                                 EchoGoldBackend, UniformMockBackend)
from codecorpus.harness import (FLD_INSTRUCTION, FLD_LABELS, NO_ANSWER,
                                BabiInstance, EvalReport, FldInstance,
                                compare_reports, extract_answer,
                                format_report_table, load_babi_jsonl,
                                load_fld_jsonl, proportion_standard_error,
                                render_babi_prompt, render_fld_prompt, run_eval,
                                split_shots)
from conftest import FIXTURES


def fld_items(n: int, golds=None) -> list[FldInstance]:
    golds = golds or FLD_LABELS
    return [FldInstance(hypothesis=f"the event {i} occurs.",
                        context=[f"fact {i} alpha.", f"fact {i} beta."],
                        gold=golds[i % len(golds)], id=f"item-{i}")
            for i in range(n)]


class TestInstances:
    def test_fld_gold_validated(self):
        with pytest.raises(ValueError, match="gold"):
            FldInstance(hypothesis="h", context=["c"], gold="MAYBE")

    def test_fld_context_required(self):
        with pytest.raises(ValueError, match="context"):
            FldInstance(hypothesis="h", context=[], gold="PROVED")

    def test_babi_gold_single_word(self):
        with pytest.raises(ValueError, match="single word"):
            BabiInstance(story="s", question="q", gold="two words")

    def test_jsonl_loaders(self, tmp_path):
        fld_path = tmp_path / "fld.jsonl"
        items = fld_items(3)
        fld_path.write_text("\n".join(json.dumps({
            "hypothesis": it.hypothesis, "context": it.context, "gold": it.gold,
            "variant": it.variant, "id": it.id}) for it in items))
        assert load_fld_jsonl(fld_path) == items

        babi_path = tmp_path / "babi.jsonl"
        babi_path.write_text(json.dumps({
            "story": "s.", "question": "q?", "gold": "w", "id": "b0"}))
        assert load_babi_jsonl(babi_path) == [
            BabiInstance(story="s.", question="q?", gold="w", id="b0")]


class TestRenderFld:
    def test_contains_instruction_sentence(self):
        prompt = pf.rendered_fld_default()
        assert FLD_INSTRUCTION in prompt
        assert prompt.count(FLD_INSTRUCTION) == 4

    def test_default_golden(self):
        golden = (FIXTURES / "prompts" / "fld_default.txt").read_text(encoding="utf-8")
        assert pf.rendered_fld_default() == golden

    def test_formulated_golden(self):
        golden = (FIXTURES / "prompts" / "fld_formulated.txt").read_text(encoding="utf-8")
        assert pf.rendered_fld_formulated() == golden

    def test_shot_answers_are_bare_labels(self):
        prompt = pf.rendered_fld_default()
        blocks = prompt.split("\n\n")
        assert len(blocks) == 4
        for block, shot in zip(blocks, pf.FLD_DEFAULT_SHOTS):
            assert block.endswith(f"$proof$ = {shot.gold}")
        assert blocks[-1].endswith("$proof$ =")

    def test_zero_shot_degenerate(self):
        item = fld_items(1)[0]
        prompt = render_fld_prompt(item, [], k=0)
        assert prompt.count(FLD_INSTRUCTION) == 1
        assert prompt.endswith("$proof$ =")

    def test_variant_mismatch_rejected(self):
        item = fld_items(1)[0]
        formulated = FldInstance(hypothesis="{A}", context=["{B}"], gold="PROVED",
                                 variant="formulated")
        with pytest.raises(ValueError, match="variant"):
            render_fld_prompt(item, [formulated], k=1)

    def test_wrong_shot_count_rejected(self):
        items = fld_items(4)
        with pytest.raises(ValueError, match="shots"):
            render_fld_prompt(items[0], items[1:3], k=3)

    def test_context_sentences_labeled(self):
        prompt = render_fld_prompt(fld_items(1)[0], [], k=0)
        assert "sent1: fact 0 alpha. sent2: fact 0 beta." in prompt


class TestRenderBabi:
    def test_golden(self):
        golden = (FIXTURES / "prompts" / "babi.txt").read_text(encoding="utf-8")
        assert pf.rendered_babi() == golden

    def test_four_blocks_last_answer_blank(self):
        prompt = pf.rendered_babi()
        blocks = prompt.split("\n\n")
        assert len(blocks) == 4
        for block in blocks[:3]:
            assert not block.endswith("Answer:")
        assert blocks[-1].endswith("Answer:")

    def test_shot_answers_verbatim(self):
        prompt = pf.rendered_babi()
        for shot in pf.BABI_SHOTS:
            assert f"Answer: {shot.gold}" in prompt


class TestExtractAnswer:
    def test_leading_label(self):
        assert extract_answer("PROVED\n$hypothesis$ = more text", "fld") == "PROVED"

    def test_blank_output_is_no_answer(self):
        assert extract_answer("   \n\n   ", "fld") is NO_ANSWER
        assert extract_answer("", "fld") is NO_ANSWER

    def test_first_match_wins(self):
        assert extract_answer("I think DISPROVED maybe UNKNOWN", "fld") == "DISPROVED"

    def test_disproved_not_mistaken_for_proved(self):
        assert extract_answer("DISPROVED", "fld") == "DISPROVED"

    def test_case_sensitive(self):
        assert extract_answer("proved", "fld") is NO_ANSWER

    def test_babi_first_word(self):
        assert extract_answer("  bathroom, I believe\n", "babi") == "bathroom,"
        assert extract_answer("garden", "babi") == "garden"
        assert extract_answer(" \t ", "babi") is NO_ANSWER

    def test_total_on_arbitrary_bytes(self):
        rng = random.Random(0)
        for _ in range(200):
            junk = bytes(rng.randrange(256) for _ in range(rng.randrange(80)))
            extract_answer(junk.decode("latin-1"), "fld")
            extract_answer(junk.decode("latin-1"), "babi")

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError):
            extract_answer("x", "glue")


class TestStandardError:
    def test_formula_exact(self):
        for n in (1, 3, 10, 137, 1000):
            for correct in range(0, n + 1, max(1, n // 7)):
                p = correct / n
                assert abs(proportion_standard_error(p, n)
                           - math.sqrt(p * (1 - p) / n)) < 1e-12

    def test_rejects_zero_n(self):
        with pytest.raises(ValueError):
            proportion_standard_error(0.5, 0)


class TestRunEval:
    def test_echo_gold_is_perfect(self):
        report = run_eval(EchoGoldBackend(), fld_items(30), "fld", k=3, seed=0)
        assert report.accuracy == 1.0
        assert report.n == 27
        assert not report.degraded

    def test_constant_backend_matches_gold_share(self):
        items = fld_items(33)  # golds cycle the three labels
        report = run_eval(ConstantMockBackend("PROVED"), items, "fld", k=3, seed=1)
        expected = sum(1 for r in report.records if r.gold == "PROVED") / report.n
        assert report.accuracy == pytest.approx(expected)

    def test_uniform_backend_near_chance(self):
        report = run_eval(UniformMockBackend(seed=11), fld_items(400), "fld",
                          k=3, seed=0)
        assert abs(report.accuracy - 1 / 3) < 3 * proportion_standard_error(1 / 3, report.n)

    def test_shots_held_out(self):
        items = fld_items(20)
        report = run_eval(EchoGoldBackend(), items, "fld", k=3, seed=5)
        assert report.n == 17
        shots, rest = split_shots(items, 3, seed=5)
        evaluated = {r.item_id for r in report.records}
        assert evaluated == {i.id for i in rest}
        assert not (evaluated & {s.id for s in shots})

    def test_explicit_shots_evaluate_everything(self):
        items = fld_items(10)
        shots = fld_items(3)
        report = run_eval(EchoGoldBackend(), items, "fld", k=3, seed=0, shots=shots)
        assert report.n == 10

    def test_backend_failure_degrades(self):
        class FlakyBackend(Backend):
            def complete(self, prompt, max_tokens, temperature, item=None):
                if "event 5" in prompt.rsplit("$hypothesis$", 1)[1]:
                    raise BackendError("boom")
                return item.gold

        report = run_eval(FlakyBackend(), fld_items(12), "fld", k=3, seed=2)
        assert report.degraded
        failed = [r for r in report.records if r.error]
        assert len(failed) == 1
        assert failed[0].extracted is None
        assert not failed[0].correct

    def test_parallel_matches_serial(self):
        items = fld_items(40)
        serial = run_eval(UniformMockBackend(seed=3), items, "fld", k=3, seed=0)
        parallel = run_eval(UniformMockBackend(seed=3), items, "fld", k=3, seed=0,
                            max_in_flight=8)
        assert serial.to_dict() == parallel.to_dict()

    def test_babi_eval(self):
        items = [BabiInstance(story=f"Ann went to spot {i}.",
                              question="Where is Ann?", gold=f"spot{i}",
                              id=f"b{i}") for i in range(8)]
        report = run_eval(EchoGoldBackend(), items, "babi", k=3, seed=0)
        assert report.accuracy == 1.0

    def test_se_matches_accuracy(self):
        report = run_eval(UniformMockBackend(seed=1), fld_items(50), "fld", k=3, seed=0)
        assert report.standard_error == pytest.approx(
            math.sqrt(report.accuracy * (1 - report.accuracy) / report.n), abs=1e-15)

    def test_report_json_roundtrip(self):
        report = run_eval(EchoGoldBackend(), fld_items(10), "fld", k=3, seed=0)
        again = EvalReport.from_dict(json.loads(report.to_json()))
        assert again == report


class TestCompareReports:
    @staticmethod
    def synthetic_report(accuracy: float, n: int, task: str = "fld") -> EvalReport:
        correct = round(accuracy * n)
        return EvalReport(task=task, n=n, correct=correct, accuracy=correct / n,
                          standard_error=proportion_standard_error(correct / n, n))

    def test_identical_reports_delta_zero(self):
        a = self.synthetic_report(0.5, 100)
        delta = compare_reports(a, a)
        assert delta.delta == 0.0

    def test_pooled_standard_error(self):
        a = self.synthetic_report(0.34, 1000)
        b = self.synthetic_report(0.0, 1000)
        delta = compare_reports(a, b)
        assert delta.delta == pytest.approx(0.34)
        expected = math.sqrt(0.34 * 0.66 / 1000 + 0.0)
        assert delta.pooled_standard_error == pytest.approx(expected, abs=1e-12)

    def test_mismatched_n_rejected(self):
        with pytest.raises(ValueError, match="n mismatch"):
            compare_reports(self.synthetic_report(0.5, 10),
                            self.synthetic_report(0.5, 12))

    def test_mismatched_task_rejected(self):
        with pytest.raises(ValueError, match="task mismatch"):
            compare_reports(self.synthetic_report(0.5, 10),
                            self.synthetic_report(0.5, 10, task="babi"))


class TestReportTable:
    def test_mean_plus_minus_se_format(self):
        report = TestCompareReports.synthetic_report(0.34, 1000)
        table = format_report_table(report)
        assert "0.340±0.015" in table
        assert "fld" in table

    def test_degraded_warning(self):
        report = TestCompareReports.synthetic_report(0.5, 10)
        report.degraded = True
        assert "warning" in format_report_table(report)
