"""Few-shot prompt rendering, answer extraction, and accuracy reporting for
the logical-inference evaluations (three-label deduction and single-word
story questions)."""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .backends import Backend, BackendError

FLD_INSTRUCTION = ("Based on the provided facts ($context$), either prove or "
                   "disprove the hypothesis or state that it is unknown.")
FLD_LABELS = ("PROVED", "DISPROVED", "UNKNOWN")
# DISPROVED first: it contains PROVED as a substring.
_FLD_LABEL_RE = re.compile(r"DISPROVED|PROVED|UNKNOWN")

DEFAULT_SHOTS = 3
DEFAULT_MAX_NEW_TOKENS = 16


class _NoAnswer:
    """Completion contained no extractable answer; scored as incorrect."""

    def __repr__(self) -> str:
        return "NoAnswer"

    def __bool__(self) -> bool:
        return False


NO_ANSWER = _NoAnswer()


@dataclass
class FldInstance:
    """One deduction item: hypothesis, ordered facts, three-way gold label."""

    hypothesis: str
    context: list[str]
    gold: str
    variant: str = "default"
    id: str = ""

    def __post_init__(self) -> None:
        if self.gold not in FLD_LABELS:
            raise ValueError(f"gold must be one of {FLD_LABELS}, got {self.gold!r}")
        if not self.context:
            raise ValueError("context must be non-empty")


@dataclass
class BabiInstance:
    """One story question with a single-word gold answer."""

    story: str
    question: str
    gold: str
    id: str = ""

    def __post_init__(self) -> None:
        if len(self.gold.split()) != 1:
            raise ValueError(f"gold must be a single word, got {self.gold!r}")


def load_fld_jsonl(path: str | Path) -> list[FldInstance]:
    return [FldInstance(**rec) for rec in _read_jsonl(path)]


def load_babi_jsonl(path: str | Path) -> list[BabiInstance]:
    return [BabiInstance(**rec) for rec in _read_jsonl(path)]


def _read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(json.loads(line))
    return records


def _fld_block(instance: FldInstance, solved: bool) -> str:
    context = " ".join(f"sent{i}: {fact}" for i, fact in enumerate(instance.context, 1))
    block = (f"{FLD_INSTRUCTION} $hypothesis$ = {instance.hypothesis} ; "
             f"$context$ = {context} ; $proof$ =")
    return f"{block} {instance.gold}" if solved else block


def render_fld_prompt(instance: FldInstance, shots: Sequence[FldInstance],
                      k: int = DEFAULT_SHOTS) -> str:
    """Solved exemplars followed by the query, ending at the proof cue.

    Exemplar answers are the bare final label: the evaluated models output
    the answer directly, with no proof.
    """
    if len(shots) != k:
        raise ValueError(f"expected {k} shots, got {len(shots)}")
    for shot in shots:
        if shot.variant != instance.variant:
            raise ValueError(f"shot variant {shot.variant!r} does not match "
                             f"instance variant {instance.variant!r}")
    blocks = [_fld_block(s, solved=True) for s in shots]
    blocks.append(_fld_block(instance, solved=False))
    return "\n\n".join(blocks)


def _babi_block(instance: BabiInstance, solved: bool) -> str:
    block = f"{instance.story}\nQuestion: {instance.question}\nAnswer:"
    return f"{block} {instance.gold}" if solved else block


def render_babi_prompt(instance: BabiInstance, shots: Sequence[BabiInstance],
                       k: int = DEFAULT_SHOTS) -> str:
    """Story/question exemplars with one-word answers, query answer blank."""
    if len(shots) != k:
        raise ValueError(f"expected {k} shots, got {len(shots)}")
    blocks = [_babi_block(s, solved=True) for s in shots]
    blocks.append(_babi_block(instance, solved=False))
    return "\n\n".join(blocks)


def extract_answer(completion: str, task: str):
    """Pull an answer out of arbitrary completion text; never fails.

    Three-label task: first label occurrence scanning left to right,
    case-sensitive. Story task: first whitespace-delimited word. Returns
    NO_ANSWER when nothing matches (long blanks, empty output).
    """
    if task == "fld":
        match = _FLD_LABEL_RE.search(completion)
        return match.group(0) if match else NO_ANSWER
    if task == "babi":
        words = completion.strip().split()
        return words[0] if words else NO_ANSWER
    raise ValueError(f"unknown task: {task}")


@dataclass
class ItemRecord:
    item_id: str
    prompt_sha256: str
    completion: str
    extracted: str | None
    gold: str
    correct: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "prompt_sha256": self.prompt_sha256,
                "completion": self.completion, "extracted": self.extracted,
                "gold": self.gold, "correct": self.correct, "error": self.error}


@dataclass
class EvalReport:
    """Per-task accuracy with standard error plus raw per-item records."""

    task: str
    n: int
    correct: int
    accuracy: float
    standard_error: float
    degraded: bool = False
    records: list[ItemRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"task": self.task, "n": self.n, "correct": self.correct,
                "accuracy": self.accuracy, "standard_error": self.standard_error,
                "degraded": self.degraded,
                "records": [r.to_dict() for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalReport":
        records = [ItemRecord(**r) for r in payload.get("records", [])]
        return cls(task=payload["task"], n=payload["n"], correct=payload["correct"],
                   accuracy=payload["accuracy"],
                   standard_error=payload["standard_error"],
                   degraded=payload.get("degraded", False), records=records)


def proportion_standard_error(p: float, n: int) -> float:
    """Standard error of a proportion: sqrt(p(1-p)/n)."""
    if n <= 0:
        raise ValueError("n must be positive")
    return math.sqrt(p * (1.0 - p) / n)


def split_shots(instances: Sequence, k: int, seed: int) -> tuple[list, list]:
    """Hold out k seeded exemplars; evaluation runs on the remainder."""
    if len(instances) <= k:
        raise ValueError(f"need more than {k} instances to hold out shots")
    rng = random.Random(seed)
    shot_indices = set(rng.sample(range(len(instances)), k))
    shots = [instances[i] for i in sorted(shot_indices)]
    rest = [inst for i, inst in enumerate(instances) if i not in shot_indices]
    return shots, rest


def run_eval(backend: Backend, instances: Sequence, task: str,
             k: int = DEFAULT_SHOTS, seed: int = 0,
             max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
             max_in_flight: int = 1, shots: Sequence | None = None) -> EvalReport:
    """Render, query, extract, and score every instance.

    Shot exemplars come from a held-out seeded split of the dataset unless
    provided explicitly; evaluated items never appear as shots. Greedy
    decoding (temperature 0) is requested. Backend failures are recorded
    per item, scored as NoAnswer, and flag the report as degraded.
    """
    if task not in ("fld", "babi"):
        raise ValueError(f"unknown task: {task}")
    if shots is None:
        shots, eval_items = split_shots(list(instances), k, seed)
    else:
        shots, eval_items = list(shots), list(instances)
    if not eval_items:
        raise ValueError("no instances to evaluate")

    render = render_fld_prompt if task == "fld" else render_babi_prompt
    prompts = [render(item, shots, k) for item in eval_items]

    def query(index: int) -> tuple[int, str, str | None]:
        try:
            text = backend.complete(prompts[index], max_new_tokens, 0.0,
                                    item=eval_items[index])
            return index, text, None
        except BackendError as exc:
            return index, "", str(exc)

    if max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(query, range(len(eval_items))))
    else:
        results = [query(i) for i in range(len(eval_items))]
    results.sort(key=lambda r: r[0])

    records = []
    correct = 0
    degraded = False
    for index, completion, error in results:
        item = eval_items[index]
        if error is not None:
            degraded = True
            answer = NO_ANSWER
        else:
            answer = extract_answer(completion, task)
        hit = answer is not NO_ANSWER and answer == item.gold
        correct += hit
        records.append(ItemRecord(
            item_id=item.id or str(index),
            prompt_sha256=hashlib.sha256(prompts[index].encode("utf-8")).hexdigest(),
            completion=completion,
            extracted=None if answer is NO_ANSWER else answer,
            gold=item.gold, correct=hit, error=error))

    n = len(eval_items)
    accuracy = correct / n
    return EvalReport(task=task, n=n, correct=correct, accuracy=accuracy,
                      standard_error=proportion_standard_error(accuracy, n),
                      degraded=degraded, records=records)


@dataclass
class ReportDelta:
    """Side-by-side accuracy difference with pooled standard error."""

    task: str
    n: int
    accuracy_a: float
    accuracy_b: float
    delta: float
    pooled_standard_error: float

    def to_dict(self) -> dict:
        return {"task": self.task, "n": self.n, "accuracy_a": self.accuracy_a,
                "accuracy_b": self.accuracy_b, "delta": self.delta,
                "pooled_standard_error": self.pooled_standard_error}


def compare_reports(a: EvalReport, b: EvalReport) -> ReportDelta:
    """Accuracy delta between two runs of the same task and size."""
    if a.task != b.task:
        raise ValueError(f"task mismatch: {a.task} vs {b.task}")
    if a.n != b.n:
        raise ValueError(f"n mismatch: {a.n} vs {b.n}")
    pooled = math.sqrt(a.standard_error ** 2 + b.standard_error ** 2)
    return ReportDelta(task=a.task, n=a.n, accuracy_a=a.accuracy,
                       accuracy_b=b.accuracy, delta=a.accuracy - b.accuracy,
                       pooled_standard_error=pooled)


def format_report_table(report: EvalReport) -> str:
    """Plain-text accuracy table in mean ± standard error form."""
    lines = [
        f"{'task':<12}{'accuracy':<16}{'n':>6}",
        f"{report.task:<12}"
        f"{report.accuracy:.3f}±{report.standard_error:.3f}{'':<5}"
        f"{report.n:>6}",
    ]
    if report.degraded:
        lines.append("warning: one or more backend requests failed")
    return "\n".join(lines)
