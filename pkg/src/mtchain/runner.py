"""Execute translation chains hop by hop with crash-safe persistence.

A run lives in its own directory: ``spec.json`` (plan + source text +
backend identity), ``hops.jsonl`` (one deterministic record per executed
hop, appended immediately), ``timings.jsonl`` (volatile per-hop wall-clock
durations, kept apart so hop logs are byte-reproducible), and
``status.json``.  Interrupted runs resume from the first missing hop;
previously persisted hops are never re-executed.
"""

from __future__ import annotations

import json
import time
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .backends import BackendError, TranslationRequest, translate
from .catalog import ChainSpec


class DataIntegrityError(Exception):
    """Persisted run records disagree with their spec or with each other."""


BUNDLED_TEXT_LANGUAGES = {"t1": "pt", "t2": "pt", "t3": "en", "t4": "en"}

SPEC_FILE = "spec.json"
HOPS_FILE = "hops.jsonl"
TIMINGS_FILE = "timings.jsonl"
STATUS_FILE = "status.json"


def word_count(text: str) -> int:
    """Whitespace-delimited word count after unicode NFC normalization."""
    return len(unicodedata.normalize("NFC", text).split())


@dataclass(frozen=True)
class SourceText:
    id: str
    language: str
    body: str
    initial_word_count: int | None = None
    origin_language: str | None = None
    origin_body: str | None = None

    def __post_init__(self):
        computed = word_count(self.body)
        if self.initial_word_count is None:
            object.__setattr__(self, "initial_word_count", computed)
        elif self.initial_word_count != computed:
            raise DataIntegrityError(
                f"text {self.id!r}: stored word count {self.initial_word_count} "
                f"!= recomputed {computed}"
            )


def bundled_text(text_id: str) -> SourceText:
    """One of the four starter texts shipped with the package."""
    if text_id not in BUNDLED_TEXT_LANGUAGES:
        raise KeyError(f"unknown bundled text {text_id!r}; have {sorted(BUNDLED_TEXT_LANGUAGES)}")
    data = resources.files("mtchain.data") / "texts" / f"{text_id}.txt"
    body = data.read_text(encoding="utf-8").strip()
    return SourceText(id=text_id, language=BUNDLED_TEXT_LANGUAGES[text_id], body=body)


def load_text(path: str | Path, text_id: str, language: str) -> SourceText:
    body = Path(path).read_text(encoding="utf-8").strip()
    return SourceText(id=text_id, language=language, body=body)


@dataclass(frozen=True)
class HopRecord:
    t: int
    source: str
    target: str
    input_text: str
    output_text: str
    output_word_count: int
    measurement_text: str | None
    backend: str
    timing: float | None = None

    def log_line(self) -> str:
        """Deterministic JSON line (volatile timing excluded)."""
        payload = {
            "t": self.t,
            "source": self.source,
            "target": self.target,
            "input_text": self.input_text,
            "output_text": self.output_text,
            "output_word_count": self.output_word_count,
            "measurement_text": self.measurement_text,
            "backend": self.backend,
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)


@dataclass
class ChainRun:
    run_id: str
    spec: ChainSpec
    text: SourceText
    hops: list[HopRecord]
    status: str
    backend_identity: str
    path: Path | None = None

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    def current_text(self) -> str:
        return self.hops[-1].output_text if self.hops else self.text.body


def _spec_payload(run_id: str, spec: ChainSpec, text: SourceText, backend_identity: str) -> str:
    payload = {
        "run_id": run_id,
        "backend": backend_identity,
        "spec": {
            "mode": spec.mode,
            "hops": spec.hops,
            "label": spec.label,
            "reference": spec.reference,
            "topology": spec.topology,
            "seed": spec.seed,
            "hop_plan": [list(h) for h in spec.hop_plan],
        },
        "text": {
            "id": text.id,
            "language": text.language,
            "body": text.body,
            "initial_word_count": text.initial_word_count,
            "origin_language": text.origin_language,
            "origin_body": text.origin_body,
        },
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def _write_status(run_dir: Path, status: str, hops_done: int, error: str | None = None) -> None:
    payload = {"status": status, "hops_done": hops_done}
    if error is not None:
        payload["error"] = error
    (run_dir / STATUS_FILE).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8"
    )


def run_chain(text: SourceText, spec: ChainSpec, backend, run_dir: str | Path,
              run_id: str | None = None) -> ChainRun:
    """Execute a chain from scratch, persisting every hop as it completes.

    The directory must not already contain a run.  On a backend error the
    partial run is returned with status ``failed`` instead of raising.
    """
    first_source = spec.hop_plan[0][0] if spec.hop_plan else spec.reference
    if text.language != first_source:
        raise ValueError(
            f"text language {text.language!r} does not match chain start {first_source!r}"
        )
    run_dir = Path(run_dir)
    if (run_dir / SPEC_FILE).exists():
        raise DataIntegrityError(f"{run_dir} already holds a run; use resume_chain")
    run_dir.mkdir(parents=True, exist_ok=True)
    run_id = run_id or f"{spec.label}__{text.id}"
    (run_dir / SPEC_FILE).write_text(
        _spec_payload(run_id, spec, text, backend.identity), encoding="utf-8"
    )
    run = ChainRun(
        run_id=run_id, spec=spec, text=text, hops=[], status="partial",
        backend_identity=backend.identity, path=run_dir,
    )
    return _execute(run, backend)


def resume_chain(run: ChainRun, backend) -> ChainRun:
    """Continue a partial or failed run from its first missing hop.

    A complete run is returned unchanged with zero backend calls.  Runs
    are single-backend: a different backend identity is rejected.
    """
    if run.path is None:
        raise ValueError("run has no directory; load it with load_run first")
    if backend.identity != run.backend_identity:
        raise DataIntegrityError(
            f"run was produced by {run.backend_identity!r}; "
            f"cannot resume with {backend.identity!r}"
        )
    if run.complete:
        return run
    _truncate_torn_tail(run.path)
    return _execute(run, backend)


def _execute(run: ChainRun, backend) -> ChainRun:
    run_dir = run.path
    _write_status(run_dir, "partial", len(run.hops))
    current = run.current_text()
    try:
        with open(run_dir / HOPS_FILE, "a", encoding="utf-8") as hops_fh, \
                open(run_dir / TIMINGS_FILE, "a", encoding="utf-8") as times_fh:
            for t in range(len(run.hops) + 1, run.spec.hops + 1):
                source, target = run.spec.hop_plan[t - 1]
                started = time.perf_counter()
                output = translate(backend, TranslationRequest(current, source, target))
                measurement = _measurement_text(run.spec, target, output, backend)
                elapsed = time.perf_counter() - started
                record = HopRecord(
                    t=t, source=source, target=target, input_text=current,
                    output_text=output, output_word_count=word_count(output),
                    measurement_text=measurement, backend=backend.identity,
                    timing=elapsed,
                )
                hops_fh.write(record.log_line() + "\n")
                hops_fh.flush()
                times_fh.write(json.dumps({"t": t, "seconds": elapsed}) + "\n")
                times_fh.flush()
                run.hops.append(record)
                current = output
    except BackendError as exc:
        run.status = "failed"
        _write_status(run_dir, "failed", len(run.hops), error=str(exc))
        return run
    run.status = "complete"
    _write_status(run_dir, "complete", len(run.hops))
    return run


def _measurement_text(spec: ChainSpec, target: str, output: str, backend) -> str | None:
    if target == spec.reference:
        return output
    if spec.topology == "direct":
        return translate(backend, TranslationRequest(output, target, spec.reference))
    return None


def load_run(run_dir: str | Path) -> ChainRun:
    """Load a persisted run, validating records against the spec.

    A torn final line without a trailing newline (interrupted append) is
    ignored; any other malformed or inconsistent record raises
    DataIntegrityError.
    """
    run_dir = Path(run_dir)
    spec_path = run_dir / SPEC_FILE
    if not spec_path.exists():
        raise DataIntegrityError(f"{run_dir} has no {SPEC_FILE}")
    try:
        payload = json.loads(spec_path.read_text(encoding="utf-8"))
        spec_part = payload["spec"]
        text_part = payload["text"]
        spec = ChainSpec(
            mode=spec_part["mode"],
            hop_plan=tuple((s, t) for s, t in spec_part["hop_plan"]),
            hops=spec_part["hops"],
            label=spec_part["label"],
            reference=spec_part["reference"],
            topology=spec_part["topology"],
            seed=spec_part["seed"],
        )
        text = SourceText(
            id=text_part["id"],
            language=text_part["language"],
            body=text_part["body"],
            initial_word_count=text_part["initial_word_count"],
            origin_language=text_part.get("origin_language"),
            origin_body=text_part.get("origin_body"),
        )
        run_id = payload["run_id"]
        backend_identity = payload["backend"]
    except (ValueError, KeyError, TypeError) as exc:
        raise DataIntegrityError(f"{spec_path}: malformed spec: {exc}") from exc

    hops = _read_hops(run_dir, spec, text)
    status = "partial"
    status_path = run_dir / STATUS_FILE
    if status_path.exists():
        try:
            status = json.loads(status_path.read_text(encoding="utf-8"))["status"]
        except (ValueError, KeyError, TypeError) as exc:
            raise DataIntegrityError(f"{status_path}: malformed status: {exc}") from exc
    if len(hops) == spec.hops:
        if status == "partial":
            status = "complete"
    elif status == "complete":
        raise DataIntegrityError(
            f"{run_dir}: status claims complete but only {len(hops)}/{spec.hops} hops persisted"
        )
    return ChainRun(
        run_id=run_id, spec=spec, text=text, hops=hops, status=status,
        backend_identity=backend_identity, path=run_dir,
    )


def _read_hops(run_dir: Path, spec: ChainSpec, text: SourceText) -> list[HopRecord]:
    hops_path = run_dir / HOPS_FILE
    if not hops_path.exists():
        return []
    raw = hops_path.read_text(encoding="utf-8")
    # the final piece is either the empty string after the last newline or a
    # torn line whose newline never landed; a hop without its newline was
    # never committed, so both are dropped
    lines = raw.split("\n")[:-1]
    hops: list[HopRecord] = []
    previous_output = text.body
    for idx, line in enumerate(lines):
        try:
            rec = json.loads(line)
            record = HopRecord(
                t=rec["t"], source=rec["source"], target=rec["target"],
                input_text=rec["input_text"], output_text=rec["output_text"],
                output_word_count=rec["output_word_count"],
                measurement_text=rec["measurement_text"], backend=rec["backend"],
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise DataIntegrityError(f"{hops_path}:{idx + 1}: bad record: {exc}") from exc
        expected_t = len(hops) + 1
        if record.t != expected_t:
            raise DataIntegrityError(
                f"{hops_path}:{idx + 1}: hop index {record.t}, expected {expected_t}"
            )
        if expected_t > spec.hops or (record.source, record.target) != spec.hop_plan[expected_t - 1]:
            raise DataIntegrityError(f"{hops_path}:{idx + 1}: hop pair disagrees with spec")
        if record.input_text != previous_output:
            raise DataIntegrityError(f"{hops_path}:{idx + 1}: chain connectivity broken")
        if record.output_word_count != word_count(record.output_text):
            raise DataIntegrityError(f"{hops_path}:{idx + 1}: word count mismatch")
        hops.append(record)
        previous_output = record.output_text
    return hops


def _truncate_torn_tail(run_dir: Path) -> None:
    """Drop an interrupted trailing partial line so appends stay clean."""
    hops_path = run_dir / HOPS_FILE
    if not hops_path.exists():
        return
    data = hops_path.read_bytes()
    if not data or data.endswith(b"\n"):
        return
    cut = data.rfind(b"\n")
    with open(hops_path, "r+b") as fh:
        fh.truncate(cut + 1 if cut >= 0 else 0)
