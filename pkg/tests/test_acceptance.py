"""Acceptance suite: one test per exit criterion, each printing a pass/fail
line with its measured value (run with -s to see every line).

All tolerances are fixed here; nothing is deferred to later calibration.
"""
import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy.special import logsumexp

from conftest import (LABELS, mk_record, mk_records, mk_sentence,
                      synthetic_table, template_corpus, train_test_split,
                      TRAIN_NAMES)
from tagscope import taggers
from tagscope.analysis import gate_stats, masked_predict, oracle_combine
from tagscope.annotation import (AnnotationItem, INSTRUCTION_CHECKS, NO_MAJORITY,
                                 build_batches, error_class_report,
                                 majority_label, qc_filter, read_answer_log,
                                 CLASS_HUMAN_CORRECT, CLASS_MAJORITY_WRONG,
                                 CLASS_NO_MAJORITY)
from tagscope.cli import main as cli_main
from tagscope.corpus import to_conll
from tagscope.crf import init_crf, log_partition, path_score, viterbi
from tagscope.embeddings import table_from_arrays, write_embeddings
from tagscope.evalkit import (confusion, honorific_stat, is_sports_score_sentence,
                              micro_prf, recognition_prf, sports_score_stat,
                              token_accuracy)
from tagscope.nn import RngState
from tagscope.records import predict_records
from tagscope.server import create_app
from tagscope.taggers import (ARCH_BI_CONTEXT, ARCH_FULL, ARCH_GATED,
                              SequenceTagger, TrainConfig, build_vocab_snapshot,
                              features_bi_context, features_bw, features_fw,
                              gradcheck_suite, lookup_train, train)


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# 1. CRF oracle equivalence
# ---------------------------------------------------------------------------

def enumerate_paths(emissions, params):
    """Vectorized exhaustive oracle over all K^n paths."""
    n, k = emissions.shape
    paths = np.array(list(itertools.product(range(k), repeat=n)))
    scores = params.start.values[paths[:, 0]] + params.stop.values[paths[:, -1]]
    for t in range(n):
        scores = scores + emissions[t, paths[:, t]]
    for t in range(1, n):
        scores = scores + params.transitions.values[paths[:, t - 1], paths[:, t]]
    return logsumexp(scores), scores.max()


def test_crf_oracle_equivalence():
    rng = RngState(2024)
    started = time.perf_counter()
    worst_z = worst_v = 0.0
    for _ in range(100):
        n = 1 + rng.integers(0, 6)
        k = 2 + rng.integers(0, 4)
        emissions = rng.normal((n, k), scale=2.0)
        params = init_crf("crf", k)
        params.transitions.values[:] = rng.normal((k, k), scale=2.0)
        params.start.values[:] = rng.normal((k,))
        params.stop.values[:] = rng.normal((k,))
        exact_z, exact_max = enumerate_paths(emissions, params)
        path, score = viterbi(emissions, params)
        worst_z = max(worst_z, abs(log_partition(emissions, params) - exact_z))
        worst_v = max(worst_v, abs(score - exact_max),
                      abs(path_score(emissions, params, path) - exact_max))
    elapsed = time.perf_counter() - started
    report("CRF oracle equivalence",
           worst_z < 1e-8 and worst_v < 1e-10 and elapsed < 10.0,
           f"100 instances, |logZ err| {worst_z:.2e} (<1e-8), "
           f"|viterbi err| {worst_v:.2e} (<1e-10), {elapsed:.1f}s (<10s)")


# ---------------------------------------------------------------------------
# 2. Gradient suite
# ---------------------------------------------------------------------------

def test_gradient_suite_all_architectures():
    started = time.perf_counter()
    worst = {}
    for arch in taggers.TRAINABLE_ARCHITECTURES:
        reports = gradcheck_suite(arch, seed=1, trials=3, n_tokens=4, eps=1e-5)
        worst[arch] = max(r.max_rel_error for r in reports)
    elapsed = time.perf_counter() - started
    peak = max(worst.values())
    report("Gradient suite",
           peak < 1e-4 and elapsed < 60.0,
           f"8 architectures x 3 sentences, max rel. error {peak:.2e} (<1e-4), "
           f"{elapsed:.1f}s (<60s)")


# ---------------------------------------------------------------------------
# 3. Context-exclusion invariants
# ---------------------------------------------------------------------------

def test_context_exclusion_invariants():
    rng = RngState(77)
    words = [f"w{i}" for i in range(40)]
    table = table_from_arrays({w: rng.normal((8,)) for w in words})
    config = TrainConfig(hidden_dim=5, embedding_dim=8, seed=0)
    corpus = template_corpus(TRAIN_NAMES)  # only used for the snapshot wordlist
    from tagscope.corpus import Corpus
    vocab_corpus = Corpus("x", (mk_sentence(words, ["O"] * len(words)),), LABELS)
    # fw features see only tokens < i: swapping token s leaves i <= s intact;
    # bw features see only tokens > i: positions i >= s are intact;
    # bi-context features exclude the current word only.
    extractors = {
        "fw-context-crf": (features_fw, lambda s, n: range(0, s + 1)),
        "bw-context-crf": (features_bw, lambda s, n: range(s, n)),
        "bi-context-crf": (features_bi_context, lambda s, n: range(s, s + 1)),
    }
    violations = 0
    trials = 0
    for arch, (fn, positions) in extractors.items():
        vocab = build_vocab_snapshot(vocab_corpus, table, trainable=False,
                                     config=config)
        model = SequenceTagger(arch, LABELS, config, vocab, RngState(5))
        for _ in range(334):
            n = 2 + rng.integers(0, 6)
            picks = [words[rng.integers(0, len(words))] for _ in range(n)]
            base = fn(model, mk_sentence(picks))
            swap_at = rng.integers(0, n)
            changed = list(picks)
            changed[swap_at] = words[rng.integers(0, len(words))]
            other = fn(model, mk_sentence(changed))
            # positions whose feature must be bitwise identical when
            # token swap_at changes: the excluded side plus swap_at itself
            for i in positions(swap_at, n):
                trials += 1
                if not np.array_equal(base[i], other[i]):
                    violations += 1
    report("Context-exclusion invariants", violations == 0 and trials >= 1000,
           f"{trials} positional checks over 1002 substitution trials, "
           f"{violations} violations (=0 required)")


# ---------------------------------------------------------------------------
# 4. Overfit check
# ---------------------------------------------------------------------------

def test_overfit_full_bilstm():
    corpus = template_corpus(TRAIN_NAMES)
    assert len(corpus) == 20
    table = synthetic_table([corpus], dim=12, seed=5)
    config = TrainConfig(epochs=50, lr=0.05, hidden_dim=16, embedding_dim=12,
                         seed=7)
    started = time.perf_counter()
    model = train(ARCH_FULL, corpus, table, config)
    accuracy = token_accuracy(predict_records(model, corpus))
    elapsed = time.perf_counter() - started
    report("Overfit check", accuracy >= 0.99 and elapsed < 60.0,
           f"full-bilstm-crf train accuracy {accuracy:.4f} (>=0.99) on 20 "
           f"sentences within 50 epochs, {elapsed:.1f}s (<60s)")


# ---------------------------------------------------------------------------
# 5. Generalization: lookup recall 0 vs context F1
# ---------------------------------------------------------------------------

def test_generalization_reproduction():
    started = time.perf_counter()
    train_c, test_c, table = train_test_split()
    lookup = lookup_train(train_c)
    lookup_report = micro_prf(predict_records(lookup, test_c))
    config = TrainConfig(epochs=30, lr=0.05, hidden_dim=16,
                         embedding_dim=table.dim, seed=7)
    context = train(ARCH_BI_CONTEXT, train_c, table, config)
    ctx_report = micro_prf(predict_records(context, test_c))
    elapsed = time.perf_counter() - started
    report("Generalization reproduction",
           lookup_report.recall == 0.0 and ctx_report.f1 >= 0.90 and elapsed < 120.0,
           f"disjoint names: lookup recall {lookup_report.recall} (=0), "
           f"bi-context F1 {ctx_report.f1:.3f} (>=0.90), {elapsed:.1f}s (<2min)")


# ---------------------------------------------------------------------------
# 6. Oracle dominance
# ---------------------------------------------------------------------------

def test_oracle_dominance():
    rng = RngState(314)
    labels = LABELS.labels
    violations = 0
    for _ in range(50):
        n = 5 + rng.integers(0, 60)
        gold = [labels[rng.integers(0, len(labels))] for _ in range(n)]
        sets = []
        for s in range(2):
            preds = [g if rng.random(()) < 0.6 else labels[rng.integers(0, len(labels))]
                     for g in gold]
            sets.append(mk_records(list(zip(gold, preds)), system=f"s{s}"))
        default = rng.integers(0, 2)
        rep = oracle_combine(sets, default_index=default)
        if rep.oracle_accuracy < max(rep.component_accuracy) - 1e-12:
            violations += 1
        if rep.oracle_f1 < rep.component_f1[default] - 1e-12:
            violations += 1

    # all trained synthetic systems over the disjoint-name test corpus:
    # word-only systems score 0 there, context systems score high, so the
    # combination must dominate a weak default non-trivially
    train_c, test_c, table = train_test_split()
    config = TrainConfig(epochs=20, lr=0.05, hidden_dim=12,
                         embedding_dim=table.dim, seed=5)
    system_records = []
    for arch in taggers.ARCHITECTURES:
        model = train(arch, train_c, table, config)
        system_records.append(predict_records(model, test_c, system=arch))
    rep = oracle_combine(system_records, default_index=0)
    if rep.oracle_accuracy < max(rep.component_accuracy) - 1e-12:
        violations += 1
    if rep.oracle_f1 < rep.component_f1[0] - 1e-12:
        violations += 1
    spread = f"{min(rep.component_f1):.3f}..{max(rep.component_f1):.3f}"
    report("Oracle dominance", violations == 0,
           f"50 random pairs + all 9 trained synthetic systems, "
           f"{violations} violations (=0 required); 9-system oracle F1 "
           f"{rep.oracle_f1:.3f} over components spanning {spread}")


# ---------------------------------------------------------------------------
# 7. Metric oracle
# ---------------------------------------------------------------------------

def brute_counts(records, include_o):
    classes = sorted({r.gold for r in records} | {r.pred for r in records})
    if not include_o:
        classes = [c for c in classes if c != "O"]
    tp = sum(1 for r in records for c in classes if r.gold == c and r.pred == c)
    fp = sum(1 for r in records for c in classes if r.pred == c and r.gold != c)
    fn = sum(1 for r in records for c in classes if r.gold == c and r.pred != c)
    return tp, fp, fn


def test_metric_oracle():
    rng = RngState(41)
    labels = LABELS.labels
    mismatches = 0
    dominance_violations = 0
    for _ in range(100):
        n = 1 + rng.integers(0, 80)
        recs = mk_records([(labels[rng.integers(0, 5)], labels[rng.integers(0, 5)])
                           for _ in range(n)])
        for include_o in (False, True):
            rep = micro_prf(recs, include_o=include_o)
            if (rep.tp, rep.fp, rep.fn) != brute_counts(recs, include_o):
                mismatches += 1
        collapsed = [mk_record("ENT" if r.gold != "O" else "O",
                               "ENT" if r.pred != "O" else "O", sid=i)
                     for i, r in enumerate(recs)]
        rec_rep = recognition_prf(recs)
        if (rec_rep.tp, rec_rep.fp, rec_rep.fn) != brute_counts(collapsed, False):
            mismatches += 1
        matrix = confusion(recs)
        for g in matrix.labels:
            for p in matrix.labels:
                expected = sum(1 for r in recs if r.gold == g and r.pred == p)
                if matrix.cell(g, p) != expected:
                    mismatches += 1
        if rec_rep.f1 < micro_prf(recs).f1 - 1e-12:
            dominance_violations += 1
    report("Metric oracle", mismatches == 0 and dominance_violations == 0,
           f"100 random record sets: {mismatches} count mismatches (=0), "
           f"{dominance_violations} recognition<typed violations (=0)")


# ---------------------------------------------------------------------------
# 8. Pattern detectors
# ---------------------------------------------------------------------------

NEGATIVES = [
    "The CEO of Acme resigned .",
    "My name is Alice .",
    "She walked to the station early .",
    "Profits fell sharply after the merger talks collapsed .",
    "He supported conditions proposed by the trading office .",
    "Nobody expected the committee to adjourn without a vote .",
    "The flight to Oslo leaves in two hours .",
    "Analysts said the outlook remains uncertain .",
    "A spokesman declined to comment on the inquiry .",
    "Workers at the plant voted to end the strike .",
]


def test_pattern_detectors():
    from conftest import mk_corpus
    from tagscope.evalkit import HONORIFICS

    sports_hit = is_sports_score_sentence("France 0 Italy 1")
    honorific_hit = honorific_stat(
        mk_corpus([("Mr. Smith spoke .", ["O", "PER", "O", "O"])])).fraction == 1.0
    negative_hits = 0
    for text in NEGATIVES:
        if is_sports_score_sentence(text):
            negative_hits += 1
        tokens = text.split()
        if any(tokens[i - 1] in HONORIFICS for i in range(1, len(tokens))):
            negative_hits += 1
    report("Pattern detectors",
           sports_hit and honorific_hit and negative_hits == 0,
           f"'France 0 Italy 1' matches={sports_hit}, 'Mr. Smith' fires="
           f"{honorific_hit}, {negative_hits}/10 negatives matched (=0)")


# ---------------------------------------------------------------------------
# 9. Mask invariance
# ---------------------------------------------------------------------------

def test_mask_invariance():
    rng = RngState(55)
    corpus = template_corpus(TRAIN_NAMES)
    table = synthetic_table([corpus], dim=12, seed=5)
    config = TrainConfig(epochs=1, hidden_dim=6, embedding_dim=12, seed=9)
    vocab = build_vocab_snapshot(corpus, table, trainable=False, config=config)
    model = SequenceTagger(ARCH_FULL, LABELS, config, vocab, RngState(9))
    words = sorted(vocab.index) + ["Zq1", "Zq2"]
    violations = 0
    for _ in range(100):
        n = 1 + rng.integers(0, 7)
        picks = [words[rng.integers(0, len(words))] for _ in range(n)]
        pos = rng.integers(0, n)
        baseline = masked_predict(model, mk_sentence(picks), pos)
        for _ in range(3):
            changed = list(picks)
            changed[pos] = words[rng.integers(0, len(words))]
            if masked_predict(model, mk_sentence(changed), pos) != baseline:
                violations += 1
    report("Mask invariance", violations == 0,
           f"100 (sentence, position) pairs x 3 surface swaps, "
           f"{violations} output changes (=0 required)")


# ---------------------------------------------------------------------------
# 10. Gate contract
# ---------------------------------------------------------------------------

def test_gate_contract(capsys):
    train_c, test_c, table = train_test_split()
    config = TrainConfig(epochs=2, lr=0.05, hidden_dim=6,
                         embedding_dim=table.dim, seed=3)
    model = train(ARCH_GATED, train_c, table, config)
    recs = predict_records(model, test_c) + predict_records(model, train_c,
                                                            dataset="train")
    in_range = all(0.0 < r.g_w < 1.0 and 0.0 < r.g_c < 1.0 for r in recs)

    hand = [mk_record("PER", "PER", sid=0, system="g", g_w=0.81, g_c=0.91),
            mk_record("LOC", "ORG", sid=1, system="g", g_w=0.62, g_c=0.92),
            mk_record("O", "O", sid=2, system="g", g_w=0.93, g_c=0.63),
            mk_record("O", "LOC", sid=3, system="g", g_w=0.64, g_c=0.94)]
    stats = gate_stats(hand)
    exact = (stats.cells["entity correct"].mean_g_w == 0.81
             and stats.cells["entity correct"].mean_g_c == 0.91
             and stats.cells["entity incorrect"].mean_g_w == 0.62
             and stats.cells["entity incorrect"].mean_g_c == 0.92
             and stats.cells["O correct"].mean_g_w == 0.93
             and stats.cells["O correct"].mean_g_c == 0.63
             and stats.cells["O incorrect"].mean_g_w == 0.64
             and stats.cells["O incorrect"].mean_g_c == 0.94)
    table_text = gate_stats(recs).to_text()
    shape_ok = ("Context" in table_text and "Word" in table_text
                and all(row in table_text for row in
                        ("entity correct", "entity incorrect",
                         "O correct", "O incorrect")))
    report("Gate contract", in_range and exact and shape_ok,
           f"{len(recs)} emitted gate pairs in (0,1)={in_range}, hand-computed "
           f"cell means exact={exact}, table shape emitted={shape_ok}")


# ---------------------------------------------------------------------------
# 11. Annotation pipeline with scripted annotators + HTTP blinding
# ---------------------------------------------------------------------------

FORBIDDEN_KEYS = {"gold", "role", "word", "expected", "partner_id", "system_pred"}


def _scan_keys(doc):
    found = set()
    if isinstance(doc, dict):
        for key, value in doc.items():
            found.add(key)
            found |= _scan_keys(value)
    elif isinstance(doc, list):
        for value in doc:
            found |= _scan_keys(value)
    return found


def test_annotation_pipeline(tmp_path):
    options = LABELS.labels
    # 8 normal items: 4 system errors with scripted human outcomes + 4 controls
    plans = {  # gold, per-annotator selections for the three *clean* annotators
        "err-0": ("PER", [("PER",), ("PER",), ("ORG",)]),        # class 1
        "err-1": ("LOC", [("ORG",), ("ORG",), ("LOC",)]),        # class 2 wrong
        "err-2": ("ORG", [("PER", "ORG"), ("PER",), ("ORG",)]),  # 2-2 tie -> none
        "err-3": ("MISC", [("MISC",), ("MISC",), ("O",)]),       # class 1
    }
    items = [AnnotationItem(name, f"scripted context {name} with ___ inside .",
                            options, gold, word=f"hidden-{name}", system_pred="O")
             for name, (gold, _) in plans.items()]
    items += [AnnotationItem(f"ok-{i}", f"control {i} context ___ .", options,
                             "PER", word=f"hidden-ok{i}", system_pred="PER")
              for i in range(4)]
    batches = build_batches(items, RngState(12))
    assert len(batches) == 1

    log = tmp_path / "answers.jsonl"
    app = create_app(batches, answer_log=log, annotators_per_batch=5,
                     admin_token="t0ken")
    client = TestClient(app)
    check_expected = dict(INSTRUCTION_CHECKS)

    def selections_for(annotator_idx, kind, payload_items):
        """Scripted answers per annotator over the *served* payload."""
        seen_texts = {}
        out = []
        for it in payload_items:
            text = it["text"]
            if text in check_expected:  # the instruction-check item
                if kind == "blind":
                    wrong = next(o for o in options if o != check_expected[text])
                    out.append((it["item_id"], [wrong]))
                else:
                    out.append((it["item_id"], [check_expected[text]]))
                continue
            base = next((n for n in plans if n in text), None)
            if base is not None:
                pick = list(plans[base][1][annotator_idx]) if kind == "clean" \
                    else ["PER"]
            else:
                pick = ["PER"]
            occurrence = seen_texts.get(text, 0)
            seen_texts[text] = occurrence + 1
            if kind == "flaky" and occurrence == 1:
                pick = pick + ["MISC"] if "MISC" not in pick else ["O"]
            out.append((it["item_id"], pick))
        return out

    annotators = [("clean1", "clean", 0), ("clean2", "clean", 1),
                  ("clean3", "clean", 2), ("flaky", "flaky", 0),
                  ("blind", "blind", 0)]
    blinding_ok = True
    for name, kind, idx in annotators:
        payload = client.get("/api/batch", params={"annotator": name}).json()
        if _scan_keys(payload) & FORBIDDEN_KEYS:
            blinding_ok = False
        if any("hidden-" in it["text"] for it in payload["batch"]["items"]):
            blinding_ok = False
        entries = [{"item_id": iid, "selected": sel}
                   for iid, sel in selections_for(idx, kind, payload["batch"]["items"])]
        resp = client.post("/api/answers", json={
            "annotator": name, "batch_id": payload["batch"]["batch_id"],
            "answers": entries})
        assert resp.status_code == 200

    answers = read_answer_log(log)
    qc = qc_filter(batches, answers)
    batch_id = batches[0].batch_id
    expected_retained = {("clean1", batch_id), ("clean2", batch_id),
                         ("clean3", batch_id)}
    retained_ok = qc.retained == expected_retained and \
        {("flaky", batch_id), ("blind", batch_id)} <= qc.dropped

    # majority labels over retained annotators, per scripted plan
    majority_ok = (majority_label(plans["err-0"][1]) == "PER"
                   and majority_label(plans["err-1"][1]) == "ORG"
                   and majority_label(plans["err-2"][1]) is NO_MAJORITY
                   and majority_label(plans["err-3"][1]) == "MISC")

    study = error_class_report(batches, answers, qc=qc)
    fractions = study.fractions()
    fractions_ok = (study.class_counts[CLASS_HUMAN_CORRECT] == 2
                    and study.class_counts[CLASS_MAJORITY_WRONG] == 1
                    and study.class_counts[CLASS_NO_MAJORITY] == 1
                    and fractions[CLASS_HUMAN_CORRECT] == 0.5
                    and fractions[CLASS_MAJORITY_WRONG] == 0.25
                    and fractions[CLASS_NO_MAJORITY] == 0.25
                    and study.control_items == 4)
    report("Annotation pipeline",
           blinding_ok and retained_ok and majority_ok and fractions_ok,
           f"blinding={blinding_ok}, retained set={retained_ok}, majorities "
           f"(incl. multi-select tie)={majority_ok}, fractions 50/25/25="
           f"{fractions_ok}")


# ---------------------------------------------------------------------------
# 12. [SECONDARY] UI flow: compiled browser client against a live server
# ---------------------------------------------------------------------------

_DIST = Path(__file__).resolve().parents[1] / "frontend" / "dist"


@pytest.mark.skipif(not (_DIST / "api.js").exists(),
                    reason="frontend not built (npm run build)")
def test_ui_flow_secondary(tmp_path):
    import shutil
    if shutil.which("node") is None:
        pytest.skip("node unavailable")
    from test_frontend_integration import (test_compiled_client_against_live_server,
                                           live_server)
    gen = live_server.__wrapped__(tmp_path)
    env = next(gen)
    try:
        test_compiled_client_against_live_server(env)
        ok = True
    finally:
        try:
            next(gen)
        except StopIteration:
            pass
    report("UI flow (secondary)", ok,
           "one batch of 10 completed through the compiled client: payload "
           "matches selections, empty submission blocked, drafts survive "
           "reload, no gold on the wire, duplicate gets 409")


# ---------------------------------------------------------------------------
# 13. Determinism through the CLI
# ---------------------------------------------------------------------------

def test_cli_determinism(tmp_path, capsys):
    train_c, test_c, table = train_test_split()
    train_path = tmp_path / "train.conll"
    test_path = tmp_path / "test.conll"
    train_path.write_text(to_conll(train_c))
    test_path.write_text(to_conll(test_c))
    vec_path = tmp_path / "vectors.txt"
    write_embeddings(vec_path, table)
    outputs = []
    for tag in ("a", "b"):
        ckpt = tmp_path / f"run-{tag}.json"
        code = cli_main(["train", "--arch", "gated-bilstm-crf",
                         "--train", str(train_path), "--embeddings", str(vec_path),
                         "--embedding-dim", "12", "--hidden-dim", "8",
                         "--epochs", "2", "--seed", "7", "--out", str(ckpt)])
        assert code == 0
        pred = tmp_path / f"run-{tag}.jsonl"
        assert cli_main(["predict", "--model", str(ckpt), "--data", str(test_path),
                         "--out", str(pred)]) == 0
        outputs.append((ckpt.read_bytes(), pred.read_bytes()))
    capsys.readouterr()
    ckpt_same = outputs[0][0] == outputs[1][0]
    pred_same = outputs[0][1] == outputs[1][1]
    report("Determinism", ckpt_same and pred_same,
           f"two `train --seed 7` runs: checkpoints bit-identical={ckpt_same}, "
           f"predictions bit-identical={pred_same}")
