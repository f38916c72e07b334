"""Requirement-level evaluation: span extraction, matching, P/R/F1.

A predicted requirement is a maximal run of non-O tags; the B/I split
inside a run is ignored. Matching defaults to exact (start, end)
equality; token-overlap matching is available for comparability.
Counts are pooled (micro-averaged) across all sentences of a domain.
"""

import json
from dataclasses import dataclass

from .data import TAG_INDEX


@dataclass
class RequirementSpan:
    start: int  # inclusive
    end: int    # inclusive
    text: str = ""

    def overlaps(self, other: "RequirementSpan") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass
class MetricsTriple:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def extract_spans(tags, tokens=None):
    """Maximal runs of non-O tags, as sorted disjoint spans.

    Accepts tag names or indices; the input need not be valid BIO.
    """
    norm = [TAG_INDEX[t] if isinstance(t, str) else int(t) for t in tags]
    spans = []
    start = None
    for pos, t in enumerate(norm):
        if t != 0 and start is None:
            start = pos
        elif t == 0 and start is not None:
            spans.append(_make_span(start, pos - 1, tokens))
            start = None
    if start is not None:
        spans.append(_make_span(start, len(norm) - 1, tokens))
    return spans


def _make_span(start, end, tokens):
    text = " ".join(tokens[start:end + 1]) if tokens else ""
    return RequirementSpan(start=start, end=end, text=text)


def match_spans(predicted, gold, overlap: bool = False):
    """(tp, fp, fn) for one sentence's spans.

    Exact mode requires identical (start, end). Overlap mode matches a
    predicted span to at most one unmatched gold span sharing a token,
    greedily in start order.
    """
    if not overlap:
        gold_keys = {(g.start, g.end) for g in gold}
        pred_keys = {(p.start, p.end) for p in predicted}
        tp = len(gold_keys & pred_keys)
        return tp, len(pred_keys) - tp, len(gold_keys) - tp
    used = [False] * len(gold)
    tp = 0
    for p in sorted(predicted, key=lambda s: s.start):
        for j, g in enumerate(sorted(gold, key=lambda s: s.start)):
            if not used[j] and p.overlaps(g):
                used[j] = True
                tp += 1
                break
    return tp, len(predicted) - tp, len(gold) - tp


def compute_metrics(tp: int, fp: int, fn: int) -> MetricsTriple:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsTriple(precision=precision, recall=recall, f1=f1,
                         tp=tp, fp=fp, fn=fn)


def evaluate_tag_pairs(pairs, overlap: bool = False) -> MetricsTriple:
    """Micro-averaged metrics over (predicted_tags, gold_tags) pairs."""
    tp = fp = fn = 0
    for pred_tags, gold_tags in pairs:
        t, p, n = match_spans(extract_spans(pred_tags), extract_spans(gold_tags),
                              overlap=overlap)
        tp += t
        fp += p
        fn += n
    return compute_metrics(tp, fp, fn)


def evaluate_domain(params, vocab, sentences, overlap: bool = False,
                    oracle: bool = False) -> MetricsTriple:
    """Decode a held-out domain's sentences and score them.

    oracle=True feeds the gold tags back as predictions (sanity mode).
    """
    from .embeddings import encode_tokens
    from .network import predict_tags
    pairs = []
    for s in sentences:
        gold = s.tag_indices()
        pred = gold if oracle else predict_tags(
            params, encode_tokens(s.tokens, vocab))
        pairs.append((pred, gold))
    return evaluate_tag_pairs(pairs, overlap=overlap)


class BaselineMismatchError(ValueError):
    pass


def load_baselines(path, fold_labels):
    """Baseline score file: JSON map domain -> {precision?, recall?, f1}."""
    with open(path, encoding="utf-8") as fh:
        table = json.load(fh)
    missing = sorted(set(table) - set(fold_labels))
    if missing:
        raise BaselineMismatchError(
            f"baseline domains not present in fold reports: {missing}")
    return table


def render_report(fold_reports, baselines: dict | None = None):
    """(json_doc, text_table) for a list of FoldReport objects."""
    rows = []
    for fr in fold_reports:
        row = {
            "domain": fr.held_out_domain,
            "precision": fr.mean_precision,
            "recall": fr.mean_recall,
            "f1": fr.mean_f1,
            "runs": fr.runs,
        }
        if baselines and fr.held_out_domain in baselines:
            row["baselines"] = baselines[fr.held_out_domain]
        rows.append(row)
    n = len(fold_reports)
    mean_row = {
        "domain": "MEAN",
        "precision": sum(r["precision"] for r in rows) / n if n else 0.0,
        "recall": sum(r["recall"] for r in rows) / n if n else 0.0,
        "f1": sum(r["f1"] for r in rows) / n if n else 0.0,
    }
    doc = {"folds": rows, "mean": mean_row,
           "note": "zero-denominator metrics reported as 0"}

    headers = ["domain", "precision", "recall", "f1"]
    baseline_cols = []
    if baselines:
        seen = set()
        for scores in baselines.values():
            for k in scores:
                if k not in seen:
                    seen.add(k)
                    baseline_cols.append(k)
        headers += [f"baseline_{c}" for c in baseline_cols]
    lines = []
    all_rows = rows + [mean_row]
    width = max([len("domain")] + [len(str(r["domain"])) for r in all_rows])
    fmt_head = "  ".join(["{:<%d}" % width] + ["{:>18}"] * (len(headers) - 1))
    lines.append(fmt_head.format(*headers))
    for r in all_rows:
        cells = [str(r["domain"])] + ["{:.4f}".format(r[k])
                                      for k in ("precision", "recall", "f1")]
        for c in baseline_cols:
            v = r.get("baselines", {}).get(c) if r is not mean_row else None
            cells.append("{:.4f}".format(v) if v is not None else "-")
        lines.append(fmt_head.format(*cells))
    return doc, "\n".join(lines)
