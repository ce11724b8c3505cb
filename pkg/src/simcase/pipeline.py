"""End-to-end pipeline: train, evaluate, retune, predict and analyse.

Every stage reads its inputs from the configuration and from artifacts
earlier stages left in the output directory, so stages can also be run
one at a time from the command line.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .analytics import (
    CorrelationMatrix,
    MetadataBreakdown,
    TimeSeries,
    _normalized_texts,
    bin_time_series,
    metadata_breakdown,
    phi_correlations,
    word_frequencies,
    word_presence,
)
from .config import PipelineConfig
from .corpus import Corpus, CorpusSchema, DatasetSplit, PrecedentSpec, load_corpus, parse_date, stratified_split
from .evaluation import EvaluationReport, compute_metrics, retune_threshold
from .explain import (
    DegenerateImportance,
    ImportanceRanking,
    consensus_features,
    forest_importances,
    lime_aggregate,
    lime_explain,
    linear_importances,
)
from .models import (
    DEFAULT_THRESHOLDS,
    Forest,
    LinearModel,
    RegexMatcher,
    Scorer,
    load_external_scores,
    load_scorer,
    save_scorer,
    train_linear_svm,
    train_logistic,
    train_random_forest,
)
from .reports import (
    ReportError,
    artifact_name,
    fmt,
    pct,
    plot_breakdown,
    plot_heatmaps,
    plot_timeseries,
    read_table,
    write_table,
)
from .textprep import TextPreprocessor
from .vectorize import TfidfModel, fit_tfidf

log = logging.getLogger(__name__)

STAGES = ("train", "evaluate", "predict", "retune", "timeseries", "correlate", "breakdown", "explain", "report")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# result containers handed to emit_report


@dataclass
class ThresholdRow:
    bp_id: str
    model: str
    initial: float
    tuned: float


@dataclass
class TimeSeriesResult:
    bp_id: str
    publication_date: dt.date
    bin_starts: tuple[dt.date, ...]
    bin_ends: tuple[dt.date, ...]
    columns: dict[str, np.ndarray]


@dataclass
class CorrelationResult:
    bp_id: str
    words: tuple[str, ...]
    sets: dict[str, CorrelationMatrix]


@dataclass
class FrequencyResult:
    bp_id: str
    words: tuple[str, ...]
    sets: dict[str, np.ndarray]


@dataclass
class BreakdownResult:
    bp_id: str
    model: str
    breakdown: MetadataBreakdown


@dataclass
class ImportanceRow:
    bp_id: str
    classifier: str
    rank: int
    term: str
    importance: float
    consensus: bool


@dataclass
class LimeRow:
    bp_id: str
    term: str
    percentage: float


def emit_report(kind: str, results, out_dir: str | Path, fmt_: str = "table") -> list[Path]:
    """Write one artifact kind as a CSV table or an SVG plot; returns written paths."""
    out_dir = Path(out_dir)
    if fmt_ not in ("table", "plot"):
        raise ReportError(f"unknown report format {fmt_!r}")
    if kind not in ("metrics", "thresholds", "timeseries", "correlation", "frequency", "breakdown",
                    "importance", "lime"):
        raise ReportError(f"unknown artifact kind {kind!r}")
    if results is None or (isinstance(results, (list, tuple, dict)) and not results):
        raise ReportError(f"no {kind} results to emit")
    tables, plots = out_dir / "tables", out_dir / "plots"

    if kind == "metrics":
        if fmt_ == "plot":
            raise ReportError("metrics are emitted as a table only")
        rows = [[r.bp_id, r.model, pct(r.f1), pct(r.precision), pct(r.recall), pct(r.auprc)] for r in results]
        return [write_table(tables / artifact_name(kind), ["BP", "model", "F1", "precision", "recall", "AUPRC"], rows)]

    if kind == "thresholds":
        if fmt_ == "plot":
            raise ReportError("thresholds are emitted as a table only")
        bps = list(dict.fromkeys(r.bp_id for r in results))
        models = list(dict.fromkeys(r.model for r in results))
        lookup = {(r.bp_id, r.model): r for r in results}
        rows = []
        for m in models:
            for variant in ("initial", "tuned"):
                row = [m, variant]
                for bp in bps:
                    r = lookup.get((bp, m))
                    row.append(fmt(getattr(r, variant)) if r else "")
                rows.append(row)
        return [write_table(tables / artifact_name(kind), ["model", "threshold"] + [f"BP {b}" for b in bps], rows)]

    if kind == "timeseries":
        res: TimeSeriesResult = results
        if fmt_ == "table":
            names = list(res.columns)
            rows = [[s.isoformat(), e.isoformat()] + [int(res.columns[n][i]) for n in names]
                    for i, (s, e) in enumerate(zip(res.bin_starts, res.bin_ends))]
            return [write_table(tables / artifact_name(kind, res.bp_id), ["bin_start", "bin_end"] + names, rows)]
        return [plot_timeseries(plots / artifact_name(kind, res.bp_id, ext="svg"), res.bin_starts, res.bin_ends,
                                res.columns, res.publication_date, f"BP {res.bp_id}")]

    if kind == "correlation":
        res: CorrelationResult = results
        if fmt_ == "table":
            rows = []
            for name, cm in res.sets.items():
                for i, a in enumerate(cm.words):
                    for j, b in enumerate(cm.words):
                        rows.append([name, a, b, fmt(cm.matrix[i, j]), int(cm.degenerate[i] or cm.degenerate[j]),
                                     cm.n_docs])
            return [write_table(tables / artifact_name(kind, res.bp_id),
                                ["set", "word_a", "word_b", "phi", "degenerate", "n_docs"], rows)]
        return [plot_heatmaps(plots / artifact_name(kind, res.bp_id, ext="svg"),
                              {n: cm.matrix for n, cm in res.sets.items()}, res.words, -1.0, 1.0,
                              f"BP {res.bp_id}: word correlations")]

    if kind == "frequency":
        res: FrequencyResult = results
        if fmt_ == "table":
            rows = [[name, w, fmt(freq[j])] for name, freq in res.sets.items() for j, w in enumerate(res.words)]
            return [write_table(tables / artifact_name(kind, res.bp_id), ["set", "word", "frequency"], rows)]
        return [plot_heatmaps(plots / artifact_name(kind, res.bp_id, ext="svg"),
                              {n: np.asarray(f)[:, None] for n, f in res.sets.items()}, res.words, 0.0, 1.0,
                              f"BP {res.bp_id}: word frequencies")]

    if kind == "breakdown":
        res: BreakdownResult = results
        bd = res.breakdown
        field_tag = bd.field.replace(":", "-").replace(" ", "-")
        name = artifact_name(kind, res.bp_id, res.model, field_tag, ext="csv" if fmt_ == "table" else "svg")
        if fmt_ == "table":
            groups = list(bd.groups)
            rows = [[s.isoformat()] + [int(bd.groups[g].counts[i]) for g in groups] + [int(bd.total.counts[i])]
                    for i, s in enumerate(bd.total.bin_starts)]
            return [write_table(tables / name, ["bin_start"] + groups + ["total"], rows)]
        return [plot_breakdown(plots / name, bd.total.bin_starts, {g: ts.counts for g, ts in bd.groups.items()},
                               f"BP {res.bp_id} / {res.model}: {bd.field}")]

    if kind == "importance":
        if fmt_ == "plot":
            raise ReportError("importances are emitted as a table only")
        rows = [[r.bp_id, r.classifier, r.rank, r.term, f"{r.importance:.4f}", int(r.consensus)] for r in results]
        return [write_table(tables / artifact_name(kind), ["BP", "classifier", "rank", "term", "importance",
                                                           "consensus"], rows)]

    if fmt_ == "plot":
        raise ReportError("LIME frequencies are emitted as a table only")
    rows = [[r.bp_id, r.term, f"{r.percentage:.1f}"] for r in results]
    return [write_table(tables / artifact_name(kind), ["BP", "term", "percentage"], rows)]


# ---------------------------------------------------------------------------
# workspace


class Workspace:
    """Lazily loaded corpora, token streams and output bookkeeping for one run."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = cfg.out_dir
        self.prep: TextPreprocessor = cfg.preprocessor()
        self._corpora: dict[str, Corpus] = {}
        self._tokens: dict[str, list[list[str]]] = {}
        self._texts: dict[str, list[str]] = {}
        self._scorers: dict[tuple[str, str, str], Scorer] = {}
        self.outputs: list[tuple[Path, str]] = []
        self.stage = ""

    def dir(self, name: str) -> Path:
        d = self.out / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def record(self, paths) -> None:
        for p in paths if isinstance(paths, (list, tuple)) else [paths]:
            self.outputs.append((Path(p), self.stage))

    def corpus(self, which: str) -> Corpus:
        if which not in self._corpora:
            path = self.cfg.path(which)
            if path is None or not path.exists():
                raise FileNotFoundError(f"{which} corpus not found: {path}")
            self._corpora[which] = load_corpus(path, CorpusSchema())
        return self._corpora[which]

    def tokens(self, which: str) -> list[list[str]]:
        if which not in self._tokens:
            self._tokens[which] = self.prep.many([d.text for d in self.corpus(which)], workers=self.cfg.workers)
        return self._tokens[which]

    def normalized_texts(self, which: str) -> list[str]:
        if which not in self._texts:
            self._texts[which] = _normalized_texts(self.corpus(which).documents)
        return self._texts[which]

    def date_range(self) -> tuple[dt.date, dt.date]:
        lo1, hi1 = self.corpus("labeled").date_range()
        lo2, hi2 = self.corpus("unlabeled").date_range()
        return min(lo1, lo2), max(hi1, hi2)

    # model bookkeeping ---------------------------------------------------

    def model_names(self, bp_id: str) -> list[str]:
        names = list(self.cfg["models"]["menu"])
        names += [e["name"] for e in self.cfg["models"]["external"] if str(e["bp_id"]) == bp_id]
        return names

    def external_entry(self, bp_id: str, name: str) -> dict | None:
        for e in self.cfg["models"]["external"]:
            if str(e["bp_id"]) == bp_id and e["name"] == name:
                return e
        return None

    def model_path(self, bp_id: str, name: str) -> Path:
        return self.dir("models") / f"{bp_id}_{name}.json"

    def scorer(self, bp_id: str, name: str, which: str = "labeled") -> Scorer:
        ext = self.external_entry(bp_id, name)
        key = (bp_id, name, which if ext is not None else "")
        if key in self._scorers:
            return self._scorers[key]
        if ext is not None:
            scores = load_external_scores(self.cfg.resolve(ext[which]), source=name)
            sc = Scorer(name, scores, float(ext.get("threshold", 0.5)), None, self.prep)
        else:
            path = self.model_path(bp_id, name)
            if not path.exists():
                raise FileNotFoundError(f"model {path} not found; run the train stage first")
            sc = load_scorer(path, self.prep)
        self._scorers[key] = sc
        return sc

    def scores_path(self, bp_id: str, name: str, which: str) -> Path:
        return self.dir("scores") / f"{bp_id}_{name}_{which}.csv"

    def read_scores(self, bp_id: str, name: str, which: str) -> np.ndarray:
        path = self.scores_path(bp_id, name, which)
        if not path.exists():
            stage = "evaluate" if which == "labeled" else "predict"
            raise FileNotFoundError(f"scores {path} not found; run the {stage} stage first")
        header, rows = read_table(path)
        by_id = {r[0]: float(r[1]) for r in rows}
        return np.array([by_id[d.id] for d in self.corpus(which)])

    def write_scores(self, bp_id: str, name: str, which: str, scores: np.ndarray) -> None:
        rows = [[d.id, fmt(s)] for d, s in zip(self.corpus(which), scores)]
        self.record(write_table(self.scores_path(bp_id, name, which), ["id", "score"], rows))

    def score_corpus(self, bp_id: str, name: str, which: str) -> np.ndarray:
        scorer = self.scorer(bp_id, name, which)
        docs = self.corpus(which).documents
        tokens = self.tokens(which) if scorer.tfidf is not None else None
        return scorer.score_documents(docs, tokens=tokens)

    def thresholds(self) -> dict[tuple[str, str], ThresholdRow]:
        path = self.out / "tables" / artifact_name("thresholds")
        if not path.exists():
            raise FileNotFoundError(f"{path} not found; run the retune stage first")
        header, rows = read_table(path)
        bps = [h[3:] for h in header[2:]]
        found: dict[tuple[str, str], dict] = {}
        for row in rows:
            model, variant = row[0], row[1]
            for bp, cell in zip(bps, row[2:]):
                if cell:
                    found.setdefault((bp, model), {})[variant] = float(cell)
        return {k: ThresholdRow(k[0], k[1], v["initial"], v["tuned"]) for k, v in found.items()}

    def split(self, bp_id: str) -> DatasetSplit:
        path = self.dir("splits") / f"split_{bp_id}.json"
        d = json.loads(path.read_text(encoding="utf-8"))
        return DatasetSplit(tuple(d["train"]), tuple(d["validation"]), tuple(d["test"]), d["seed"], d["bp_id"])


# ---------------------------------------------------------------------------
# stages


def _train_one(name: str, X, y, hyper: dict, seed: int):
    h = dict(hyper)
    if name == "svm":
        return train_linear_svm(X, y, seed=seed, **h)
    if name == "logistic":
        return train_logistic(X, y, seed=seed, **h)
    return train_random_forest(X, y, seed=seed, **h)


def stage_train(ws: Workspace) -> None:
    cfg = ws.cfg
    lab = ws.corpus("labeled")
    toks = ws.tokens("labeled")
    pos = {d.id: i for i, d in enumerate(lab)}
    for p in cfg.precedents():
        split = stratified_split(lab, p.bp_id, cfg["split"]["test_frac"], cfg["split"]["val_frac"], cfg.seed)
        split_path = ws.dir("splits") / f"split_{p.bp_id}.json"
        split_path.write_text(json.dumps(split.to_dict()), encoding="utf-8")
        ws.record(split_path)

        train_idx = [pos[i] for i in split.train]
        tfidf = fit_tfidf([toks[i] for i in train_idx], **cfg["vectorize"])
        tf_path = ws.dir("models") / f"tfidf_{p.bp_id}.json"
        tfidf.save(tf_path)
        ws.record(tf_path)
        X = tfidf.transform_many([toks[i] for i in train_idx])
        y = lab.labels(p.bp_id)[train_idx]
        for name in cfg["models"]["menu"]:
            if name == "regex":
                scorer = Scorer("regex", RegexMatcher(p.regex_terms), DEFAULT_THRESHOLDS["regex"], None, ws.prep)
            else:
                model = _train_one(name, X, y, cfg["models"][name], cfg.seed)
                scorer = Scorer(name, model, DEFAULT_THRESHOLDS[name], tfidf, ws.prep)
            save_scorer(scorer, ws.model_path(p.bp_id, name), tf_path)
            ws.record(ws.model_path(p.bp_id, name))
            log.info("trained %s for BP %s", name, p.bp_id)


def stage_evaluate(ws: Workspace) -> list[EvaluationReport]:
    lab = ws.corpus("labeled")
    pos = {d.id: i for i, d in enumerate(lab)}
    reports = []
    for p in ws.cfg.precedents():
        test_idx = np.array([pos[i] for i in ws.split(p.bp_id).test])
        y = lab.labels(p.bp_id)
        for name in ws.model_names(p.bp_id):
            scores = ws.score_corpus(p.bp_id, name, "labeled")
            ws.write_scores(p.bp_id, name, "labeled", scores)
            thr = ws.scorer(p.bp_id, name).threshold
            reports.append(compute_metrics(scores[test_idx], y[test_idx], thr, name, p.bp_id))
    ws.record(emit_report("metrics", reports, ws.out))
    return reports


def retune_source(ws: Workspace, p: PrecedentSpec) -> str:
    """Which corpus supplies the post-publication citation ground truth for ``p``."""
    source = ws.cfg["retune"]["source"]
    if source != "auto":
        return source
    unl = ws.corpus("unlabeled")
    post = np.array([d >= p.publication_date for d in unl.dates])
    return "unlabeled" if (unl.labels(p.bp_id)[post] == 1).any() else "labeled"


def stage_retune(ws: Workspace) -> list[ThresholdRow]:
    rows = []
    for p in ws.cfg.precedents():
        source = retune_source(ws, p)
        c = ws.corpus(source)
        if source == "labeled":
            # training documents carry overfit scores; tune on held-out ones
            split = ws.split(p.bp_id)
            held = set(split.validation) | set(split.test)
            idx = np.array([i for i, d in enumerate(c) if d.id in held])
        else:
            idx = np.arange(len(c))
        labels, dates = c.labels(p.bp_id)[idx], [c.dates[i] for i in idx]
        for name in ws.model_names(p.bp_id):
            scores = ws.read_scores(p.bp_id, name, source)[idx]
            tuned = retune_threshold(scores, labels, dates, p.publication_date, p.recall_floor)
            rows.append(ThresholdRow(p.bp_id, name, ws.scorer(p.bp_id, name).threshold, tuned))
        log.info("BP %s thresholds tuned on the %s corpus", p.bp_id, source)
    ws.record(emit_report("thresholds", rows, ws.out))
    return rows


def stage_predict(ws: Workspace) -> None:
    for p in ws.cfg.precedents():
        for name in ws.model_names(p.bp_id):
            ws.write_scores(p.bp_id, name, "unlabeled", ws.score_corpus(p.bp_id, name, "unlabeled"))


def _predicted_docs(ws: Workspace, p: PrecedentSpec, name: str, variant: str = "tuned"):
    thr = getattr(ws.thresholds()[(p.bp_id, name)], variant)
    scores = ws.read_scores(p.bp_id, name, "unlabeled")
    mask = scores >= thr
    return [d for d, m in zip(ws.corpus("unlabeled"), mask) if m], mask


def stage_timeseries(ws: Workspace) -> list[TimeSeriesResult]:
    width = ws.cfg["analysis"]["bin_width"]
    rng = ws.date_range()
    lab, unl = ws.corpus("labeled"), ws.corpus("unlabeled")
    out = []
    for p in ws.cfg.precedents():
        cols: dict[str, np.ndarray] = {}
        ts = bin_time_series([d.date for d in lab if d.cites(p.bp_id)], width, rng)
        cols["labeled_citations"] = ts.counts
        cols["citations"] = bin_time_series([d.date for d in unl if d.cites(p.bp_id)], width, rng).counts
        for name in ws.model_names(p.bp_id):
            for variant in ("initial", "tuned"):
                docs, _ = _predicted_docs(ws, p, name, variant)
                cols[f"{name}_{variant}"] = bin_time_series([d.date for d in docs], width, rng).counts
        res = TimeSeriesResult(p.bp_id, p.publication_date, ts.bin_starts, ts.bin_ends, cols)
        ws.record(emit_report("timeseries", res, ws.out))
        out.append(res)
    return out


def stage_correlate(ws: Workspace) -> list[CorrelationResult]:
    lab, unl = ws.corpus("labeled"), ws.corpus("unlabeled")
    out = []
    for p in ws.cfg.precedents():
        words = p.relevant_words
        if not words:
            log.warning("BP %s lists no relevant words; skipping correlations", p.bp_id)
            continue
        pres_lab = word_presence(lab.documents, words, ws.normalized_texts("labeled"))
        pres_unl = word_presence(unl.documents, words, ws.normalized_texts("unlabeled"))
        sets = {"groundtruth": pres_lab[lab.labels(p.bp_id) == 1]}
        for name in ws.model_names(p.bp_id):
            _, mask = _predicted_docs(ws, p, name)
            sets[name] = pres_unl[mask]
        corr = {n: phi_correlations(m, words) for n, m in sets.items() if len(m) >= 2}
        freq = {n: word_frequencies(m) for n, m in sets.items() if len(m) >= 1}
        cres = CorrelationResult(p.bp_id, tuple(words), corr)
        ws.record(emit_report("correlation", cres, ws.out))
        ws.record(emit_report("frequency", FrequencyResult(p.bp_id, tuple(words), freq), ws.out))
        out.append(cres)
    return out


def stage_breakdown(ws: Workspace) -> list[BreakdownResult]:
    an = ws.cfg["analysis"]
    rng = ws.date_range()
    out = []
    for p in ws.cfg.precedents():
        names = an["breakdown_models"] or ws.model_names(p.bp_id)
        for name in names:
            docs, _ = _predicted_docs(ws, p, name)
            for fld in an["breakdown_fields"]:
                bd = metadata_breakdown(docs, fld, int(an["top_k"]), an["bin_width"], rng)
                res = BreakdownResult(p.bp_id, name, bd)
                ws.record(emit_report("breakdown", res, ws.out))
                out.append(res)
    return out


def stage_explain(ws: Workspace) -> tuple[list[ImportanceRow], list[LimeRow]]:
    ex = ws.cfg["explain"]
    k = int(ex["k"])
    lab = ws.corpus("labeled")
    imp_rows: list[ImportanceRow] = []
    lime_rows: list[LimeRow] = []
    for p in ws.cfg.precedents():
        rankings: dict[str, ImportanceRanking] = {}
        for name in ws.cfg["models"]["menu"]:
            if name == "regex":
                continue
            sc = ws.scorer(p.bp_id, name)
            vocab = sc.tfidf.vocabulary
            try:
                if isinstance(sc.model, LinearModel):
                    rankings[name] = linear_importances(sc.model, vocab, len(vocab))
                elif isinstance(sc.model, Forest):
                    rankings[name] = forest_importances(sc.model, vocab, len(vocab), ex["forest_mode"])
            except DegenerateImportance:
                log.warning("BP %s: %s has no nonzero importance", p.bp_id, name)
        common = consensus_features(list(rankings.values()), max(k, 20))[:k] if len(rankings) >= 2 else []
        for name, r in rankings.items():
            imp = r.as_dict()
            ranks = {t: i + 1 for i, t in enumerate(r.terms)}
            shown = list(dict.fromkeys(r.terms[:k] + common))
            for t in shown:
                imp_rows.append(ImportanceRow(p.bp_id, name, ranks[t], t, imp[t], t in common))

        lime_name = ex["lime_model"]
        if lime_name not in ws.cfg["models"]["menu"] or int(ex["lime_docs"]) < 1:
            continue
        scorer = ws.scorer(p.bp_id, lime_name)
        test = set(ws.split(p.bp_id).test)
        docs = sorted((d for d in lab if d.id in test and d.cites(p.bp_id)), key=lambda d: d.id)
        docs = docs[: int(ex["lime_docs"])]
        expl = [lime_explain(scorer, d, int(ex["lime_samples"]), int(ex["lime_words"]), ws.cfg.seed) for d in docs]
        if expl:
            lime_rows += [LimeRow(p.bp_id, w, v) for w, v in lime_aggregate(expl, k)]
    if imp_rows:
        ws.record(emit_report("importance", imp_rows, ws.out))
    if lime_rows:
        ws.record(emit_report("lime", lime_rows, ws.out))
    return imp_rows, lime_rows


def _dates(cells: list[str]) -> tuple[dt.date, ...]:
    return tuple(parse_date(c) for c in cells)


def stage_report(ws: Workspace) -> list[Path]:
    """Render every figure from the tables already on disk."""
    tables = ws.out / "tables"
    written: list[Path] = []
    specs = {p.bp_id: p for p in ws.cfg.precedents()}
    for bp, p in specs.items():
        path = tables / artifact_name("timeseries", bp)
        if path.exists():
            header, rows = read_table(path)
            cols = {h: np.array([int(r[j + 2]) for r in rows]) for j, h in enumerate(header[2:])}
            res = TimeSeriesResult(bp, p.publication_date, _dates([r[0] for r in rows]), _dates([r[1] for r in rows]),
                                   cols)
            written += emit_report("timeseries", res, ws.out, "plot")
        path = tables / artifact_name("correlation", bp)
        if path.exists():
            header, rows = read_table(path)
            words = tuple(dict.fromkeys(r[1] for r in rows))
            idx = {w: i for i, w in enumerate(words)}
            mats: dict[str, np.ndarray] = {}
            for r in rows:
                M = mats.setdefault(r[0], np.zeros((len(words), len(words))))
                M[idx[r[1]], idx[r[2]]] = float(r[3])
            sets = {n: CorrelationMatrix(words, M, tuple(False for _ in words)) for n, M in mats.items()}
            written += emit_report("correlation", CorrelationResult(bp, words, sets), ws.out, "plot")
        path = tables / artifact_name("frequency", bp)
        if path.exists():
            header, rows = read_table(path)
            words = tuple(dict.fromkeys(r[1] for r in rows))
            sets: dict[str, list[float]] = {}
            for r in rows:
                sets.setdefault(r[0], []).append(float(r[2]))
            written += emit_report("frequency", FrequencyResult(bp, words, {n: np.array(v) for n, v in sets.items()}),
                                   ws.out, "plot")
        for path in sorted(tables.glob(f"breakdown_{bp}_*.csv")):
            header, rows = read_table(path)
            starts = _dates([r[0] for r in rows])
            groups = {g: np.array([int(r[j + 1]) for r in rows]) for j, g in enumerate(header[1:-1])}
            written.append(plot_breakdown(ws.dir("plots") / (path.stem + ".svg"), starts, groups,
                                          path.stem.replace("_", " ")))
    ws.record(written)
    return written


STAGE_FUNCS: dict[str, Callable[[Workspace], object]] = {
    "train": stage_train,
    "evaluate": stage_evaluate,
    "predict": stage_predict,
    "retune": stage_retune,
    "timeseries": stage_timeseries,
    "correlate": stage_correlate,
    "breakdown": stage_breakdown,
    "explain": stage_explain,
    "report": stage_report,
}


# ---------------------------------------------------------------------------
# manifest and full runs


@dataclass
class RunManifest:
    config_hash: str
    seeds: dict
    tool_version: str
    workers: int
    timings: dict[str, float] = field(default_factory=dict)
    stages: dict[str, str] = field(default_factory=dict)
    outputs: list[dict] = field(default_factory=list)
    status: str = "ok"
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "tool": "simcase",
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "workers": self.workers,
            "status": self.status,
            "error": self.error,
            "stages": self.stages,
            "timings": self.timings,
            "outputs": self.outputs,
        }

    def files(self, kind: str | None = None) -> list[str]:
        return [o["path"] for o in self.outputs if kind is None or o["path"].split("/")[-1].startswith(kind)]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_stages(cfg: PipelineConfig, stages=STAGES, manifest_name: str = "manifest.json") -> RunManifest:
    """Run ``stages`` in order, writing a manifest even when one fails."""
    cfg.check_files()
    ws = Workspace(cfg)
    ws.out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.hash(), {"seed": cfg.seed}, __version__, cfg.workers)
    failed_at = None
    try:
        for stage in stages:
            ws.stage = stage
            t0 = time.perf_counter()
            try:
                STAGE_FUNCS[stage](ws)
            except Exception as exc:
                failed_at = stage
                manifest.stages[stage] = "failed"
                manifest.status = "failed"
                manifest.error = f"{stage}: {type(exc).__name__}: {exc}"
                raise PipelineError(stage, exc) from exc
            finally:
                manifest.timings[stage] = round(time.perf_counter() - t0, 4)
            manifest.stages[stage] = "ok"
    finally:
        invalid = set(stages[stages.index(failed_at):]) if failed_at else set()
        seen = set()
        for path, stage in ws.outputs:
            rel = path.relative_to(ws.out).as_posix()
            if rel in seen or not path.exists():
                continue
            seen.add(rel)
            manifest.outputs.append({"path": rel, "stage": stage, "sha256": _sha256(path),
                                     "valid": stage not in invalid})
        manifest.outputs.sort(key=lambda o: o["path"])
        (ws.out / manifest_name).write_text(json.dumps(manifest.to_dict(), indent=2), encoding="utf-8")
    return manifest


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    """Full train, apply and analyse flow for every configured precedent."""
    return run_stages(cfg, STAGES)
