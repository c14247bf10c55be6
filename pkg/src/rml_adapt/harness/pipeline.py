"""Resumable experiment stages writing hash-stamped artifacts under one run directory."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import shutil
import warnings
from dataclasses import asdict
from pathlib import Path
from typing import Callable

import numpy as np

from ..classifier import ClassifierConfig, load_classifier, save_classifier, train_classifier
from ..corpus import (
    MetaSplit, MetaSplitConfig, SynthSpec, Vocabulary, build_vocab, ingest, make_meta_split, synthesize,
    write_pairs,
)
from ..curriculum import CurriculumWarning, ScoredPair, SplitConfig, read_manifest, split_tasks, write_manifest
from ..eval import BeamConfig, RobustnessMatrix, beam_decode_batch, bleu, chrf, robustness_matrix
from ..meta import MetaConfig, finetune, meta_train
from ..model import MixTransformer, ModelConfig, load_model, save_model
from ..train import PretrainConfig, pretrain
from .config import ExperimentConfig

log = logging.getLogger(__name__)

OUTPUT_ENV = "RML_ADAPT_OUTPUT"

STAGES = ("data", "train-classifier", "score", "split", "pretrain-mix", "meta-train", "finetune",
          "evaluate", "robustness", "report")
DEPS = {
    "data": (),
    "train-classifier": ("data",),
    "score": ("train-classifier",),
    "split": ("score",),
    "pretrain-mix": ("data",),
    "meta-train": ("split", "pretrain-mix"),
    "finetune": ("meta-train",),
    "evaluate": ("finetune",),
    "robustness": ("finetune",),
    "report": ("evaluate", "robustness"),
}

# meta-learned baseline -> (pretrained model it starts from, task manifest)
META_BASELINES = {
    "meta-only": ("general", "meta-only"),
    "meta-curriculum-cls": ("general", "meta-curriculum-cls"),
    "rmlnmt": ("mix", "rmlnmt"),
}
FT_SOURCE = {"plain-ft": "vanilla", "meta-only": "meta-only", "meta-curriculum-cls": "meta-curriculum-cls",
             "word-level-adaptive": "mix", "rmlnmt": "rmlnmt"}
WOFT_SOURCE = {"vanilla": "vanilla", "meta-only": "meta-only", "meta-curriculum-cls": "meta-curriculum-cls",
               "word-level-adaptive": "mix", "rmlnmt": "rmlnmt"}


class StageError(RuntimeError):
    pass


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def fmt(x: float) -> float:
    """Fixed rounding for report numbers."""
    return float(f"{x:.4f}")


class Run:
    """One experiment run directory: ``<root>/<name>/seed<seed>``."""

    def __init__(self, cfg: ExperimentConfig, sequential: bool = True):
        self.cfg = cfg
        self.sequential = sequential
        root = Path(os.environ.get(OUTPUT_ENV) or cfg.output_dir)
        self.dir = root / cfg.name / f"seed{cfg.seed}"
        self.hash = cfg.hash()

    # paths
    def path(self, *parts) -> Path:
        return self.dir.joinpath(*parts)

    def stamp_path(self, stage: str) -> Path:
        return self.path("stamps", f"{stage}.json")

    # stamps

    def read_stamp(self, stage: str) -> dict | None:
        p = self.stamp_path(stage)
        return json.loads(p.read_text()) if p.exists() else None

    def is_fresh(self, stage: str) -> bool:
        stamp = self.read_stamp(stage)
        if not stamp or stamp["config_hash"] != self.hash or stamp.get("inputs") != self.input_digests(stage):
            return False
        for rel, digest in stamp["outputs"].items():
            p = self.path(rel)
            if not p.exists() or sha256_file(p) != digest:
                return False
        return True

    def require(self, stage: str) -> None:
        stamp = self.read_stamp(stage)
        name = "synth` or `ingest" if stage == "data" else stage
        if stamp is None:
            raise StageError(f"missing upstream artifact: run `rml-adapt {name}` first")
        if stamp["config_hash"] != self.hash:
            raise StageError(f"artifacts of `{name}` come from config {stamp['config_hash']}, not {self.hash}; "
                             f"rerun `rml-adapt {name}`")
        for rel, digest in stamp["outputs"].items():
            p = self.path(rel)
            if not p.exists() or sha256_file(p) != digest:
                raise StageError(f"{rel} is missing or changed since `{name}` wrote it; rerun `rml-adapt {name}`")

    def input_digests(self, stage: str) -> dict[str, str]:
        return {dep: sha256_file(self.stamp_path(dep)) for dep in DEPS[stage]}

    def write_stamp(self, stage: str, outputs: list[Path]) -> None:
        rels = sorted(str(p.relative_to(self.dir)) for p in outputs)
        stamp = {"stage": stage, "config_hash": self.hash, "inputs": self.input_digests(stage),
                 "outputs": {r: sha256_file(self.path(r)) for r in rels}}
        p = self.stamp_path(stage)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(stamp, indent=1, sort_keys=True) + "\n")

    def run_stage(self, stage: str) -> bool:
        """Run ``stage`` unless its artifacts are current; returns whether work was done."""
        for dep in DEPS[stage]:
            self.require(dep)
        if self.is_fresh(stage):
            log.info("%s: artifacts up to date (config %s), nothing to do", stage, self.hash)
            return False
        log.info("%s: running (config %s)", stage, self.hash)
        outputs = STAGE_FUNCS[stage](self)
        self.write_stamp(stage, outputs)
        return True

    def run_all(self) -> None:
        for stage in STAGES:
            self.run_stage(stage)

    # shared artifact loaders

    def vocab(self) -> Vocabulary:
        return Vocabulary.load(self.path("data", "vocab.txt"))

    def split(self) -> MetaSplit:
        return MetaSplit.load(self.path("data", "split"))

    def label(self, domain: str) -> int:
        return self.cfg.domains.seen.index(domain)

    def pairs(self, texts, domain: str, scores=None) -> list[ScoredPair]:
        v = self.vocab_cache
        lab = self.label(domain) if domain in self.cfg.domains.seen else -1
        if scores is None:
            scores = [None] * len(texts)
        return [ScoredPair(v.encode(s), v.encode(t), lab, None if sc is None else float(sc))
                for (s, t), sc in zip(texts, scores)]

    @property
    def vocab_cache(self) -> Vocabulary:
        if getattr(self, "_vocab", None) is None:
            self._vocab = self.vocab()
        return self._vocab

    def extra(self) -> dict:
        return {"config_hash": self.hash}

    def meta_config(self) -> MetaConfig:
        m = self.cfg.meta
        return MetaConfig(alpha=m.alpha, beta=m.beta, epochs=m.epochs, order=m.order,
                          ft_strategy=m.ft_strategy, ft_steps=m.ft_steps, ft_lr=m.ft_lr,
                          ft_batch_size=m.ft_batch_size, seed=self.cfg.seed)


def _fresh_dir(path: Path) -> Path:
    if path.exists():
        shutil.rmtree(path)
    path.mkdir(parents=True)
    return path


def _files(root: Path) -> list[Path]:
    return sorted(p for p in root.rglob("*") if p.is_file())


# stages

def stage_data(run: Run) -> list[Path]:
    cfg = run.cfg
    out = _fresh_dir(run.path("data"))
    domains = cfg.domains.seen + cfg.domains.unseen
    if cfg.corpus.synthetic is not None:
        s = cfg.corpus.synthetic
        # the general domain comes first so it owns the shared substitution table
        order = [cfg.domains.general] + [d for d in domains if d != cfg.domains.general]
        corpora = synthesize(SynthSpec(domains=order, overlap=s.overlap, pairs_per_domain=s.pairs_per_domain,
                                       n_slots=s.n_slots, min_len=s.min_len, max_len=s.max_len, seed=cfg.seed))
    else:
        corpora = [ingest(cfg.corpus.files[d], d, max_len=cfg.corpus.max_len) for d in domains]
    for c in corpora:
        write_pairs(out / "corpus" / c.domain, c.pairs)
    vocab = build_vocab(corpora, cfg.corpus.vocab_cap)
    vocab.save(out / "vocab.txt")
    sp = cfg.split
    split = make_meta_split(corpora, MetaSplitConfig(
        seen=cfg.domains.seen, unseen=cfg.domains.unseen, meta_train_size=sp.meta_train_size,
        support_size=sp.support_size, query_size=sp.query_size, test_size=sp.test_size, dev_size=sp.dev_size,
        seed=cfg.seed))
    split.save(out / "split")
    stats = {"config_hash": run.hash, "vocab_size": len(vocab), "vocab_hash": vocab.hash,
             "corpora": {c.domain: {"provenance": c.provenance, **c.stats} for c in corpora}}
    (out / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n")
    run._vocab = None
    return _files(out)


def stage_train_classifier(run: Run) -> list[Path]:
    cfg = run.cfg
    split = run.split()
    sents = [s for d in cfg.domains.seen for s, _ in split.meta_train[d]]
    labels = [d for d in cfg.domains.seen for _ in split.meta_train[d]]
    c = cfg.classifier
    clf = train_classifier(sents, labels, run.vocab_cache, ClassifierConfig(
        scheme=c.scheme, embed_dim=c.embed_dim, hidden_dim=c.hidden_dim, epochs=c.epochs, lr=c.lr,
        batch_size=c.batch_size, heldout=c.heldout, seed=cfg.seed), general=cfg.domains.general)
    path = run.path("models", "classifier.npz")
    save_classifier(clf, path, run.extra())
    report = run.path("reports", "classifier.json")
    report.parent.mkdir(parents=True, exist_ok=True)
    report.write_text(json.dumps({"config_hash": run.hash, "scheme": c.scheme, "labels": clf.labels,
                                  "label_counts": clf.label_counts, "heldout_accuracy": fmt(clf.accuracy)},
                                 indent=1, sort_keys=True) + "\n")
    return [path, report]


def stage_score(run: Run) -> list[Path]:
    clf = load_classifier(run.path("models", "classifier.npz"))
    split = run.split()
    lines = []
    for d in run.cfg.domains.seen:
        src = [s for s, _ in split.meta_train[d]]
        for sc, s in zip(clf.scores(src), src):
            lines.append(f"{float(sc)!r}\t{d}\t{s}\n")
    path = run.path("data", "scores.tsv")
    path.write_text("".join(lines), encoding="utf-8")
    return [path]


def read_scores(run: Run) -> list[ScoredPair]:
    split = run.split()
    rows = run.path("data", "scores.tsv").read_text(encoding="utf-8").splitlines()
    out = []
    i = 0
    for d in run.cfg.domains.seen:
        pairs = split.meta_train[d]
        scores = []
        for s, _ in pairs:
            sc, dom, sent = rows[i].split("\t")
            if dom != d or sent != s:
                raise StageError("scores.tsv does not match the meta-train split; rerun `rml-adapt score`")
            scores.append(float(sc))
            i += 1
        out.extend(run.pairs(pairs, d, scores))
    return out


def stage_split(run: Run) -> list[Path]:
    cfg = run.cfg
    scored = read_scores(run)
    cu = cfg.curriculum
    out = _fresh_dir(run.path("tasks"))
    plans = {}
    if "rmlnmt" in cfg.baselines:
        plans["rmlnmt"] = (scored, cu.strategy)
    if "meta-curriculum-cls" in cfg.baselines:
        plans["meta-curriculum-cls"] = (scored, "token-based")
    if "meta-only" in cfg.baselines:
        rng = np.random.default_rng([cfg.seed, 21])
        shuffled = [ScoredPair(p.src, p.tgt, p.domain, float(r)) for p, r in zip(scored, rng.random(len(scored)))]
        plans["meta-only"] = (shuffled, "token-based")
    notes = {}
    for name, (pairs, strategy) in plans.items():
        sc = SplitConfig(n_tasks=cu.n_tasks, support_token_budget=cu.support_token_budget,
                         query_token_budget=cu.query_token_budget, strategy=strategy)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CurriculumWarning)
            tasks = split_tasks(pairs, sc)
        for w in sc.warnings:
            log.warning("split %s: %s", name, w)
        write_manifest(tasks, out / f"{name}.tsv")
        notes[name] = {"strategy": strategy, "n_tasks": len(tasks), "warnings": sc.warnings}
    (out / "summary.json").write_text(json.dumps({"config_hash": run.hash, "tasks": notes}, indent=1,
                                                 sort_keys=True) + "\n")
    return _files(out)


def _model_config(run: Run, kind: str) -> ModelConfig:
    m, k = run.cfg.model, run.cfg.k
    v = run.vocab_cache
    if kind == "mix":
        return ModelConfig(len(v), m.d_model, m.n_heads, m.d_ff, m.enc_layers, m.dec_layers, k, m.epsilon,
                           True, v.hash)
    widen = math.ceil(math.sqrt(k)) if kind == "vanilla" else 1
    return ModelConfig(len(v), m.d_model * widen, m.n_heads, m.d_ff * widen, m.enc_layers, m.dec_layers, 1,
                       m.epsilon, False, v.hash)


def _needed_pretrained(cfg: ExperimentConfig) -> list[str]:
    need = set()
    for b in cfg.baselines:
        if b in ("vanilla", "plain-ft"):
            need.add("vanilla")
        elif b in ("meta-only", "meta-curriculum-cls"):
            need.add("general")
        else:
            need.add("mix")
    if cfg.eval.robustness:
        need.add("vanilla")
    return [k for k in ("mix", "vanilla", "general") if k in need]


def stage_pretrain(run: Run) -> list[Path]:
    cfg = run.cfg
    split = run.split()
    seen = cfg.domains.seen
    everything = [p for d in seen for p in run.pairs(split.meta_train[d], d)]
    general = run.pairs(split.meta_train[cfg.domains.general], cfg.domains.general)
    out = _fresh_dir(run.path("models", "pretrained"))
    p = cfg.pretrain
    pc = PretrainConfig(steps=p.steps, batch_size=p.batch_size, lr=p.lr, warmup=p.warmup, clip=p.clip,
                        seed=cfg.seed)
    curves = {}
    for kind in _needed_pretrained(cfg):
        model = MixTransformer(_model_config(run, kind), seed=cfg.seed)
        data = general if kind == "general" else everything
        history = pretrain(model, data, pc)
        curves[kind] = {"first": fmt(history[0]), "last": fmt(history[-1]), "n_parameters": model.n_parameters()}
        save_model(model, out / f"{kind}.npz", run.extra())
        log.info("pretrained %s: loss %.4f -> %.4f", kind, history[0], history[-1])
    (out / "summary.json").write_text(json.dumps({"config_hash": run.hash, "models": curves}, indent=1,
                                                 sort_keys=True) + "\n")
    return _files(out)


def stage_meta_train(run: Run) -> list[Path]:
    cfg = run.cfg
    out = _fresh_dir(run.path("models", "meta"))
    logs = _fresh_dir(run.path("logs"))
    mc = run.meta_config()
    for name, (init, manifest) in META_BASELINES.items():
        if name not in cfg.baselines:
            continue
        model = load_model(run.path("models", "pretrained", f"{init}.npz"))
        tasks = read_manifest(run.path("tasks", f"{manifest}.tsv"))
        tasks = [t for t in tasks if t.support and t.query]
        if not tasks:
            raise StageError(f"no task of {manifest} has both a support and a query set; "
                             "lower the number of tasks or the token budgets")
        cfg_b = MetaConfig(**{**asdict(mc), "word_loss": name == "rmlnmt"})

        def checkpoint(epoch, m, name=name):
            save_model(m, out / f"{name}.epoch{epoch}.npz", run.extra())

        model, _ = meta_train(model, tasks, cfg_b, log_path=logs / f"meta-{name}.jsonl", on_epoch=checkpoint)
        save_model(model, out / f"{name}.npz", run.extra())
    return _files(out) + _files(logs)


def _source_model_path(run: Run, source: str) -> Path:
    if source in ("mix", "vanilla", "general"):
        return run.path("models", "pretrained", f"{source}.npz")
    return run.path("models", "meta", f"{source}.npz")


def _ft_strategies(run: Run, baseline: str) -> list[str]:
    """Fine-tuning strategies a baseline needs; robustness always wants FT-specific."""
    strategies = {run.cfg.meta.ft_strategy}
    if baseline in run.cfg.eval.robustness:
        strategies.add("FT-specific")
    return sorted(strategies)


def _ft_baselines(cfg: ExperimentConfig) -> list[str]:
    return [b for b in cfg.baselines if b in FT_SOURCE]


def stage_finetune(run: Run) -> list[Path]:
    cfg = run.cfg
    split = run.split()
    out = _fresh_dir(run.path("models", "ft"))
    support = {d: run.pairs(split.support[d], d) for d in cfg.domains.seen + cfg.domains.unseen}
    counts = {}
    for b in _ft_baselines(cfg):
        model = load_model(_source_model_path(run, FT_SOURCE[b]))
        for strategy in _ft_strategies(run, b):
            mc = MetaConfig(**{**asdict(run.meta_config()), "ft_strategy": strategy})
            models, n = finetune(model, support, mc, cfg.domains.seen, cfg.domains.unseen)
            for target, m in models.items():
                save_model(m, out / b / f"{target}.npz", run.extra())
            counts[f"{b}/{strategy}"] = n
    (out / "summary.json").write_text(json.dumps({"config_hash": run.hash, "pairs": counts}, indent=1,
                                                 sort_keys=True) + "\n")
    return _files(out)


# decoding with a content-addressed hypothesis cache

def beam_config(cfg: ExperimentConfig) -> BeamConfig:
    e = cfg.eval
    return BeamConfig(e.beam_size, e.max_length, e.length_penalty, e.max_length_offset)


def translate_cached(run: Run, model_path: Path, sources: list[str]) -> list[str]:
    """Beam-decode ``sources``; results are cached by model, beam settings and input."""
    bc = beam_config(run.cfg)
    key = sha256_file(model_path) + json.dumps(asdict(bc), sort_keys=True)
    key = hashlib.sha256(key.encode()).hexdigest()[:16]
    name = hashlib.sha256("\n".join(sources).encode()).hexdigest()[:16]
    cache = run.path("hyps", key, f"{name}.txt")
    if cache.exists():
        return cache.read_text(encoding="utf-8").split("\n")[:-1]
    v = run.vocab_cache
    hyps = [v.decode(h.ids) for h in beam_decode_batch(load_model(model_path), [v.encode(s) for s in sources], bc)]
    cache.parent.mkdir(parents=True, exist_ok=True)
    cache.write_text("".join(h + "\n" for h in hyps), encoding="utf-8")
    return hyps


def test_set(run: Run, domain: str) -> tuple[list[str], list[str]]:
    pairs = run.split().test[domain]
    return [s for s, _ in pairs], [t for _, t in pairs]


def score_domain(run: Run, model_path: Path, domain: str) -> dict:
    src, refs = test_set(run, domain)
    hyps = translate_cached(run, model_path, src)
    return {"bleu": fmt(bleu(hyps, refs)), "chrf": fmt(chrf(hyps, refs)), "n_sentences": len(refs)}


def evaluation_rows(run: Run) -> list[dict]:
    cfg = run.cfg
    domains = cfg.domains.seen + cfg.domains.unseen
    rows = []
    for b in cfg.baselines:
        if b in WOFT_SOURCE:
            path = _source_model_path(run, WOFT_SOURCE[b])
            for d in domains:
                rows.append({"baseline": b, "setting": "w/o FT", "domain": d, **score_domain(run, path, d)})
        if b in FT_SOURCE:
            strategy = cfg.meta.ft_strategy
            for d in domains:
                target = d if strategy == "FT-specific" else strategy
                path = run.path("models", "ft", b, f"{target}.npz")
                rows.append({"baseline": b, "setting": strategy, "domain": d, **score_domain(run, path, d)})
    return rows


def _write_jsonl(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")


def stage_evaluate(run: Run) -> list[Path]:
    rows = evaluation_rows(run)
    jsonl = run.path("reports", "eval.jsonl")
    _write_jsonl(jsonl, [{"config_hash": run.hash, **r} for r in rows])
    txt = run.path("reports", "eval.txt")
    lines = [f"config {run.hash}", f"{'baseline':<22}{'setting':<13}{'domain':<12}{'bleu':>8}{'chrf':>8}{'n':>6}"]
    for r in rows:
        lines.append(f"{r['baseline']:<22}{r['setting']:<13}{r['domain']:<12}{r['bleu']:>8.2f}{r['chrf']:>8.2f}"
                     f"{r['n_sentences']:>6d}")
    txt.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [jsonl, txt]


def robustness_for(run: Run, baseline: str) -> RobustnessMatrix:
    domains = run.cfg.domains.seen + run.cfg.domains.unseen
    models = {d: run.path("models", "ft", baseline, f"{d}.npz") for d in domains}
    tests = {d: test_set(run, d) for d in domains}
    return robustness_matrix(models, tests, _source_model_path(run, "vanilla"),
                             lambda path, src: translate_cached(run, path, list(src)), domains)


def stage_robustness(run: Run) -> list[Path]:
    records = []
    text = [f"config {run.hash}"]
    for b in run.cfg.eval.robustness:
        rm = robustness_for(run, b)
        records.append({"config_hash": run.hash, "baseline": b, "domains": rm.domains,
                        "cells": [[fmt(x) for x in row] for row in rm.cells],
                        "reference": [fmt(x) for x in rm.baseline], "avg_diff": fmt(rm.avg_diff)})
        text.append("")
        text.append(f"{b}: BLEU of the model fine-tuned on the row domain, per test domain")
        text.append(f"{'':<12}" + "".join(f"{d:>10}" for d in rm.domains))
        for d, row in zip(rm.domains, rm.cells):
            text.append(f"{d:<12}" + "".join(f"{x:>10.2f}" for x in row))
        text.append(f"{'vanilla':<12}" + "".join(f"{x:>10.2f}" for x in rm.baseline))
        text.append(f"avg_diff {rm.avg_diff:+.4f}")
    jsonl = run.path("reports", "robustness.jsonl")
    _write_jsonl(jsonl, records)
    txt = run.path("reports", "robustness.txt")
    txt.write_text("\n".join(text) + "\n", encoding="utf-8")
    return [jsonl, txt]


def _read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def stage_report(run: Run) -> list[Path]:
    cfg = run.cfg
    rows = _read_jsonl(run.path("reports", "eval.jsonl"))
    robust = _read_jsonl(run.path("reports", "robustness.jsonl"))
    hashes = {r["config_hash"] for r in rows + robust}
    for stage in STAGES[:-1]:
        stamp = run.read_stamp(stage)
        if stamp:
            hashes.add(stamp["config_hash"])
    if hashes != {run.hash}:
        raise StageError(f"refusing to mix artifacts from config hashes {sorted(hashes)}")
    unseen, seen = cfg.domains.unseen, cfg.domains.seen
    cols = unseen + seen
    table: dict[tuple[str, str], dict[str, dict]] = {}
    for r in rows:
        table.setdefault((r["baseline"], r["setting"]), {})[r["domain"]] = r
    records = [{"kind": "header", "config_hash": run.hash, "name": cfg.name, "seed": cfg.seed,
                "unseen": unseen, "seen": seen}]
    lines = [f"experiment {cfg.name}  seed {cfg.seed}  config {run.hash}"]
    for metric in ("chrf", "bleu"):
        lines.append("")
        lines.append(f"{metric.upper()}")
        head = f"{'model':<22}{'setting':<13}|" + "".join(f"{d:>9}" for d in unseen) + "  |" + \
            "".join(f"{d:>9}" for d in seen) + "  |" + f"{'unseen':>9}{'seen':>9}"
        lines.append(f"{'':<35}|{'unseen':^{9 * len(unseen)}}  |{'seen':^{9 * len(seen)}}  |")
        lines.append(head)
        lines.append("-" * len(head))
        for (b, setting), cells in table.items():
            vals = [cells[d][metric] for d in cols]
            mu = float(np.mean([cells[d][metric] for d in unseen])) if unseen else float("nan")
            ms = float(np.mean([cells[d][metric] for d in seen]))
            lines.append(f"{b:<22}{setting:<13}|" + "".join(f"{v:>9.2f}" for v in vals[:len(unseen)]) + "  |" +
                         "".join(f"{v:>9.2f}" for v in vals[len(unseen):]) + "  |" + f"{mu:>9.2f}{ms:>9.2f}")
            if metric == "chrf":
                records.append({"kind": "row", "baseline": b, "setting": setting,
                                "chrf": {d: cells[d]["chrf"] for d in cols}, "bleu": {d: cells[d]["bleu"] for d in cols},
                                "mean_unseen_chrf": fmt(mu) if unseen else None, "mean_seen_chrf": fmt(ms)})
    if robust:
        lines.append("")
        lines.append("Robustness (mean BLEU difference against vanilla w/o FT over all cells)")
        for r in robust:
            lines.append(f"{r['baseline']:<22}{r['avg_diff']:+9.4f}")
            records.append({"kind": "robustness", "baseline": r["baseline"], "avg_diff": r["avg_diff"]})
    txt = run.path("reports", "report.txt")
    txt.write_text("\n".join(lines) + "\n", encoding="utf-8")
    jsonl = run.path("reports", "report.jsonl")
    _write_jsonl(jsonl, records)
    return [txt, jsonl]


STAGE_FUNCS: dict[str, Callable[[Run], list[Path]]] = {
    "data": stage_data,
    "train-classifier": stage_train_classifier,
    "score": stage_score,
    "split": stage_split,
    "pretrain-mix": stage_pretrain,
    "meta-train": stage_meta_train,
    "finetune": stage_finetune,
    "evaluate": stage_evaluate,
    "robustness": stage_robustness,
    "report": stage_report,
}
