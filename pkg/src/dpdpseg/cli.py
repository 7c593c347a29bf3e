"""Pipeline orchestration: units -> words -> lexicon -> eval, with resumable stages."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import corpus_io, evaluator, lexicon_builder, synth, unit_segmenter, word_segmenter
from .codebook import Codebook, KMeansConfig, fit_kmeans
from .seq_autoencoder import AeRnnConfig, CodeSequence, init_model, load_model, save_model, train

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    manifest: str
    workdir: str
    num_units: int = 100
    lambda_units: float = 2.0
    lambda_words: float = 5.0
    max_unit_len: int = 25
    max_word_len: int = 50
    lexicon_size: Optional[int] = None
    seed: int = 0
    kmeans_iters: int = 100
    kmeans_restarts: int = 5
    emb_dim: int = 64
    hidden_dim: int = 128
    epochs: int = 15
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_seq_len: int = 256
    standardize: bool = False
    normalize_awes: bool = False
    jobs: int = 1
    force: bool = False
    dump_awes: bool = False


def _workdir(cfg: PipelineConfig) -> Path:
    wd = Path(cfg.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _echo_config(cfg: PipelineConfig, wd: Path) -> None:
    with open(wd / "config.json", "w", encoding="utf-8") as f:
        json.dump(dataclasses.asdict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def _codes_path(wd: Path, utt_id: str) -> Path:
    return wd / "codes" / f"{utt_id}.json"


def _read_features(entry: corpus_io.ManifestEntry, which: str) -> corpus_io.FeatureSequence:
    path = entry.features_a if which == "a" else entry.features_b
    try:
        return corpus_io.read_feature_sequence(path, utt_id=entry.utt_id)
    except (corpus_io.FormatError, corpus_io.DataError, OSError) as e:
        raise RuntimeError(f"utterance {entry.utt_id!r}: {e}") from e


def _map_jobs(fn, items, jobs: int):
    """Order-preserving map, optionally across a thread pool."""
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_units(cfg: PipelineConfig) -> None:
    """Fit the unit codebook and segment every utterance into coded units."""
    wd = _workdir(cfg)
    manifest = corpus_io.load_manifest(cfg.manifest)
    cb_path = wd / "codebook.ftrs"
    done = cb_path.exists() and all(_codes_path(wd, e.utt_id).exists() for e in manifest)
    if done and not cfg.force:
        logger.info("units: outputs exist, skipping (use --force to recompute)")
        return

    features = [_read_features(e, "a") for e in manifest]
    all_frames = np.concatenate([f.frames for f in features]).astype(np.float64)
    mean = np.zeros(all_frames.shape[1])
    std = np.ones(all_frames.shape[1])
    if cfg.standardize:
        mean = all_frames.mean(axis=0)
        std = all_frames.std(axis=0)
        std[std == 0] = 1.0
        all_frames = (all_frames - mean) / std

    logger.info("units: fitting K-means (K=%d) on %d frames", cfg.num_units, len(all_frames))
    cb = fit_kmeans(
        all_frames,
        KMeansConfig(
            K=cfg.num_units, max_iters=cfg.kmeans_iters, seed=cfg.seed,
            restarts=cfg.kmeans_restarts,
        ),
    )
    corpus_io.write_matrix(cb.centroids, cb_path)
    np.save(wd / "standardize.npy", np.stack([mean, std]))

    unit_cfg = unit_segmenter.DpdpUnitConfig(lam=cfg.lambda_units, max_len=cfg.max_unit_len)

    def segment_one(feat: corpus_io.FeatureSequence):
        frames = (feat.frames - mean) / std if cfg.standardize else feat.frames
        seq = corpus_io.FeatureSequence(feat.utt_id, frames.astype(np.float32), feat.frame_rate)
        return unit_segmenter.dpdp_units(seq, cb, unit_cfg)

    segmentations = _map_jobs(segment_one, features, cfg.jobs)
    (wd / "codes").mkdir(exist_ok=True)
    for feat, seg in zip(features, segmentations):
        rec = {
            "utt_id": feat.utt_id,
            "frame_rate": feat.frame_rate,
            "codes": [s.z for s in seg.segments],
            "frame_spans": [[s.a, s.b] for s in seg.segments],
            "objective": seg.objective,
        }
        with open(_codes_path(wd, feat.utt_id), "w", encoding="utf-8") as f:
            json.dump(rec, f)
            f.write("\n")
    logger.info("units: wrote codebook and %d code sequences", len(features))


def _load_code_sequences(cfg: PipelineConfig) -> List[dict]:
    wd = Path(cfg.workdir)
    manifest = corpus_io.load_manifest(cfg.manifest)
    records = []
    for e in manifest:
        path = _codes_path(wd, e.utt_id)
        if not path.exists():
            raise RuntimeError(
                f"missing unit output for {e.utt_id!r}: run the 'units' stage first"
            )
        with open(path, encoding="utf-8") as f:
            records.append(json.load(f))
    return records


def run_words(cfg: PipelineConfig) -> None:
    """Train the AE-RNN on the code sequences, then segment words per utterance."""
    wd = _workdir(cfg)
    model_path = wd / "aernn.bin"
    bounds_path = wd / "boundaries.jsonl"
    if model_path.exists() and bounds_path.exists() and not cfg.force:
        logger.info("words: outputs exist, skipping (use --force to recompute)")
        return

    records = _load_code_sequences(cfg)
    corpus = [
        CodeSequence(
            utt_id=r["utt_id"],
            codes=r["codes"],
            frame_spans=[tuple(s) for s in r["frame_spans"]],
        )
        for r in records
    ]
    ae_cfg = AeRnnConfig(
        vocab=cfg.num_units, emb_dim=cfg.emb_dim, hidden_dim=cfg.hidden_dim,
        epochs=cfg.epochs, learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size, seed=cfg.seed, max_seq_len=cfg.max_seq_len,
    )
    logger.info("words: training AE-RNN for %d epochs on %d sequences", cfg.epochs, len(corpus))
    model, trace = train(init_model(ae_cfg), corpus, ae_cfg)
    logger.info("words: per-symbol NLL %.4f -> %.4f", trace[0], trace[-1])
    save_model(model, model_path)

    word_cfg = word_segmenter.DpdpWordConfig(lam=cfg.lambda_words, max_len=cfg.max_word_len)

    def segment_one(args):
        rec, cs = args
        spans = word_segmenter.dpdp_words(cs, model, word_cfg)
        return word_segmenter.to_output(cs.utt_id, spans, rec["frame_rate"])

    outputs = _map_jobs(segment_one, list(zip(records, corpus)), cfg.jobs)
    corpus_io.write_segmentation(outputs, bounds_path)
    logger.info("words: wrote %d boundary records", len(outputs))


def run_lexicon(cfg: PipelineConfig) -> None:
    """Embed word spans from stream-b features, cluster, attach lexicon ids."""
    wd = _workdir(cfg)
    if cfg.lexicon_size is None:
        raise RuntimeError("--lexicon-size is required for the lexicon stage")
    final_path = wd / "segments.jsonl"
    if final_path.exists() and not cfg.force:
        logger.info("lexicon: outputs exist, skipping (use --force to recompute)")
        return
    bounds_path = wd / "boundaries.jsonl"
    if not bounds_path.exists():
        raise RuntimeError("missing word boundaries: run the 'words' stage first")

    manifest = corpus_io.load_manifest(cfg.manifest)
    boundaries = corpus_io.load_segmentation(bounds_path)
    awes = []
    for e in manifest:
        feat_b = _read_features(e, "b")
        seg = boundaries[e.utt_id]
        for idx, s in enumerate(seg.segments):
            frame_a = int(round(s.start * feat_b.frame_rate))
            frame_b = int(round(s.end * feat_b.frame_rate)) - 1
            vec = lexicon_builder.embed_span(feat_b, frame_a, frame_b, cfg.normalize_awes)
            awes.append(lexicon_builder.AcousticWordEmbedding(e.utt_id, idx, vec))

    lex = lexicon_builder.build_lexicon(
        awes, cfg.lexicon_size,
        KMeansConfig(
            K=cfg.lexicon_size, max_iters=cfg.kmeans_iters, seed=cfg.seed,
            restarts=cfg.kmeans_restarts,
        ),
    )
    corpus_io.write_matrix(lex.codebook.centroids, wd / "lexicon.ftrs")
    if cfg.dump_awes:
        corpus_io.write_matrix(np.stack([a.vector for a in awes]), wd / "awes.ftrs")
        with open(wd / "awes.ids", "w", encoding="utf-8") as f:
            for a in awes:
                f.write(f"{a.utt_id}\t{a.span_index}\n")

    outputs = []
    for e in manifest:
        seg = boundaries[e.utt_id]
        outputs.append(
            corpus_io.SegmentationOutput(
                utt_id=e.utt_id,
                segments=[
                    corpus_io.OutputSegment(
                        start=s.start, end=s.end,
                        cluster_id=lex.assignments[(e.utt_id, idx)],
                    )
                    for idx, s in enumerate(seg.segments)
                ],
            )
        )
    corpus_io.write_segmentation(outputs, final_path)
    logger.info("lexicon: wrote %d clustered records", len(outputs))


def run_eval(
    segments_path,
    words_path,
    phones_path=None,
    eval_cfg: Optional[evaluator.EvalConfig] = None,
    report_path=None,
) -> dict:
    """Score a segmentation against reference alignments; returns the metrics."""
    cfg = eval_cfg or evaluator.EvalConfig()
    hyp = corpus_io.load_segmentation(segments_path)
    ref_words = corpus_io.load_alignments(words_path)
    bp, br, bf = evaluator.boundary_f1(ref_words, hyp, cfg)
    tp, tr, tf = evaluator.token_f1(ref_words, hyp, cfg)
    metrics = {
        "boundary_precision": bp, "boundary_recall": br, "boundary_f1": bf,
        "token_precision": tp, "token_recall": tr, "token_f1": tf,
        "num_hyp_tokens": sum(len(s.segments) for s in hyp.values()),
        "num_ref_tokens": sum(len(t.tokens) for t in ref_words.values()),
    }
    has_clusters = any(
        seg.cluster_id is not None for s in hyp.values() for seg in s.segments
    )
    if has_clusters:
        if phones_path is None:
            raise RuntimeError("phone alignments are required to compute NED")
        phones = corpus_io.load_alignments(phones_path)
        clusters = evaluator.cluster_phonemes(hyp, phones, cfg)
        metrics["ned"] = evaluator.ned(clusters)

    lines = [
        f"# tolerance={cfg.tolerance} exclude_edges={cfg.exclude_edges} "
        f"overlap_frac={cfg.overlap_frac} overlap_abs={cfg.overlap_abs} (assumed conventions)",
    ]
    for k, v in metrics.items():
        lines.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
    report = "\n".join(lines) + "\n"
    if report_path is not None:
        Path(report_path).write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    return metrics


def _add_pipeline_args(p: argparse.ArgumentParser, need_manifest: bool = True):
    p.add_argument("--manifest", required=need_manifest)
    p.add_argument("--workdir", required=True)
    p.add_argument("--num-units", type=int, default=100)
    p.add_argument("--lambda-units", type=float, default=2.0)
    p.add_argument("--lambda-words", type=float, default=5.0)
    p.add_argument("--max-unit-len", type=int, default=25)
    p.add_argument("--max-word-len", type=int, default=50)
    p.add_argument("--lexicon-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kmeans-iters", type=int, default=100)
    p.add_argument("--kmeans-restarts", type=int, default=5)
    p.add_argument("--emb-dim", type=int, default=64)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-seq-len", type=int, default=256)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--normalize-awes", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.add_argument("--dump-awes", action="store_true")


def _cfg_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        manifest=args.manifest, workdir=args.workdir, num_units=args.num_units,
        lambda_units=args.lambda_units, lambda_words=args.lambda_words,
        max_unit_len=args.max_unit_len, max_word_len=args.max_word_len,
        lexicon_size=args.lexicon_size, seed=args.seed,
        kmeans_iters=args.kmeans_iters, kmeans_restarts=args.kmeans_restarts,
        emb_dim=args.emb_dim, hidden_dim=args.hidden_dim, epochs=args.epochs,
        learning_rate=args.learning_rate, batch_size=args.batch_size,
        max_seq_len=args.max_seq_len, standardize=args.standardize,
        normalize_awes=args.normalize_awes, jobs=args.jobs, force=args.force,
        dump_awes=args.dump_awes,
    )


def _add_eval_args(p: argparse.ArgumentParser):
    p.add_argument("--segments", required=True)
    p.add_argument("--words", required=True)
    p.add_argument("--phones", default=None)
    p.add_argument("--tolerance", type=float, default=0.02)
    p.add_argument("--include-edges", action="store_true")
    p.add_argument("--overlap-frac", type=float, default=0.5)
    p.add_argument("--overlap-abs", type=float, default=0.03)
    p.add_argument("--report", default=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dpdpseg",
        description="Two-stage duration-penalised DP word segmentation with lexicon learning",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("units", "words", "lexicon", "pipeline"):
        _add_pipeline_args(sub.add_parser(name))
    pipe = sub.choices["pipeline"]
    pipe.add_argument("--eval-words", default=None, help="word alignments for final eval")
    pipe.add_argument("--eval-phones", default=None, help="phone alignments for NED")

    _add_eval_args(sub.add_parser("eval"))

    synth_p = sub.add_parser("synth", help="emit the synthetic benchmark corpus")
    synth_p.add_argument("--out-dir", required=True)
    synth_p.add_argument("--num-utterances", type=int, default=200)
    synth_p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            synth.generate_corpus(args.out_dir, args.num_utterances, args.seed)
            print(f"wrote synthetic corpus to {args.out_dir}")
            return 0
        if args.command == "eval":
            run_eval(
                args.segments, args.words, args.phones,
                evaluator.EvalConfig(
                    tolerance=args.tolerance,
                    overlap_frac=args.overlap_frac,
                    overlap_abs=args.overlap_abs,
                    exclude_edges=not args.include_edges,
                ),
                args.report,
            )
            return 0

        cfg = _cfg_from_args(args)
        wd = _workdir(cfg)
        _echo_config(cfg, wd)
        if args.command in ("units", "pipeline"):
            run_units(cfg)
        if args.command in ("words", "pipeline"):
            run_words(cfg)
        if args.command in ("lexicon", "pipeline"):
            run_lexicon(cfg)
        if args.command == "pipeline" and args.eval_words:
            run_eval(
                wd / "segments.jsonl", args.eval_words, args.eval_phones,
                report_path=wd / "report.txt",
            )
        return 0
    except Exception as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
