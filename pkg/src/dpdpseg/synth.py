"""Synthetic benchmark corpus with exact word and phone references.

Utterances are concatenations of draws from a fixed bank of word templates.
Each template is a short sequence of "phones" (well-separated base vectors
held for a few frames); emitted frames are Gaussian-perturbed copies of the
template with noise sigma = 0.1 of the template's RMS scale. Initial and
final phones are drawn from disjoint sets so word junctions are never
silently mergeable by the unit stage.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from .corpus_io import (
    AlignmentToken,
    AlignmentTrack,
    CorpusManifest,
    FeatureSequence,
    ManifestEntry,
    write_alignments,
    write_feature_sequence,
    write_manifest,
)

NUM_PHONES = 10
FEATURE_DIM = 8
FRAME_RATE = 50.0
NOISE_REL_SIGMA = 0.1


@dataclass(frozen=True)
class WordTemplate:
    label: str
    phone_ids: List[int]  # one per frame-run
    phone_durs: List[int]  # frames per phone

    @property
    def num_frames(self) -> int:
        return sum(self.phone_durs)


def make_templates(rng: np.random.Generator) -> List[WordTemplate]:
    """Ten distinct word templates, 5..15 frames each.

    Phones 0..4 may start a word, phones 5..9 may end one; interior phones
    are unrestricted but never repeat consecutively.
    """
    templates = []
    seen = set()
    while len(templates) < 10:
        n_phones = int(rng.integers(2, 5))
        phones = [int(rng.integers(0, 5))]
        for _ in range(n_phones - 2):
            nxt = int(rng.integers(0, NUM_PHONES))
            while nxt == phones[-1]:
                nxt = int(rng.integers(0, NUM_PHONES))
            phones.append(nxt)
        last = int(rng.integers(5, NUM_PHONES))
        while last == phones[-1]:
            last = int(rng.integers(5, NUM_PHONES))
        phones.append(last)
        durs = [int(rng.integers(2, 6)) for _ in phones]
        if not 5 <= sum(durs) <= 15:
            continue
        key = tuple(phones)
        if key in seen:
            continue
        seen.add(key)
        templates.append(
            WordTemplate(label=f"w{len(templates)}", phone_ids=phones, phone_durs=durs)
        )
    return templates


def generate_corpus(out_dir, num_utterances: int = 200, seed: int = 0) -> CorpusManifest:
    """Emit FTRS features, a manifest, and word/phone reference alignments."""
    out_dir = Path(out_dir)
    feat_dir = out_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    phone_vectors = rng.normal(0.0, 1.0, size=(NUM_PHONES, FEATURE_DIM))
    templates = make_templates(rng)
    template_frames = []
    for tpl in templates:
        rows = [phone_vectors[p] for p, d in zip(tpl.phone_ids, tpl.phone_durs) for _ in range(d)]
        template_frames.append(np.stack(rows))

    entries = []
    word_tracks = {}
    phone_tracks = {}
    for u in range(num_utterances):
        utt_id = f"synth{u:04d}"
        n_words = int(rng.integers(2, 7))
        word_ids = rng.integers(0, len(templates), size=n_words)
        frames = []
        word_tokens = []
        phone_tokens = []
        frame = 0
        for w in word_ids:
            tpl = templates[w]
            base = template_frames[w]
            scale = float(np.sqrt(np.mean(base**2)))
            noisy = base + rng.normal(0.0, NOISE_REL_SIGMA * scale, size=base.shape)
            frames.append(noisy)
            word_tokens.append(
                AlignmentToken(frame / FRAME_RATE, (frame + tpl.num_frames) / FRAME_RATE, tpl.label)
            )
            pf = frame
            for p, d in zip(tpl.phone_ids, tpl.phone_durs):
                phone_tokens.append(
                    AlignmentToken(pf / FRAME_RATE, (pf + d) / FRAME_RATE, f"p{p}")
                )
                pf += d
            frame += tpl.num_frames
        seq = FeatureSequence(
            utt_id=utt_id,
            frames=np.concatenate(frames).astype(np.float32),
            frame_rate=FRAME_RATE,
        )
        path = feat_dir / f"{utt_id}.ftrs"
        write_feature_sequence(seq, path)
        entries.append(ManifestEntry(utt_id=utt_id, features_a=str(path), features_b=str(path)))
        word_tracks[utt_id] = AlignmentTrack(utt_id=utt_id, tokens=word_tokens)
        phone_tracks[utt_id] = AlignmentTrack(utt_id=utt_id, tokens=phone_tokens)

    manifest = CorpusManifest(entries=entries)
    write_manifest(manifest, out_dir / "manifest.jsonl")
    write_alignments(word_tracks, out_dir / "words.tsv")
    write_alignments(phone_tracks, out_dir / "phones.tsv")
    return manifest
