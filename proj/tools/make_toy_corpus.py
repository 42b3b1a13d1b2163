#!/usr/bin/env python3
# Copyright 2026 The cipherlm Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Generates the bundled toy sentiment corpus.

Outputs (all byte-deterministic):
  data/toy_vocab.txt      WordPiece vocabulary, special tokens first
  data/toy_emb.clm1       len(vocab) x 32 embedding matrix, CLM1 format
  data/toy_sentiment.tsv  200 lines of "text<TAB>label" (1 = positive)

Labels come from construction: every sentence carries exactly one sentiment
adjective drawn from the positive or the negative list. Sentences avoid
punctuation and the vocabulary avoids words spelled only with the letters
a-f, so no plaintext token can occur by accident inside hex cipher text or
JSON framing.

Usage: python3 tools/make_toy_corpus.py [outdir]
"""

import os
import struct
import sys

MASK64 = (1 << 64) - 1
SEED = 20240211
DIM = 32

SPECIAL = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
SUBJECTS = ["movie", "film", "plot", "story", "acting", "music", "script",
            "ending", "cast", "show", "book", "meal", "service", "hotel",
            "room", "song", "game"]
DETERMINERS = ["the", "this", "that", "our", "my", "your"]
VERBS = ["was", "is", "felt", "seemed", "looked", "sounded"]
INTENSIFIERS = ["very", "really", "truly", "quite", "so", "rather"]
POSITIVE = ["good", "great", "wonderful", "excellent", "lovely", "brilliant",
            "amazing", "superb", "charming", "enjoyable"]
NEGATIVE = ["awful", "terrible", "boring", "horrible", "dull", "poor", "weak",
            "tedious", "dreadful", "lousy"]
FILLERS = ["honestly", "overall", "frankly", "today", "yesterday", "again"]
CONNECT = ["and", "but", "while", "yet"]
NEUTRAL = ["long", "short", "loud", "quiet", "slow", "young", "old", "new"]
PIECES = ["##s", "##ly", "##ing", "##er", "##est", "##y"]


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n):
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def pick(self, seq):
        return seq[self.below(len(seq))]

    def unit(self):
        return ((self.next_u64() >> 11) + 1) / float(1 << 53)


def vocabulary():
    words = (DETERMINERS + SUBJECTS + VERBS + INTENSIFIERS + POSITIVE +
             NEGATIVE + FILLERS + CONNECT + NEUTRAL)
    seen = set()
    out = list(SPECIAL)
    for w in words + PIECES:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def sentence(rng, label):
    adj = rng.pick(POSITIVE if label == 1 else NEGATIVE)
    subj = rng.pick(SUBJECTS)
    if rng.below(3) == 0:
        subj += "s"  # exercises "##s" continuation pieces
    words = [rng.pick(DETERMINERS), subj, rng.pick(VERBS)]
    if rng.below(2) == 0:
        words.append(rng.pick(INTENSIFIERS))
    words.append(adj)
    if rng.below(2) == 0:
        words = [rng.pick(FILLERS)] + words
    if rng.below(3) == 0:
        words += [rng.pick(CONNECT), rng.pick(DETERMINERS), rng.pick(SUBJECTS),
                  rng.pick(VERBS), rng.pick(NEUTRAL)]
    return " ".join(words)


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data")
    rng = SplitMix64(SEED)

    vocab = vocabulary()
    for w in vocab:
        if w not in SPECIAL:
            assert not set(w) <= set("abcdef"), w
    with open(os.path.join(outdir, "toy_vocab.txt"), "wb") as f:
        f.write(("\n".join(vocab) + "\n").encode("utf-8"))

    payload = bytearray(b"CLM1")
    payload += struct.pack("<II", len(vocab), DIM)
    for _ in range(len(vocab) * DIM):
        payload += struct.pack("<f", 2.0 * rng.unit() - 1.0)
    with open(os.path.join(outdir, "toy_emb.clm1"), "wb") as f:
        f.write(payload)

    lines = []
    for i in range(200):
        label = i % 2
        lines.append(f"{sentence(rng, label)}\t{label}\n")
    with open(os.path.join(outdir, "toy_sentiment.tsv"), "wb") as f:
        f.write("".join(lines).encode("utf-8"))


if __name__ == "__main__":
    main()
