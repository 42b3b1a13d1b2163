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
"""Rebuilds data/bert-base-uncased-vocab.txt.

The bert-base-uncased WordPiece vocabulary (Apache-2.0, google-research/bert)
is redistributed by the npm package `bert-tokenizer` (assets/vocab.json) in a
SentencePiece-style spelling: word-initial pieces carry a leading U+2581 and
continuation pieces carry no marker. This script maps it back:

  "▁word" -> "word", "piece" -> "##piece", "[X]" -> "[X]",
  index 1 ("▁") -> "[unused0]".

Usage: npm pack bert-tokenizer && tar xzf bert-tokenizer-*.tgz
       python3 tools/make_bert_vocab.py package/assets/vocab.json out.txt
"""

import hashlib
import json
import re
import sys

EXPECTED_SHA256 = "07eced375cec144d27c900241f3e339478dec958f92fddbc551f295c992038a3"
SPECIAL = re.compile(r"\[(PAD|UNK|CLS|SEP|MASK|unused\d+)\]")


def main() -> int:
    src, dst = sys.argv[1], sys.argv[2]
    with open(src, encoding="utf-8") as f:
        pieces = json.load(f)
    out = []
    for i, t in enumerate(pieces):
        if i == 1:
            out.append("[unused0]")
        elif SPECIAL.fullmatch(t):
            out.append(t)
        elif t.startswith("▁"):
            out.append(t[1:])
        else:
            out.append("##" + t)
    data = ("\n".join(out) + "\n").encode("utf-8")
    digest = hashlib.sha256(data).hexdigest()
    if digest != EXPECTED_SHA256:
        print(f"sha256 mismatch: {digest}", file=sys.stderr)
        return 1
    with open(dst, "wb") as f:
        f.write(data)
    return 0


if __name__ == "__main__":
    sys.exit(main())
