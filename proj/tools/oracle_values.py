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
"""Independent reference values for the unit tests.

Re-implements the randomized and keyed parts of adaptation with hashlib and
numpy and prints the numbers the C++ tests freeze. Run from the repository
root: python3 tools/oracle_values.py
"""

import hashlib
import json
import struct

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
SPECIAL = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next_u64(self):
        self.state = (self.state + GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def unit_open(self):
        while True:
            u = ((self.next_u64() >> 11) + 1) / 9007199254740992.0
            if u < 1.0:
                return u

    def uniform_below(self, n):
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n


def keyed(msg, key, n):
    return hashlib.blake2b(msg, digest_size=n, key=key).digest()


def seed_of(passkey):
    return struct.unpack("<Q", keyed(b"seed", passkey.encode(), 8))[0]


def glides(prng, dim, nglide):
    out = []
    for _ in range(nglide):
        line = np.array([prng.unit_open() for _ in range(dim)])
        trans = np.array([prng.unit_open() for _ in range(dim)])
        out.append((line, trans))
    return out


def permutation(m, fixed, prng):
    fixed = set(fixed)
    movable = [i for i in range(m) if i not in fixed]
    shuffled = list(movable)
    for k in range(len(shuffled), 1, -1):
        j = prng.uniform_below(k)
        shuffled[k - 1], shuffled[j] = shuffled[j], shuffled[k - 1]
    perm = list(range(m))
    for a, b in zip(movable, shuffled):
        perm[a] = b
    return perm


def cipher_vocab(tokens, passkey, digest):
    key = passkey.encode()
    taken = {t for t in tokens if t in SPECIAL}
    out = []
    for t in tokens:
        if t in SPECIAL:
            out.append(t)
            continue
        c = keyed(t.encode(), key, digest).hex()
        if c in taken:
            for counter in range(1, 256):
                c = keyed(t.encode() + b"\x00" + bytes([counter]), key, digest).hex()
                if c not in taken:
                    break
            else:
                raise RuntimeError("unresolvable")
        taken.add(c)
        out.append(c)
    return out


def load_clm1(path):
    raw = open(path, "rb").read()
    assert raw[:4] == b"CLM1"
    rows, cols = struct.unpack("<II", raw[4:12])
    return np.frombuffer(raw[12:], dtype="<f4").reshape(rows, cols).astype(np.float64)


def transform(emb, seq):
    out = emb.copy()
    for line, trans in seq:
        out = out - 2.0 * np.outer(out @ line / (line @ line), line) + trans
    return out


def main():
    res = {}
    p = SplitMix64(0)
    res["splitmix_seed0"] = [hex(p.next_u64()) for _ in range(3)]
    p = SplitMix64(42)
    res["unit_open_seed42"] = [repr(p.unit_open()) for _ in range(3)]
    p = SplitMix64(7)
    res["uniform_below10_seed7"] = [p.uniform_below(10) for _ in range(10)]

    seq = glides(SplitMix64(1234), 4, 2)
    res["glides_seed1234_dim4_n2"] = [[[repr(float(v)) for v in line], [repr(float(v)) for v in t]]
                                      for line, t in seq]
    res["perm_m10_fixed03_seed99"] = permutation(10, [0, 3], SplitMix64(99))

    tokens = open("data/toy_vocab.txt", encoding="utf-8").read().split("\n")[:-1]
    emb = load_clm1("data/toy_emb.clm1")
    seed = seed_of("llm123")
    prng = SplitMix64(seed)
    seq = glides(prng, emb.shape[1], 3)
    perm = permutation(len(tokens), range(5), prng)
    res["toy_perm_llm123_first12"] = perm[:12]
    ciphers = cipher_vocab(tokens, "llm123", 4)
    adapted_vocab = [ciphers[perm[i]] for i in range(len(tokens))]
    vocab_bytes = ("\n".join(adapted_vocab) + "\n").encode()
    res["toy_bundle_vocab_sha256"] = hashlib.sha256(vocab_bytes).hexdigest()
    manifest = {
        "format_version": 1,
        "vocab_size": len(tokens),
        "embed_dim": emb.shape[1],
        "nglide": 3,
        "digest_bytes": 4,
        "special_tokens": [{"token": t, "index": i} for i, t in enumerate(SPECIAL)],
        "key_fingerprint": keyed(b"fingerprint", b"llm123", 8).hex(),
    }
    res["toy_bundle_manifest_sha256"] = hashlib.sha256(
        (json.dumps(manifest, indent=2) + "\n").encode()).hexdigest()
    transformed = transform(emb, seq)
    adapted = transformed[perm]
    res["toy_adapted_row7_first4"] = [repr(float(v)) for v in adapted[7, :4]]
    clm1 = (b"CLM1" + struct.pack("<II", *adapted.shape) +
            adapted.astype("<f4").tobytes())
    res["toy_bundle_embeddings_sha256"] = hashlib.sha256(clm1).hexdigest()
    res["toy_bundle_blake2b256"] = {
        "vocab.txt": hashlib.blake2b(vocab_bytes, digest_size=32).hexdigest(),
        "manifest.json": hashlib.blake2b(
            (json.dumps(manifest, indent=2) + "\n").encode(), digest_size=32).hexdigest(),
        "embeddings.clm1": hashlib.blake2b(clm1, digest_size=32).hexdigest(),
    }
    res["toy_adapted_row_sums_5_10_83"] = [repr(float(adapted[i].sum())) for i in (5, 10, 83)]

    small = ["[PAD]", "[UNK]"] + ["tok%d" % i for i in range(40)]
    res["digest1_llm123_tok_ciphers"] = cipher_vocab(small, "llm123", 1)
    naive = [keyed(t.encode(), b"llm123", 1).hex() for t in small[2:]]
    res["digest1_llm123_naive_duplicates"] = len(naive) - len(set(naive))

    print(json.dumps(res, indent=1))


if __name__ == "__main__":
    main()
