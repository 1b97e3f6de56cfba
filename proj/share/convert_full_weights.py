#!/usr/bin/env python3
# Copyright 2026 The promptseg Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Converts a published full-size segment-anything state dict into a promptseg checkpoint.

Every target tensor is listed in full_weight_map.tsv together with its source key
and the layout transform; adapters have no source and start at zero, so the
imported model reproduces the unadapted backbone until finetuned.

    python3 convert_full_weights.py sam_vit_h.pth full.ckpt
"""

import argparse
import json
import os
import struct
import sys
import tempfile
import zlib

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
MAGIC = b"PSEGCKPT"
FORMAT_VERSION = 1
BUFFERS = {"prompt_encoder.pe_layer.positional_encoding_gaussian_matrix"}


def read_map(path):
    rows = []
    with open(path) as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            name, group, r, c, source, transform = line.rstrip("\n").split("\t")
            rows.append((name, group, int(r), int(c), source, transform))
    return rows


def convert(src, transform, rows, cols, multimask):
    if transform == "zeros":
        return np.zeros((rows, cols), np.float32)
    if transform == "identity":
        out = src.reshape(rows, cols)
    elif transform == "transpose":
        out = src.T
    elif transform == "conv_to_linear":  # (out, in, kh, kw) -> (in*kh*kw, out)
        out = src.reshape(src.shape[0], -1).T
    elif transform == "deconv_to_linear":  # (in, out, kh, kw) -> (in, out*kh*kw)
        out = src.reshape(src.shape[0], -1)
    elif transform == "flatten_grid":  # (1, H, W, C) -> (H*W, C)
        out = src.reshape(-1, src.shape[-1])
    elif transform == "multimask_rows":  # token 0 is the single-mask output
        out = src[1 : 1 + multimask]
    elif transform == "transpose_multimask_cols":
        out = src[1 : 1 + multimask].T
    elif transform == "multimask_cols":
        out = src[1 : 1 + multimask].reshape(1, -1)
    else:
        raise ValueError(f"unknown transform {transform!r}")
    return np.ascontiguousarray(out.reshape(rows, cols), dtype=np.float32)


def load_state_dict(path):
    if path.endswith(".npz"):
        return dict(np.load(path))
    import torch

    state = torch.load(path, map_location="cpu")
    state = state.get("model", state) if isinstance(state, dict) else state
    return {k: v.detach().float().numpy() for k, v in state.items()}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", help="state dict (.pth via torch, or .npz)")
    ap.add_argument("output", help="promptseg checkpoint to write")
    ap.add_argument("--map", default=os.path.join(HERE, "full_weight_map.tsv"))
    ap.add_argument("--config", default=os.path.join(HERE, "full_config.json"))
    args = ap.parse_args(argv)

    with open(args.config) as f:
        config = json.load(f)
    state = load_state_dict(args.source)
    entries = read_map(args.map)
    used = set()
    tensors = []
    total_crc = 0
    offset = 0
    out_dir = os.path.dirname(os.path.abspath(args.output))
    with tempfile.TemporaryFile(dir=out_dir) as payload:
        for name, group, rows, cols, source, transform in entries:
            if source == "-":
                src = None
            elif source not in state:
                sys.exit(f"error: source tensor '{source}' for '{name}' not found")
            else:
                src = np.asarray(state[source])
                used.add(source)
            data = convert(src, transform, rows, cols, config["multimask_count"]).tobytes()
            payload.write(data)
            total_crc = zlib.crc32(data, total_crc)
            tensors.append({"name": name, "group": group, "buffer": name in BUFFERS, "rows": rows,
                            "cols": cols, "offset": offset, "crc32": zlib.crc32(data)})
            offset += len(data)
        manifest = json.dumps({"format_version": FORMAT_VERSION, "dtype": "float32", "config": config,
                               "checkpoint_id": "ckpt-%08x" % total_crc, "tensors": tensors},
                              separators=(",", ":")).encode()
        payload.seek(0)
        with open(args.output, "wb") as out:
            out.write(MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(manifest)) + manifest)
            while chunk := payload.read(1 << 24):
                out.write(chunk)
    skipped = sorted(set(state) - used)
    print(json.dumps({"output": args.output, "tensors": len(tensors), "bytes": offset,
                      "unmapped_source_tensors": len(skipped), "examples": skipped[:4]}))


if __name__ == "__main__":
    main()
