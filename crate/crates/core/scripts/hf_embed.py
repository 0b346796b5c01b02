#!/usr/bin/env python3
"""Embedding backend for `ironia` encoders backed by Hugging Face checkpoints.

Reads one JSON request on stdin:
    {"checkpoint": str, "pooling": "first_token"|"mean", "max_length": int, "texts": [str]}
and writes {"vectors": [[float, ...], ...]} on stdout.

Use with: IRONIA_EMBED_COMMAND="python3 crates/core/scripts/hf_embed.py"
"""
import json
import sys

import torch
from transformers import AutoModel, AutoTokenizer


def main():
    req = json.load(sys.stdin)
    tok = AutoTokenizer.from_pretrained(req["checkpoint"])
    tok.truncation_side = "right"
    model = AutoModel.from_pretrained(req["checkpoint"])
    model.eval()
    vectors = []
    with torch.no_grad():
        for start in range(0, len(req["texts"]), 16):
            batch = req["texts"][start:start + 16]
            enc = tok(batch, padding=True, truncation=True, max_length=req["max_length"], return_tensors="pt")
            hidden = model(**enc).last_hidden_state
            if req["pooling"] == "mean":
                mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                pooled = (hidden * mask).sum(1) / mask.sum(1).clamp(min=1.0)
            else:
                pooled = hidden[:, 0, :]
            vectors.extend(pooled.double().tolist())
    json.dump({"vectors": vectors}, sys.stdout)


if __name__ == "__main__":
    main()
