#!/usr/bin/env python3
"""Write a tiny random GPT-2 checkpoint plus reference outputs from HF transformers.

Produces (under crates/core/tests/fixtures/):
  tiny_gpt2.safetensors  -- published GPT-2 tensor naming, random weights
  tiny_gpt2_expected.json -- final-position logits, attention patterns, and
                             logits under per-head z patches, all computed by
                             the transformers GPT2Model reference forward pass.

Patches are applied with a forward pre-hook on `attn.c_proj`, i.e. on the
merged per-head attention result before the output projection.
"""
import json
from pathlib import Path

import torch
from safetensors.torch import save_file
from transformers import GPT2Config, GPT2LMHeadModel

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures"

CFG = dict(
    vocab_size=1000,
    n_positions=64,
    n_embd=32,
    n_layer=2,
    n_head=4,
    layer_norm_epsilon=1e-5,
    activation_function="gelu_new",
    resid_pdrop=0.0,
    embd_pdrop=0.0,
    attn_pdrop=0.0,
)

SEQUENCES = [
    [17],
    [464, 3, 999, 0, 250],
    [5, 6, 7, 8, 9, 10, 11],
    [901, 902, 903, 904, 905],
]


def main():
    torch.manual_seed(20240501)
    config = GPT2Config(**CFG)
    config._attn_implementation = "eager"
    model = GPT2LMHeadModel(config).eval()
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith(".bias") or "ln_" in name:
                p.copy_(torch.randn_like(p) * 0.1 + (1.0 if name.endswith("weight") else 0.0))
            else:
                p.copy_(torch.randn_like(p) * 0.08)

    tensors = {}
    for name, p in model.transformer.state_dict().items():
        tensors[name] = p.detach().clone().contiguous()
    n = CFG["n_positions"]
    mask = torch.tril(torch.ones(n, n)).view(1, 1, n, n)
    for i in range(CFG["n_layer"]):
        tensors[f"h.{i}.attn.bias"] = mask.clone()
    OUT.mkdir(parents=True, exist_ok=True)
    save_file(tensors, str(OUT / "tiny_gpt2.safetensors"))

    d_head = CFG["n_embd"] // CFG["n_head"]

    def run(ids, patches=None, capture=None):
        """patches: {(layer, head): tensor (seq, d_head)}; capture: dict to fill with z."""
        handles = []
        for layer in range(CFG["n_layer"]):
            def hook(module, args, layer=layer):
                (z,) = args
                if capture is not None:
                    for h in range(CFG["n_head"]):
                        capture[(layer, h)] = z[0, :, h * d_head:(h + 1) * d_head].clone()
                if patches:
                    z = z.clone()
                    for (l, h), rep in patches.items():
                        if l == layer:
                            z[0, :, h * d_head:(h + 1) * d_head] = rep
                    return (z,)
                return None

            handles.append(model.transformer.h[layer].attn.c_proj.register_forward_pre_hook(hook))
        try:
            with torch.no_grad():
                out = model(torch.tensor([ids]), output_attentions=True)
        finally:
            for hd in handles:
                hd.remove()
        return out

    cases = []
    for ids in SEQUENCES:
        z = {}
        out = run(ids, capture=z)
        logits = out.logits[0, -1].tolist()
        attn = [[out.attentions[l][0, h].tolist() for h in range(CFG["n_head"])] for l in range(CFG["n_layer"])]
        top5 = torch.topk(out.logits[0, -1], 5).indices.tolist()
        cases.append({
            "ids": ids,
            "final_logits": logits,
            "top5": top5,
            "attention": attn,
            "z_layer1_head2": z[(1, 2)].tolist(),
        })

    # Patched runs: zero z at (1, 3) on seq 1; donor z from seq 3 (same length) at (0, 1) on seq 1.
    donor = {}
    run(SEQUENCES[3], capture=donor)
    zero_patch = {(1, 3): torch.zeros(len(SEQUENCES[1]), d_head)}
    donor_patch = {(0, 1): donor[(0, 1)]}
    patched = [
        {"sequence": 1, "head": [1, 3], "kind": "zero",
         "final_logits": run(SEQUENCES[1], patches=zero_patch).logits[0, -1].tolist()},
        {"sequence": 1, "head": [0, 1], "kind": "donor", "donor_sequence": 3,
         "final_logits": run(SEQUENCES[1], patches=donor_patch).logits[0, -1].tolist()},
    ]

    (OUT / "tiny_gpt2_expected.json").write_text(json.dumps({
        "config": CFG,
        "cases": cases,
        "patched": patched,
    }))
    print("wrote", OUT)


if __name__ == "__main__":
    main()
