"""Writes a tiny randomly initialised BERT snapshot plus reference outputs.

The C++ transformer encoder is checked against these outputs. Run:
    python3 tools/make_tiny_bert_fixture.py tests/data/tiny_bert
"""

import json
import sys
from pathlib import Path

import torch
from transformers import BertConfig, BertModel, BertTokenizer

SENTENCES = [
    ["Leonard", "Parker", "received", "his", "PhD", "from", "Harvard", "University", "in", "1967", "."],
    ["Unbelievable", "results", ",", "naïve", "café", "!"],
    ["x"],
]

WORDS = [
    "leonard", "parker", "received", "his", "phd", "from", "harvard", "university", "in", "19", "##67",
    ".", ",", "!", "un", "##bel", "##ie", "##va", "##ble", "results", "na", "##ive", "cafe", "x",
]


def main(out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS
    (out / "vocab.txt").write_text("\n".join(vocab) + "\n")

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=16, num_hidden_layers=2, num_attention_heads=4,
        intermediate_size=32, max_position_embeddings=64, type_vocab_size=2, hidden_act="gelu",
    )
    model = BertModel(config, add_pooling_layer=False).eval()
    with torch.no_grad():
        for p in model.parameters():
            p.add_(0.05 * torch.randn_like(p))
    model.save_pretrained(out, safe_serialization=True)

    tok = BertTokenizer(str(out / "vocab.txt"), do_lower_case=True)
    cases = []
    for words in SENTENCES:
        ids = [tok.cls_token_id]
        alignment = []
        for w in words:
            pieces = tok.convert_tokens_to_ids(tok.tokenize(w)) or [tok.unk_token_id]
            alignment.append(list(range(len(ids), len(ids) + len(pieces))))
            ids.extend(pieces)
        ids.append(tok.sep_token_id)
        with torch.no_grad():
            hidden = model(torch.tensor([ids])).last_hidden_state[0]
        mean = torch.stack([hidden[a].mean(0) for a in alignment])
        first = torch.stack([hidden[a[0]] for a in alignment])
        cases.append({
            "words": words, "ids": ids, "alignment": alignment,
            "subword_states": hidden.tolist(), "mean_pooled": mean.tolist(), "first_pooled": first.tolist(),
        })
    (out / "expected.json").write_text(json.dumps({"cases": cases}))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/tiny_bert")
