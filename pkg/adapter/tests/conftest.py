import csv
import json
import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

WORDS = ["krieg", "steuern", "rente", "umwelt", "und", "zu", "viele", "mehr", "keine"]
SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A local masked-LM checkpoint small enough to fine-tune in seconds."""
    from transformers import BertConfig, BertForMaskedLM, BertTokenizerFast

    root = tmp_path_factory.mktemp("ckpt")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(SPECIALS + WORDS) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(SPECIALS) + len(WORDS),
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=32,
    )
    out = root / "mlm"
    BertForMaskedLM(config).save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def smoke_corpus(tmp_path_factory):
    """50 answers in the toolkit CSV format plus a 30/10/10 split file."""
    import numpy as np

    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(12)
    signature = {"10": "krieg", "20": "steuern", "30": "rente"}
    rows = []
    for i in range(50):
        code = ("10", "20", "30")[int(rng.integers(3))]
        labels = {code}
        if rng.random() < 0.2:
            labels.add(("10", "20", "30")[int(rng.integers(3))])
        tokens = [signature[c] for c in sorted(labels)]
        tokens += list(rng.choice(["und", "zu", "viele", "mehr", "keine"],
                                  size=int(rng.integers(1, 4))))
        rows.append((f"s{i:03d}", " ".join(tokens), ";".join(sorted(labels, key=int))))

    data = root / "answers.csv"
    with open(data, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "text", "labels"])
        writer.writerows(rows)

    ids = [r[0] for r in rows]
    split = root / "split.json"
    split.write_text(json.dumps({
        "format_version": 1,
        "seed": 12,
        "fractions": [0.6, 0.2, 0.2],
        "train": ids[:30],
        "validation": ids[30:40],
        "test": ids[40:],
    }), encoding="utf-8")
    return str(data), str(split)
