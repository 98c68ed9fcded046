"""Teacher encoders. Only `HFEncoder` needs torch and transformers."""

from __future__ import annotations

from typing import Protocol

import numpy as np


class Encoder(Protocol):
    dim: int

    def word_vector(self, word: str) -> np.ndarray: ...

    def sentence_vector(self, sentence: str) -> np.ndarray: ...


class ModelLoadError(RuntimeError):
    pass


class EmptyTokenization(RuntimeError):
    pass


class HFEncoder:
    """A Hugging Face checkpoint used as a frozen teacher.

    Words are encoded alone and their non-special subtoken outputs averaged.
    With `pooling="cls"` the sentence vector is the CLS position; with
    `"native"` it is the model's own sentence embedding via
    sentence-transformers. For BERT-family models `word_source="input-table"`
    averages static input embedding rows instead of encoder outputs; other
    models always use encoder outputs.
    """

    def __init__(self, model: str, pooling: str = "cls", word_source: str = "encoded", device: str = "cpu"):
        if pooling not in ("cls", "native"):
            raise ValueError(f"unknown pooling {pooling!r}")
        if word_source not in ("encoded", "input-table"):
            raise ValueError(f"unknown word source {word_source!r}")
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise ModelLoadError("HFEncoder needs torch and transformers") from e
        self._torch = torch
        self.pooling = pooling
        self.word_source = word_source
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model)
            if pooling == "native":
                from sentence_transformers import SentenceTransformer

                self._st = SentenceTransformer(model, device=device)
                self.model = self._st[0].auto_model
            else:
                self.model = AutoModel.from_pretrained(model).to(device)
        except Exception as e:  # model hubs raise many types
            raise ModelLoadError(f"cannot load {model!r}: {e}") from e
        if pooling == "cls" and self.tokenizer.cls_token_id is None:
            raise ModelLoadError(f"{model!r} has no CLS token; use --pooling native")
        self.model.eval()
        if self.model.config.model_type != "bert":
            self.word_source = "encoded"
        self.device = device
        self.dim = int(self.model.config.hidden_size if pooling == "cls" else self._st.get_sentence_embedding_dimension())

    def _hidden(self, text: str):
        enc = self.tokenizer(text, return_tensors="pt", return_special_tokens_mask=True)
        special = enc.pop("special_tokens_mask")[0].bool()
        enc = {k: v.to(self.device) for k, v in enc.items()}
        with self._torch.no_grad():
            if self.model.config.is_encoder_decoder:
                out = self.model.encoder(**enc).last_hidden_state[0]
            else:
                out = self.model(**enc).last_hidden_state[0]
        return enc["input_ids"][0], special, out

    def word_vector(self, word: str) -> np.ndarray:
        if not word:
            raise EmptyTokenization("empty word")
        ids, special, hidden = self._hidden(word)
        keep = ~special.to(hidden.device)
        if not bool(keep.any()):
            raise EmptyTokenization(f"{word!r} has no non-special subtokens")
        if self.word_source == "input-table":
            rows = self.model.get_input_embeddings()(ids[keep])
        else:
            rows = hidden[keep]
        return rows.mean(dim=0).detach().cpu().numpy().astype(np.float32)

    def sentence_vector(self, sentence: str) -> np.ndarray:
        if self.pooling == "native":
            return np.asarray(self._st.encode(sentence), dtype=np.float32)
        _, _, hidden = self._hidden(sentence)
        return hidden[0].detach().cpu().numpy().astype(np.float32)
