"""Vocabulary construction and GloVe embedding loading.

Indices 0 and 1 are reserved for padding and unknown tokens. The padding
row of an embedding table is all zeros and never receives gradient.
"""

from dataclasses import dataclass, field

import numpy as np

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

# out-of-vocabulary rows are drawn uniform in this range
OOV_INIT_BOUND = 0.25


class EmptyCorpusError(ValueError):
    pass


class GloveParseError(ValueError):
    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass
class Vocabulary:
    token_to_index: dict
    index_to_token: list

    pad_index: int = PAD_INDEX
    unk_index: int = UNK_INDEX

    def __len__(self):
        return len(self.index_to_token)

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, self.unk_index)

    def token_of(self, index: int) -> str:
        return self.index_to_token[index]


@dataclass
class EmbeddingTable:
    matrix: np.ndarray  # (vocab_size, dim)
    trainable: bool = True
    matched_words: int = 0  # vocab words found in the pretrained file


def build_vocabulary(corpus) -> Vocabulary:
    """Assign indices in first-occurrence order after the reserved slots."""
    index_to_token = [PAD_TOKEN, UNK_TOKEN]
    token_to_index = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
    saw_any = False
    for tokens in corpus:
        saw_any = True
        for tok in tokens:
            if tok not in token_to_index:
                token_to_index[tok] = len(index_to_token)
                index_to_token.append(tok)
    if not saw_any:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    return Vocabulary(token_to_index=token_to_index, index_to_token=index_to_token)


def random_embeddings(vocab: Vocabulary, dim: int, rng: np.random.Generator,
                      trainable: bool = True) -> EmbeddingTable:
    """Table with every non-pad row drawn uniform(-0.25, 0.25)."""
    matrix = rng.uniform(-OOV_INIT_BOUND, OOV_INIT_BOUND, size=(len(vocab), dim))
    matrix[PAD_INDEX, :] = 0.0
    return EmbeddingTable(matrix=matrix, trainable=trainable, matched_words=0)


def load_glove(path, vocab: Vocabulary, dim: int, rng: np.random.Generator,
               trainable: bool = True) -> EmbeddingTable:
    """Read a GloVe text file and build the table for vocab.

    Rows for vocabulary words present in the file are copied verbatim;
    everything else (including UNK) gets a random uniform(-0.25, 0.25)
    row; the pad row is zeroed.
    """
    table = random_embeddings(vocab, dim, rng, trainable=trainable)
    matched = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != dim + 1:
                raise GloveParseError(
                    f"expected a word and {dim} values, got {len(parts)} fields",
                    lineno)
            word = parts[0]
            idx = vocab.token_to_index.get(word)
            if idx is None or idx in (PAD_INDEX, UNK_INDEX):
                continue
            try:
                table.matrix[idx, :] = [float(v) for v in parts[1:]]
            except ValueError:
                raise GloveParseError("non-numeric embedding value", lineno) from None
            matched += 1
    table.matched_words = matched
    return table


def encode_tokens(tokens, vocab: Vocabulary) -> list:
    return [vocab.index_of(t) for t in tokens]


def decode_indices(indices, vocab: Vocabulary) -> list:
    return [vocab.token_of(i) for i in indices]
