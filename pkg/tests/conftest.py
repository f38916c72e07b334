import numpy as np
import pytest

from reqtag.data import Corpus, TaggedSentence

FILLERS = ["i", "really", "love", "this", "app", "but", "it", "crash",
           "often", "please", "very", "nice"]
FEATURES = ["dark", "mode", "offline", "map", "voice", "note", "cloud",
            "sync", "photo", "filter"]


def make_synthetic_corpus(n_sentences=200, n_domains=3, seed=0) -> Corpus:
    """Sentences where the two tokens after 'add' are always a requirement."""
    rng = np.random.default_rng(seed)
    sentences = []
    for k in range(n_sentences):
        domain = f"dom{k % n_domains}"
        tokens = [str(t) for t in rng.choice(FILLERS, size=rng.integers(2, 5))]
        tags = ["O"] * len(tokens)
        if k % 4 != 0:
            a, b = rng.choice(FEATURES, size=2, replace=False)
            tokens += ["add", str(a), str(b)]
            tags += ["O", "B", "I"]
        tail = [str(t) for t in rng.choice(FILLERS, size=rng.integers(1, 3))]
        tokens += tail
        tags += ["O"] * len(tail)
        sentences.append(TaggedSentence(app_id=domain, tokens=tokens, tags=tags))
    return Corpus(sentences=sentences)


@pytest.fixture(scope="session")
def synthetic_corpus():
    return make_synthetic_corpus()
