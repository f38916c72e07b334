"""Small deterministic rule-based English lemmatizer.

Good enough for app-review vocabulary: an irregular-form table plus
plural and -ing/-ed suffix stripping. Pre-lemmatized inputs (the
CoNLL-U pipeline) bypass this module entirely.
"""

IRREGULAR = {
    "am": "be", "are": "be", "is": "be", "was": "be", "were": "be", "been": "be",
    "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "goes": "go", "went": "go", "gone": "go",
    "gets": "get", "got": "get", "gotten": "get",
    "makes": "make", "made": "make", "making": "make",
    "takes": "take", "took": "take", "taken": "take", "taking": "take",
    "gives": "give", "gave": "give", "given": "give", "giving": "give",
    "comes": "come", "came": "come", "coming": "come",
    "says": "say", "said": "say", "saying": "say",
    "sees": "see", "saw": "see", "seen": "see", "seeing": "see",
    "uses": "use", "used": "use", "using": "use",
    "keeps": "keep", "kept": "keep",
    "lets": "let", "letting": "let",
    "puts": "put", "putting": "put",
    "found": "find", "finds": "find", "finding": "find",
    "sent": "send", "sends": "send", "sending": "send",
    "bought": "buy", "buys": "buy", "buying": "buy",
    "paid": "pay", "pays": "pay", "paying": "pay",
    "left": "leave", "leaves": "leave", "leaving": "leave",
    "lost": "lose", "loses": "lose", "losing": "lose",
    "better": "good", "best": "good",
    "worse": "bad", "worst": "bad",
    "children": "child", "people": "person",
    "men": "man", "women": "woman",
    "feet": "foot", "mice": "mouse",
    "movies": "movie", "ios": "ios", "this": "this", "his": "his",
    "its": "its", "yes": "yes", "us": "us",
}

# words ending in -s that are not plurals and common in reviews
_KEEP_S = {"always", "perhaps", "plus", "thus", "as", "ss"}

VOWELS = set("aeiou")


def _strip_double_consonant(stem: str) -> str:
    if (len(stem) >= 4 and stem[-1] == stem[-2]
            and stem[-1] not in VOWELS and stem[-1] not in "ls"):
        return stem[:-1]
    return stem


def lemmatize(word: str) -> str:
    """Lemma of one already-lowercased token."""
    if word in IRREGULAR:
        return IRREGULAR[word]
    if word in _KEEP_S:
        return word

    # plural nouns / 3rd-person verbs
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("ches", "shes", "sses", "xes", "zes")) and len(word) > 4:
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is", "'s")) and len(word) > 3:
        return word[:-1]

    if word.endswith("ing") and len(word) > 5:
        stem = word[:-3]
        return _strip_double_consonant(stem)

    if word.endswith("ied") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("ed") and len(word) > 4:
        stem = word[:-2]
        return _strip_double_consonant(stem)

    return word
