"""Per-comment text scoring: sentiment, toxicity, readability, POS counts.

All scorers are deterministic, rule-based, and stateless after construction,
so one instance can be shared across workers. The tokenizer, sentence
splitter, and syllable counter are pinned here because every downstream
feature (and every oracle test) depends on their exact behavior.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError

_WORD_RE = re.compile(r"[a-zA-Z']+")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?\n]+")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")

_MD_CODEBLOCK_RE = re.compile(r"```.*?```", re.DOTALL)
_MD_INLINE_CODE_RE = re.compile(r"`[^`]*`")
_MD_LINK_RE = re.compile(r"\[([^\]]*)\]\([^)]*\)")
_MD_URL_RE = re.compile(r"https?://\S+")
_MD_MARKUP_RE = re.compile(r"[*_~#>|]")

# Normalization constant for the compound score: s / sqrt(s^2 + ALPHA).
_COMPOUND_ALPHA = 15.0

NEGATIONS = frozenset(
    "not no never none nothing nobody neither nor cannot cant dont doesnt "
    "didnt isnt arent wasnt werent wont wouldnt shouldnt couldnt aint".split()
)


def strip_markdown(text: str) -> str:
    """Remove common markdown markup, keeping link text."""
    text = _MD_CODEBLOCK_RE.sub(" ", text)
    text = _MD_INLINE_CODE_RE.sub(" ", text)
    text = _MD_LINK_RE.sub(r"\1", text)
    text = _MD_URL_RE.sub(" ", text)
    return _MD_MARKUP_RE.sub(" ", text)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; apostrophes are kept inside tokens."""
    return [t.strip("'") for t in _WORD_RE.findall(text.lower()) if t.strip("'")]


def split_sentences(text: str) -> list[str]:
    """Split on runs of . ! ? or newlines; keep segments that contain a word."""
    parts = _SENTENCE_SPLIT_RE.split(text)
    return [p for p in parts if _WORD_RE.search(p)]


def count_syllables(word: str) -> int:
    """Vowel-group heuristic with silent-e correction, minimum 1."""
    word = word.lower().strip("'")
    groups = len(_VOWEL_GROUP_RE.findall(word))
    if groups == 0:
        return 1
    if word.endswith("e") and not word.endswith("le") and groups > 1:
        groups -= 1
    return max(1, groups)


def _data_path(name: str) -> Path:
    return Path(str(resources.files("exodus").joinpath("data", name)))


# ---------------------------------------------------------------------------
# Sentiment


@dataclass(frozen=True)
class SentimentScores:
    positive: float
    negative: float
    neutral: float
    compound: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.positive, self.negative, self.neutral, self.compound)


def load_valence_lexicon(path: str | Path | None = None) -> dict[str, float]:
    """Load a plain-text valence lexicon, one "term weight" pair per line."""
    path = _data_path("sentiment_lexicon.txt") if path is None else Path(path)
    lexicon: dict[str, float] = {}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        term, weight = line.rsplit(None, 1)
        lexicon[term.lower()] = float(weight)
    return lexicon


class SentimentAnalyzer:
    """Rule-based valence scorer.

    A negation token within `negation_window` tokens before a valenced term
    flips that term's sign. The compound score is the signed valence sum s
    normalized to (-1, 1) via s / sqrt(s^2 + 15); the positive, negative, and
    neutral proportions are mass fractions that sum to 1.
    """

    def __init__(
        self,
        lexicon: Mapping[str, float] | None = None,
        negation_window: int = 3,
        markdown: bool = True,
    ):
        self.lexicon = dict(lexicon) if lexicon is not None else load_valence_lexicon()
        self.negation_window = negation_window
        self.markdown = markdown

    def score(self, text: str) -> SentimentScores:
        if self.markdown:
            text = strip_markdown(text)
        tokens = tokenize(text)
        if not tokens:
            return SentimentScores(0.0, 0.0, 1.0, 0.0)

        pos_mass = 0.0
        neg_mass = 0.0
        neu_count = 0
        raw_sum = 0.0
        for i, tok in enumerate(tokens):
            valence = self.lexicon.get(tok)
            if valence is None or valence == 0.0:
                neu_count += 1
                continue
            window = tokens[max(0, i - self.negation_window) : i]
            if any(w in NEGATIONS for w in window):
                valence = -valence
            raw_sum += valence
            if valence > 0:
                pos_mass += valence
            else:
                neg_mass += -valence

        total = pos_mass + neg_mass + neu_count
        if total == 0:
            return SentimentScores(0.0, 0.0, 1.0, 0.0)
        compound = raw_sum / math.sqrt(raw_sum * raw_sum + _COMPOUND_ALPHA)
        compound = max(-1.0, min(1.0, compound))
        return SentimentScores(pos_mass / total, neg_mass / total, neu_count / total, compound)


# ---------------------------------------------------------------------------
# Toxicity

TOXICITY_DIMENSIONS = (
    "toxicity",
    "severe_toxicity",
    "obscene",
    "insult",
    "identity_attack",
    "threat",
)


@dataclass(frozen=True)
class ToxicityScores:
    toxicity: float
    severe_toxicity: float
    obscene: float
    insult: float
    identity_attack: float
    threat: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.toxicity,
            self.severe_toxicity,
            self.obscene,
            self.insult,
            self.identity_attack,
            self.threat,
        )

    @classmethod
    def zeros(cls) -> "ToxicityScores":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def load_toxicity_lexicon(path: str | Path | None = None) -> dict[str, frozenset[str]]:
    """Load per-dimension term sets, one "dimension term" pair per line."""
    path = _data_path("toxicity_lexicon.txt") if path is None else Path(path)
    sets: dict[str, set[str]] = {dim: set() for dim in TOXICITY_DIMENSIONS}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        dim, term = line.split(None, 1)
        if dim not in sets:
            raise DataError(f"unknown toxicity dimension {dim!r} in {path}")
        sets[dim].add(term.strip().lower())
    return {dim: frozenset(terms) for dim, terms in sets.items()}


class LexiconToxicityScorer:
    """Transparent lexicon scorer: per dimension, matched-term density mapped
    through min(1, density * gamma)."""

    def __init__(
        self,
        lexicon: Mapping[str, frozenset[str]] | None = None,
        gamma: float = 2.0,
        markdown: bool = True,
    ):
        self.lexicon = dict(lexicon) if lexicon is not None else load_toxicity_lexicon()
        self.gamma = gamma
        self.markdown = markdown

    def score_text(self, text: str) -> ToxicityScores:
        if self.markdown:
            text = strip_markdown(text)
        tokens = tokenize(text)
        if not tokens:
            return ToxicityScores.zeros()
        n = len(tokens)
        values = []
        for dim in TOXICITY_DIMENSIONS:
            terms = self.lexicon.get(dim, frozenset())
            matches = sum(1 for t in tokens if t in terms)
            values.append(min(1.0, (matches / n) * self.gamma))
        return ToxicityScores(*values)

    def score_comment(self, event_id: str, text: str) -> ToxicityScores:
        return self.score_text(text)


class ImportedToxicityScorer:
    """Pass-through scorer backed by an externally computed score table.

    The table is keyed by event id; scoring an unknown id is an error so a
    partial import cannot silently fall back to zeros.
    """

    def __init__(self, table: Mapping[str, ToxicityScores]):
        self.table = dict(table)

    @classmethod
    def from_csv(cls, path: str | Path) -> "ImportedToxicityScorer":
        expected = ("event_id",) + TOXICITY_DIMENSIONS
        table: dict[str, ToxicityScores] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != expected:
                raise DataError(
                    f"imported toxicity CSV {path}: header {reader.fieldnames} "
                    f"!= expected {list(expected)}"
                )
            for row in reader:
                table[row["event_id"]] = ToxicityScores(
                    *(float(row[dim]) for dim in TOXICITY_DIMENSIONS)
                )
        return cls(table)

    def missing_ids(self, event_ids: Iterable[str]) -> list[str]:
        return sorted(eid for eid in set(event_ids) if eid not in self.table)

    def check_coverage(self, event_ids: Iterable[str]) -> None:
        missing = self.missing_ids(event_ids)
        if missing:
            shown = ", ".join(missing[:20])
            more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
            raise DataError(f"imported toxicity table is missing event ids: {shown}{more}")

    def score_comment(self, event_id: str, text: str) -> ToxicityScores:
        if event_id not in self.table:
            raise DataError(f"imported toxicity table is missing event ids: {event_id}")
        return self.table[event_id]


# ---------------------------------------------------------------------------
# Readability and parts of speech

POS_TAGS = (
    "noun",
    "verb",
    "adjective",
    "adverb",
    "pronoun",
    "determiner",
    "preposition",
    "conjunction",
    "other",
)

_DETERMINERS = frozenset(
    "the a an this that these those my your his her its our their some any "
    "no every each either neither another such".split()
)
_PRONOUNS = frozenset(
    "i you he she it we they me him them us hers mine yours ours theirs "
    "myself yourself himself herself itself ourselves themselves who whom "
    "whose someone anyone everyone nobody anybody everybody something "
    "anything everything".split()
)
_PREPOSITIONS = frozenset(
    "of in to for with on at by from up about into over after under between "
    "through during before against among within without across behind beyond "
    "near off down around toward towards upon onto".split()
)
_CONJUNCTIONS = frozenset(
    "and but or nor so yet because although though while if unless since "
    "whereas whether".split()
)
_CLOSED_VERBS = frozenset(
    "am is are was were be been being have has had do does did will would "
    "can could shall should may might must".split()
)
_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "ic", "ish", "less", "est")
_VERB_SUFFIXES = ("ing", "ize", "ise", "ify")


def _tag_token(tok: str) -> str:
    if tok in _DETERMINERS:
        return "determiner"
    if tok in _PRONOUNS:
        return "pronoun"
    if tok in _PREPOSITIONS:
        return "preposition"
    if tok in _CONJUNCTIONS:
        return "conjunction"
    if tok in _CLOSED_VERBS:
        return "verb"
    if not tok.isalpha():
        return "other"
    if tok.endswith("ly") and len(tok) > 3:
        return "adverb"
    for suf in _ADJ_SUFFIXES:
        if tok.endswith(suf) and len(tok) > len(suf) + 1:
            return "adjective"
    for suf in _VERB_SUFFIXES:
        if tok.endswith(suf) and len(tok) > len(suf) + 1:
            return "verb"
    if tok.endswith("ed") and len(tok) > 3:
        return "verb"
    return "noun"


def pos_counts(text: str, markdown: bool = True) -> dict[str, int]:
    """Coarse POS counts; every token receives exactly one tag."""
    if markdown:
        text = strip_markdown(text)
    counts = {tag: 0 for tag in POS_TAGS}
    for tok in tokenize(text):
        counts[_tag_token(tok)] += 1
    return counts


def readability(text: str, markdown: bool = True) -> tuple[float, float]:
    """Flesch-Kincaid grade level and SMOG index.

    Zero-word or zero-sentence text is defined to score 0 on both.
    """
    if markdown:
        text = strip_markdown(text)
    sentences = split_sentences(text)
    words = tokenize(text)
    if not words or not sentences:
        return (0.0, 0.0)
    n_words = len(words)
    n_sentences = len(sentences)
    syllables = sum(count_syllables(w) for w in words)
    polysyllables = sum(1 for w in words if count_syllables(w) >= 3)
    fk = 0.39 * (n_words / n_sentences) + 11.8 * (syllables / n_words) - 15.59
    smog = 1.0430 * math.sqrt(polysyllables * 30.0 / n_sentences) + 3.1291
    return (fk, smog)


@dataclass(frozen=True)
class StyleScores:
    flesch_kincaid_grade: float
    smog_index: float
    pos_counts: dict[str, int]


def style_scores(text: str, markdown: bool = True) -> StyleScores:
    fk, smog = readability(text, markdown=markdown)
    return StyleScores(fk, smog, pos_counts(text, markdown=markdown))
