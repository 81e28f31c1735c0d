"""
QA metrics: BLEU-4, ROUGE-L, METEOR-lite, token F1 and multiple-choice accuracy

NOTE:
1.BLEU/ROUGE/METEOR compare lowercased default-tokenizer tokens; punctuation tokens are kept.
2.token_f1 uses answer normalization (lowercase, no punctuation, no articles).
3.Every metric takes the max over references.
"""
import re
import string
from collections import Counter
from typing import List, Optional

from nltk.stem.porter import PorterStemmer
from nltk.translate.bleu_score import SmoothingFunction, modified_precision, sentence_bleu
from nltk.translate.meteor_score import meteor_score
from rouge_score.rouge_scorer import RougeScorer

from app.text.utils import token_strings

BLEU_WEIGHTS = (0.25, 0.25, 0.25, 0.25)
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCTUATION = set(string.punctuation)
_smoothing = SmoothingFunction()
_stemmer = PorterStemmer()


class _DefaultTokenizer:
    """rouge-score tokenizer over the pipeline's default tokens."""

    def tokenize(self, text: str) -> List[str]:
        return token_strings(text)


class _NoSynonyms:
    """Lexical database with no synsets; turns off METEOR's synonym stage."""

    def synsets(self, word: str) -> list:
        return []


_rouge = RougeScorer(["rougeL"], tokenizer=_DefaultTokenizer())
_no_synonyms = _NoSynonyms()


def bleu4(candidate: str, references: List[str], smoothing: bool = False) -> float:
    """
    Sentence BLEU with uniform weights over 1..4-grams (nltk).

    Args:
        candidate: Predicted answer
        references: Gold answers
        smoothing: Add-1 smoothing of the 2..4-gram precisions (nltk method2)

    Returns:
        float: 0 when any precision is 0 (without smoothing) or the candidate is empty
    """
    cand = token_strings(candidate)
    refs = [r for r in (token_strings(reference) for reference in references) if r]
    if not cand or not refs:
        return 0.0
    if not smoothing and any(modified_precision(refs, cand, n).numerator == 0 for n in range(1, 5)):
        # nltk's unsmoothed path returns a tiny positive value here
        return 0.0
    score = sentence_bleu(
        refs,
        cand,
        weights=BLEU_WEIGHTS,
        smoothing_function=_smoothing.method2 if smoothing else None,
    )
    return float(score)


def rouge_l(candidate: str, references: List[str]) -> float:
    """LCS F-measure with beta = 1."""
    if not token_strings(candidate):
        return 0.0
    return max((_rouge.score(reference, candidate)["rougeL"].fmeasure for reference in references), default=0.0)


def meteor_lite(candidate: str, references: List[str]) -> float:
    """METEOR with exact and Porter-stem matching, no synonym stage (alpha 0.9, beta 3, gamma 0.5)."""
    cand = token_strings(candidate)
    refs = [r for r in (token_strings(reference) for reference in references) if r]
    if not cand or not refs:
        return 0.0
    return max(
        meteor_score(
            [ref],
            cand,
            preprocess=str.lower,
            stemmer=_stemmer,
            wordnet=_no_synonyms,
            alpha=METEOR_ALPHA,
            beta=METEOR_BETA,
            gamma=METEOR_GAMMA,
        )
        for ref in refs
    )


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = "".join(ch for ch in text.lower() if ch not in _PUNCTUATION)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def _f1(prediction: List[str], gold: List[str]) -> float:
    if not prediction and not gold:
        return 1.0
    if not prediction or not gold:
        return 0.0
    same = sum((Counter(prediction) & Counter(gold)).values())
    if same == 0:
        return 0.0
    precision, recall = same / len(prediction), same / len(gold)
    return 2 * precision * recall / (precision + recall)


def token_f1(candidate: str, references: List[str]) -> float:
    prediction = normalize_answer(candidate).split()
    return max((_f1(prediction, normalize_answer(r).split()) for r in references), default=0.0)


def mc_accuracy(predicted_index: Optional[int], gold_index: int) -> float:
    return 1.0 if predicted_index is not None and predicted_index == gold_index else 0.0
