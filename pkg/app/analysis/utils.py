"""
Cosine similarity between speculated and real questions, bucketed by threshold
"""
from typing import List, Sequence

import numpy as np

from app.core.errors import UndefinedSimilarityError
from .schemas import (
    CLOSE_THRESHOLD,
    TOPIC_THRESHOLD,
    EmbeddingProvider,
    QuestionPair,
    SimilarityBucket,
    SimilarityBucketReport,
)

TOP_PAIRS = 20


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """
    Raises:
        ValueError: If the dimensions differ
        UndefinedSimilarityError: If either vector has zero norm
    """
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"Dimension mismatch: {a.shape} vs {b.shape}")
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        raise UndefinedSimilarityError("Cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def classify_similarity(similarity: float) -> SimilarityBucket:
    if similarity >= CLOSE_THRESHOLD:
        return SimilarityBucket.CLOSE
    if similarity >= TOPIC_THRESHOLD:
        return SimilarityBucket.TOPIC
    return SimilarityBucket.OTHER


def bucket_report(pairs: List[QuestionPair], top_n: int = TOP_PAIRS) -> SimilarityBucketReport:
    """Fractions per bucket, plus the most similar pairs."""
    count = len(pairs)
    if count == 0:
        return SimilarityBucketReport(pair_count=0)
    tally = {bucket: 0 for bucket in SimilarityBucket}
    for pair in pairs:
        tally[pair.bucket] += 1
    ranked = sorted(pairs, key=lambda p: (-p.similarity, p.speculated_question, p.real_question))
    return SimilarityBucketReport(
        pair_count=count,
        close_fraction=tally[SimilarityBucket.CLOSE] / count,
        topic_fraction=tally[SimilarityBucket.TOPIC] / count,
        other_fraction=tally[SimilarityBucket.OTHER] / count,
        top_pairs=ranked[:top_n],
    )


async def match_questions(
    real_questions: List[str],
    speculated_questions: List[str],
    provider: EmbeddingProvider,
) -> List[QuestionPair]:
    """
    Pair each speculated question with its most similar real question.

    Raises:
        ValueError: If either list is empty
        EmbeddingProviderError: Propagated from the provider with its batch index
    """
    if not real_questions or not speculated_questions:
        raise ValueError("bucket_similarities needs real and speculated questions")

    real_vectors = np.asarray(await provider.embed(real_questions), dtype=float)
    spec_vectors = np.asarray(await provider.embed(speculated_questions), dtype=float)
    real_norms = np.linalg.norm(real_vectors, axis=1)
    spec_norms = np.linalg.norm(spec_vectors, axis=1)
    if np.any(real_norms == 0) or np.any(spec_norms == 0):
        raise UndefinedSimilarityError("Cosine similarity is undefined for a zero vector")

    # rows: speculated questions, columns: real questions
    similarity = (spec_vectors @ real_vectors.T) / np.outer(spec_norms, real_norms)
    similarity = np.clip(similarity, -1.0, 1.0)

    pairs = []
    for row, spec_question in enumerate(speculated_questions):
        best = int(np.argmax(similarity[row]))
        score = float(similarity[row, best])
        pairs.append(
            QuestionPair(
                real_question=real_questions[best],
                speculated_question=spec_question,
                similarity=score,
                bucket=classify_similarity(score),
            )
        )
    return pairs


async def bucket_similarities(
    real_questions: List[str],
    speculated_questions: List[str],
    provider: EmbeddingProvider,
    top_n: int = TOP_PAIRS,
) -> SimilarityBucketReport:
    """Bucket every speculated question by its best cosine against the real questions."""
    pairs = await match_questions(real_questions, speculated_questions, provider)
    return bucket_report(pairs, top_n)


def format_report_table(report: SimilarityBucketReport) -> str:
    """Human-readable summary of a bucket report."""
    lines = [
        f"Speculated questions: {report.pair_count}",
        f"Closely related (>= {CLOSE_THRESHOLD}): {report.close_fraction:.2%}",
        f"Same topic ({TOPIC_THRESHOLD} - {CLOSE_THRESHOLD}): {report.topic_fraction:.2%}",
        f"Other (< {TOPIC_THRESHOLD}): {report.other_fraction:.2%}",
        "",
        f"{'similarity':>10}  {'bucket':<6}  speculated | real",
    ]
    for pair in report.top_pairs:
        lines.append(
            f"{pair.similarity:>10.4f}  {pair.bucket.value:<6}  {pair.speculated_question} | {pair.real_question}"
        )
    return "\n".join(lines) + "\n"
