"""
Scoring predictions per dataset profile
"""
from typing import Dict, List, Sequence

from .metrics import bleu4, mc_accuracy, meteor_lite, rouge_l, token_f1
from .schemas import PROFILE_METRICS, MetricReport, Prediction, QaTask


def metrics_for_profile(profile: str) -> List[str]:
    """
    Raises:
        KeyError: For an unknown dataset profile
    """
    if profile not in PROFILE_METRICS:
        raise KeyError(f"Unknown dataset profile: {profile}")
    return PROFILE_METRICS[profile]


def score_prediction(metric: str, task: QaTask, prediction: Prediction, bleu_smoothing: bool = False) -> float:
    if metric == "mc_accuracy":
        return mc_accuracy(prediction.option_index, task.gold_index)
    if metric == "bleu4":
        return bleu4(prediction.answer, task.gold_answers, smoothing=bleu_smoothing)
    if metric == "rouge_l":
        return rouge_l(prediction.answer, task.gold_answers)
    if metric == "meteor_lite":
        return meteor_lite(prediction.answer, task.gold_answers)
    if metric == "token_f1":
        return token_f1(prediction.answer, task.gold_answers)
    raise KeyError(f"Unknown metric: {metric}")


def aggregate(per_task: Dict[str, float]) -> float:
    """Mean folded in task_id order."""
    if not per_task:
        return 0.0
    total = 0.0
    for task_id in sorted(per_task):
        total += per_task[task_id]
    return min(1.0, max(0.0, total / len(per_task)))


def evaluate_predictions(
    tasks: Sequence[QaTask],
    predictions: Sequence[Prediction],
    profile: str,
    bleu_smoothing: bool = False,
) -> Dict[str, MetricReport]:
    """
    Score every task under each metric of the profile.

    A task with no prediction scores 0 and is flagged "missing:<task_id>"; an
    invalid multiple-choice answer scores 0 and is flagged "invalid_option:<task_id>".

    Returns:
        Dict[str, MetricReport]: One report per metric name
    """
    by_task = {p.task_id: p for p in predictions}
    flags = []
    for task in sorted(tasks, key=lambda t: t.task_id):
        prediction = by_task.get(task.task_id)
        if prediction is None:
            flags.append(f"missing:{task.task_id}")
        elif prediction.invalid_option:
            flags.append(f"invalid_option:{task.task_id}")

    reports = {}
    for metric in metrics_for_profile(profile):
        per_task = {}
        for task in sorted(tasks, key=lambda t: t.task_id):
            prediction = by_task.get(task.task_id)
            per_task[task.task_id] = (
                0.0 if prediction is None else score_prediction(metric, task, prediction, bleu_smoothing)
            )
        reports[metric] = MetricReport(
            metric_name=metric,
            per_task=per_task,
            aggregate=aggregate(per_task),
            flags=flags,
        )
    return reports
