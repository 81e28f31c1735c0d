"""
Prompt template registry, rendering, and slot recovery
"""
import re
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Tuple

from app.core.errors import TemplateError
from prompts.prompts import DEFAULT_TEMPLATE_VERSION, TEMPLATE_IDS, load_template_texts
from .schemas import SLOT_PATTERN, PromptTemplate

EXCERPT_SLOT = "[INSERT EXCERPT HERE]"
QUESTIONS_SLOT = "[INSERT SPECULATED QUESTIONS HERE]"
DOCUMENTS_SLOT = "[INSERT RETRIEVED DOCUMENTS HERE]"
QUESTION_SLOT = "[INSERT QUESTION HERE]"
ROUND1_SLOT = "[INSERT ANSWER FROM ROUND 1]"
OPTION_SLOTS = tuple(f"[INSERT OPTION {i}]" for i in range(1, 5))

# Template ids per dataset profile
PROFILE_TEMPLATES: Dict[str, Dict[str, str]] = {
    "narrativeqa": {
        "speculate": "spec_narrative",
        "extract": "kb_narrative",
        "extract_fact_only": "kb_narrative_fact_only",
        "answer": "qa_narrative_r1",
        "compress": "qa_narrative_r2",
    },
    "quality": {
        "speculate": "spec_narrative",
        "extract": "kb_narrative",
        "extract_fact_only": "kb_narrative_fact_only",
        "answer": "qa_quality",
    },
    "qasper": {
        "speculate": "spec_qasper",
        "extract": "kb_qasper",
        "extract_fact_only": "kb_qasper_fact_only",
        "answer": "qa_qasper",
    },
}


@lru_cache(maxsize=None)
def get_template(template_id: str, version: str = DEFAULT_TEMPLATE_VERSION) -> PromptTemplate:
    """Load (once) a template asset by id."""
    texts = load_template_texts(template_id, version)
    return PromptTemplate(
        template_id=template_id,
        version=version,
        system_text=texts["system"],
        user_text_with_slots=texts["user"],
    )


def all_templates(version: str = DEFAULT_TEMPLATE_VERSION) -> List[PromptTemplate]:
    return [get_template(template_id, version) for template_id in TEMPLATE_IDS]


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> Tuple[str, str]:
    """
    Replace every slot marker with its bound value.

    Args:
        template: Template to render
        bindings: Slot marker -> value; must cover exactly the template's slots

    Returns:
        Tuple[str, str]: (system, user) texts

    Raises:
        TemplateError: If a slot is unbound or a binding names no slot
    """
    slots = template.slots
    missing = [slot for slot in slots if slot not in bindings]
    extra = [key for key in bindings if key not in slots]
    if missing or extra:
        raise TemplateError(template.template_id, missing, extra)

    def fill(text: str) -> str:
        # single pass, so bound values are never rescanned for markers
        return SLOT_PATTERN.sub(lambda m: bindings[m.group()], text)

    return fill(template.system_text), fill(template.user_text_with_slots)


def option_bindings(options: List[str]) -> Dict[str, str]:
    """Bind the four multiple-choice option slots."""
    if len(options) != 4:
        raise ValueError(f"Expected 4 options, got {len(options)}")
    return dict(zip(OPTION_SLOTS, options))


@lru_cache(maxsize=None)
def _user_matcher(template: PromptTemplate) -> Tuple[re.Pattern, Dict[str, str]]:
    group_for_slot: Dict[str, str] = {}
    parts: List[str] = []
    position = 0
    text = template.user_text_with_slots
    for match in SLOT_PATTERN.finditer(text):
        parts.append(re.escape(text[position:match.start()]))
        marker = match.group()
        if marker in group_for_slot:
            parts.append(f"(?P={group_for_slot[marker]})")
        else:
            group_for_slot[marker] = f"s{len(group_for_slot)}"
            parts.append(f"(?P<{group_for_slot[marker]}>.*?)")
        position = match.end()
    parts.append(re.escape(text[position:]))
    return re.compile("".join(parts), re.DOTALL), group_for_slot


def match_prompt(template: PromptTemplate, system: str, user: str) -> Optional[Dict[str, str]]:
    """
    Recover slot bindings from a rendered prompt.

    Returns:
        Optional[Dict[str, str]]: Bindings if the texts were rendered from this template
    """
    if system != template.system_text:
        return None
    pattern, group_for_slot = _user_matcher(template)
    match = pattern.fullmatch(user)
    if match is None:
        return None
    return {marker: match.group(group) for marker, group in group_for_slot.items()}


def identify_prompt(system: str, user: str, version: str = DEFAULT_TEMPLATE_VERSION) -> Optional[Tuple[PromptTemplate, Dict[str, str]]]:
    """Find the template a rendered prompt came from, with its bindings."""
    for template in all_templates(version):
        bindings = match_prompt(template, system, user)
        if bindings is not None:
            return template, bindings
    return None
