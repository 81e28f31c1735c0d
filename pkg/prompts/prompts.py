'''
NOTE:
1.Prompt templates live as versioned text assets: templates/<version>/<template_id>.{system,user}.txt
2.Slots are literal markers like [INSERT EXCERPT HERE]; they are never str.format fields,
  so braces inside prompts need no escaping.
'''
from pathlib import Path
from typing import Dict, List

PROMPTS_DIR = Path(__file__).parent / "templates"
DEFAULT_TEMPLATE_VERSION = "v1"

TEMPLATE_IDS: List[str] = [
    "spec_narrative",
    "spec_qasper",
    "kb_narrative",
    "kb_qasper",
    "kb_narrative_fact_only",
    "kb_qasper_fact_only",
    "qa_narrative_r1",
    "qa_narrative_r2",
    "qa_qasper",
    "qa_quality",
]


def load_prompt(filename: str, version: str = DEFAULT_TEMPLATE_VERSION) -> str:
    """Load a prompt asset from file (trailing newlines stripped)."""
    prompt_path = PROMPTS_DIR / version / filename
    with open(prompt_path, "r", encoding="utf-8") as f:
        return f.read().rstrip("\n")


def load_template_texts(template_id: str, version: str = DEFAULT_TEMPLATE_VERSION) -> Dict[str, str]:
    """Get the system and user texts of one template."""
    if template_id not in TEMPLATE_IDS:
        raise KeyError(f"Unknown template_id: {template_id}")
    return {
        "system": load_prompt(f"{template_id}.system.txt", version),
        "user": load_prompt(f"{template_id}.user.txt", version),
    }
