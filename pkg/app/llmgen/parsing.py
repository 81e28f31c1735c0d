"""
Output-grammar parsers for LLM completions

NOTE:
1.EDP tuples: top-level "(entity, description)" groups; the split is the first comma
  outside double quotes, and surrounding double quotes are stripped from both fields.
2.Malformed input is counted and skipped, never raised.
"""
import re
from typing import Iterable, List, Optional, Tuple

from .schemas import NO_QUESTIONS_SENTINEL, RawEdpTuple

_BULLET = re.compile(r"^\s*(?:[-*•]+|\(?\d+[.)]|#+)\s*")
_CONNECTOR = re.compile(r"^(?:and|also|or)\b[\s,]*(?:also\b\s*)?", re.IGNORECASE)
_OPTION = re.compile(r"^\s*\**\s*(?:option\s*)?([1-4])\s*[.):]?\s*\**\s*$", re.IGNORECASE)
_ANSWER_PREFIX = re.compile(r"^\s*(?:\*\*)?\s*(?:shortened\s+answer|answer)\s*:?\s*(?:\*\*)?\s*:?\s*", re.IGNORECASE)


def _strip_quotes(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == '"' and value[-1] == '"':
        value = value[1:-1].strip()
    return value


def _toggles_quotes(text: str, index: int, in_quotes: bool) -> bool:
    """
    A double quote delimits a field only where a field can open or close.

    Opening: first non-space character after "(" or the separating comma.
    Closing: last non-space character before "," or ")". Any other quote is literal.
    """
    if in_quotes:
        after = index + 1
        while after < len(text) and text[after].isspace():
            after += 1
        return after == len(text) or text[after] in ",)"
    before = index - 1
    while before >= 0 and text[before].isspace():
        before -= 1
    return before < 0 or text[before] in "(,"


def _split_tuple(inner: str, offset: Tuple[int, int], quote_aware: bool = True) -> Optional[RawEdpTuple]:
    in_quotes = False
    for index, char in enumerate(inner):
        if char == '"' and quote_aware and _toggles_quotes(inner, index, in_quotes):
            in_quotes = not in_quotes
        elif char == "," and not in_quotes:
            entity = _strip_quotes(inner[:index])
            description = _strip_quotes(inner[index + 1:])
            if not entity or not description:
                return None
            return RawEdpTuple(entity_text=entity, description_text=description, source_offset=offset)
    if quote_aware and in_quotes:
        # unterminated quote: split on the first comma instead
        return _split_tuple(inner, offset, quote_aware=False)
    return None


def _find_close(text: str, start: int, quote_aware: bool = True) -> Optional[int]:
    """Index of the parenthesis closing the one at start, ignoring quoted text."""
    depth = 0
    in_quotes = False
    for index in range(start, len(text)):
        char = text[index]
        if char == '"' and quote_aware and _toggles_quotes(text, index, in_quotes):
            in_quotes = not in_quotes
        elif not in_quotes:
            if char == "(":
                depth += 1
            elif char == ")":
                depth -= 1
                if depth == 0:
                    return index
    if quote_aware and in_quotes:
        return _find_close(text, start, quote_aware=False)
    return None


def _residue_fragments(residue: str) -> int:
    """Count leftover text fragments between tuples that carry content."""
    count = 0
    for line in residue.splitlines():
        for piece in line.split(","):
            if any(ch.isalnum() for ch in piece):
                count += 1
    return count


def parse_edp_tuples(completion: str) -> Tuple[List[RawEdpTuple], int]:
    """
    Parse a completion into (entity, description) tuples.

    Args:
        completion: Raw LLM output

    Returns:
        Tuple[List[RawEdpTuple], int]: Parsed tuples, and the number of skipped fragments
    """
    tuples: List[RawEdpTuple] = []
    malformed = 0
    residues: List[str] = []
    length = len(completion)
    index = 0
    residue_start = 0

    while index < length:
        if completion[index] != "(":
            index += 1
            continue
        residues.append(completion[residue_start:index])
        close = _find_close(completion, index)
        if close is None:
            # unclosed: skip to the next candidate opening
            malformed += 1
            next_open = completion.find("(", index + 1)
            index = next_open if next_open != -1 else length
            residue_start = index
            continue
        parsed = _split_tuple(completion[index + 1:close], (index, close + 1))
        if parsed is None:
            malformed += 1
        else:
            tuples.append(parsed)
        index = close + 1
        residue_start = index
    residues.append(completion[residue_start:])

    malformed += sum(_residue_fragments(residue) for residue in residues)
    return tuples, malformed


def _quote_field(value: str, separator: bool) -> str:
    if '"' in value or (separator and "," in value):
        return f'"{value}"'
    return value


def serialize_edp_tuples(pairs: Iterable[Tuple[str, str]]) -> str:
    """Inverse of parse_edp_tuples for fields without unmatched parentheses."""
    rendered = []
    for entity, description in pairs:
        rendered.append(f"({_quote_field(entity, True)}, {_quote_field(description, False)})")
    return ", ".join(rendered)


def is_no_questions(completion: str) -> bool:
    normalized = completion.strip().strip("'\"`*").strip().lower().rstrip(".!'\"")
    return normalized == NO_QUESTIONS_SENTINEL


def parse_speculated_questions(completion: str) -> List[str]:
    """
    Parse a bullet or numbered list of questions.

    Compound lines ("Who came? And also why?") are split into single questions.
    The sentinel "no questions extracted" yields an empty list.
    """
    if is_no_questions(completion):
        return []

    questions: List[str] = []
    for raw_line in completion.splitlines():
        line = raw_line.replace("**", "").strip()
        if not line:
            continue
        bulleted = _BULLET.match(line) is not None
        line = _BULLET.sub("", line).strip()
        if not line or line.endswith(":"):
            continue
        if "?" not in line:
            if bulleted:
                questions.append(line)
            continue
        for piece in re.findall(r"[^?]*\?", line):
            piece = _CONNECTOR.sub("", piece.strip()).strip()
            if len(piece) > 1:
                questions.append(piece[0].upper() + piece[1:])
    return questions


def parse_option_index(completion: str) -> Optional[int]:
    """Parse a multiple-choice completion into 1..4, or None if non-conforming."""
    match = _OPTION.match(completion.strip())
    return int(match.group(1)) if match else None


def clean_answer(completion: str) -> str:
    """Strip answer labels and wrapping quotes from a free-text answer."""
    text = completion.strip()
    first_line = next((line for line in text.splitlines() if line.strip()), "")
    return _ANSWER_PREFIX.sub("", first_line).strip().strip('"').strip()
