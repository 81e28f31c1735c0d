'''
NOTE:

1.This is the on-disk datastore for every pipeline artifact (JSONL, JSON, CSV under one workdir).
2.The datastore needs to be configured once and is reused by all stages, like a db client.
3.Files ending in .gz are read and written through gzip transparently.

'''
# database/datastore.py

import gzip
import hashlib
import json
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple

from app.core.config import settings
from app.core.errors import RecordError

#Initialize datastore (note:This will be initialized once and reused in all stages)
datastore: "Datastore | None" = None


class Datastore:
    """Workdir-rooted artifact store with stage-named subdirectories"""

    def __init__(self, workdir: Path) -> None:
        self.workdir = Path(workdir)

    def path(self, *parts: str) -> Path:
        return self.workdir.joinpath(*parts)


def configure_datastore(workdir: Optional[str | Path] = None) -> Datastore:
    """
    Point the global datastore at a workdir (created if needed).

    Args:
        workdir: Root directory for artifacts; falls back to FADER_WORKDIR
    """
    global datastore
    datastore = Datastore(Path(workdir or settings.WORKDIR))
    datastore.workdir.mkdir(parents=True, exist_ok=True)
    return datastore


def get_datastore() -> Datastore:
    """Get the datastore instance, configuring the default workdir on first use."""
    global datastore
    if datastore is None:
        datastore = configure_datastore()
    return datastore


def _open_text(path: Path, mode: str):
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8", newline="\n")
    return open(path, mode, encoding="utf-8", newline="\n")


def dumps_record(record: Dict[str, Any]) -> str:
    """Serialize one record with stable field order as given by the caller."""
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> int:
    """
    Write records as UTF-8 JSONL, atomically replacing the target.

    Returns:
        int: Number of lines written
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    count = 0
    # gzip embeds an mtime; pin it so identical records give identical bytes
    if path.suffix == ".gz":
        with open(tmp_path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
            for record in records:
                gz.write((dumps_record(record) + "\n").encode("utf-8"))
                count += 1
    else:
        with _open_text(tmp_path, "w") as f:
            for record in records:
                f.write(dumps_record(record) + "\n")
                count += 1
    tmp_path.replace(path)
    return count


def iter_jsonl(path: Path) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """
    Yield (1-based line number, parsed object) for each non-blank line.

    Raises:
        RecordError: If a line is not valid JSON
    """
    with _open_text(path, "r") as f:
        for line_number, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise RecordError(f"invalid JSON: {e.msg}", str(path), line_number) from e
            yield line_number, record


def write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    tmp_path.replace(path)


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    tmp_path.replace(path)


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def payload_sha256(payload: Any) -> str:
    """Hash a JSON-serializable payload independent of dict ordering."""
    return text_sha256(json.dumps(payload, sort_keys=True, ensure_ascii=False))


async def log_error(error: Exception, location: str, additional_info: dict = None):
    """
    Log an error to the workdir error log.

    Args:
        error: The exception that occurred
        location: Where the error occurred (e.g., module - function)
        additional_info: Any additional information to log (optional)
    """
    try:
        store = get_datastore()
        error_doc = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "error_type": type(error).__name__,
            "error_message": str(error),
            "location": location,
            "traceback": traceback.format_exc(),
            "additional_info": additional_info or {},
        }
        with open(store.path("error_logs.jsonl"), "a", encoding="utf-8") as f:
            f.write(json.dumps(error_doc, ensure_ascii=False, default=str) + "\n")
    except Exception as e:
        # If error logging fails, print to console as fallback
        print(f"Failed to log error to workdir: {str(e)}")
        print(f"Original error: {str(error)}")
        print(f"Location: {location}")
        if additional_info:
            print(f"Additional info: {additional_info}")


def read_error_log() -> List[Dict[str, Any]]:
    """Return all recorded error documents (empty if none were logged)."""
    path = get_datastore().path("error_logs.jsonl")
    if not path.exists():
        return []
    return [doc for _, doc in iter_jsonl(path)]
