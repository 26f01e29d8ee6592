import json
import logging
from pathlib import Path
from typing import Iterable, Optional, Type, TypeVar

import pandas as pd
from pydantic import BaseModel, ValidationError

from ..errors import SchemaMismatchError, UsageError

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


def dump_model(model: BaseModel) -> str:
    """Stable JSON text for an artifact model: declaration key order, 2-space indent."""
    return json.dumps(model.model_dump(mode="json", by_alias=True), indent=2) + "\n"


class ArtifactStore:
    """Directory of run artifacts (JSON models, CSV tables, text summaries)."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.connected = False

    def connect(self) -> "ArtifactStore":
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            marker = self.root / ".write-check"
            marker.write_text("", encoding="utf-8")
            marker.unlink()
        except OSError as e:
            raise UsageError(f"output directory {self.root} is not writable: {e.strerror}")
        self.connected = True
        logger.debug("artifact store ready at %s", self.root)
        return self

    def path(self, name: str) -> Path:
        return self.root / name

    def write_text(self, name: str, text: str) -> Path:
        if not self.connected:
            self.connect()
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(target, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
        except OSError as e:
            raise UsageError(f"cannot write {target}: {e.strerror}")
        logger.info("wrote %s", target)
        return target

    def write_json(self, name: str, model: BaseModel) -> Path:
        return self.write_text(name, dump_model(model))

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        return self.write_text(name, frame.to_csv(index=False, lineterminator="\n"))

    def read_json(self, name: str, model_type: Type[M]) -> M:
        return read_model(self.path(name), model_type)


def read_text(path: Path, what: str = "file") -> str:
    try:
        with open(path, encoding="utf-8") as handle:
            return handle.read()
    except OSError as e:
        raise UsageError(f"cannot read {what} {path}: {e.strerror}")


def read_model(path: Path, model_type: Type[M], what: Optional[str] = None) -> M:
    text = read_text(Path(path), what or model_type.__name__)
    try:
        return model_type.model_validate_json(text)
    except ValidationError as e:
        raise SchemaMismatchError(f"{path} is not a valid {model_type.__name__}: {e}")


def rows_frame(rows: Iterable[BaseModel], columns=None) -> pd.DataFrame:
    records = [r.model_dump(mode="json") for r in rows]
    return pd.DataFrame.from_records(records, columns=columns)
