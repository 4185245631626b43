"""索引のサイドカーマニフェスト（JSON）"""

from pathlib import Path

from pydantic import BaseModel


class IndexManifest(BaseModel):
    keyword: str
    p: int
    r: int
    nnz: int
    row_labels: list[str]
    id_map: str | None = None
    filter: str = ""
    ccs_file: str
    generation_seconds: float | None = None
    validation: str = "ok"


def write_manifest(path: str | Path, manifest: IndexManifest) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> IndexManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    return IndexManifest.model_validate_json(path.read_text(encoding="utf-8"))
