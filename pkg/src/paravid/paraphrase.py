"""Query expansion: rewrite the query, render it as images, caption the images.

Default counts: 10 rewrites; 5 generation seeds x 3 images each = 15 images;
10 captions per image = 150 captions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from paravid.providers import ImageArtifact, ProviderGateway
from paravid.verification import QAPair

DEFAULT_N_T2T = 10
DEFAULT_SEEDS = (10, 100, 1000, 10000, 100000)
DEFAULT_IMAGES_PER_SEED = 3
DEFAULT_CAPTIONS_PER_IMAGE = 10


@dataclass(frozen=True)
class UserQuery:
    qid: str
    text: str

    def __post_init__(self) -> None:
        if not self.qid:
            raise ValueError("qid must be non-empty")
        if not self.text.strip():
            raise ValueError("query text must be non-empty")


@dataclass(frozen=True)
class ParaphraseDefaults:
    n_t2t: int = DEFAULT_N_T2T
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    images_per_seed: int = DEFAULT_IMAGES_PER_SEED
    captions_per_image: int = DEFAULT_CAPTIONS_PER_IMAGE

    def __post_init__(self) -> None:
        if self.n_t2t < 1 or self.images_per_seed < 1 or self.captions_per_image < 1:
            raise ValueError("all paraphrase counts must be positive")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")


@dataclass
class ParaphrasedQuery:
    kind: str  # T2T | T2I | I2T
    ordinal: int
    text: str | None = None
    image: ImageArtifact | None = None
    parent_image: str | None = None
    verified_count: int | None = None
    valid: bool | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.kind in ("T2T", "I2T"):
            if self.text is None or self.image is not None:
                raise ValueError(f"{self.kind} paraphrase must carry text, not an image")
        elif self.kind == "T2I":
            if self.image is None or self.text is not None:
                raise ValueError("T2I paraphrase must carry an image, not text")
        else:
            raise ValueError(f"unknown paraphrase kind {self.kind!r}")
        if self.kind == "I2T" and not self.parent_image:
            raise ValueError("I2T paraphrase must reference its source image")


@dataclass
class ParaphraseBundle:
    query: UserQuery
    t2t: list[ParaphrasedQuery] = field(default_factory=list)
    t2i: list[ParaphrasedQuery] = field(default_factory=list)
    i2t: list[ParaphrasedQuery] = field(default_factory=list)
    qa: list[QAPair] = field(default_factory=list)

    @property
    def counts(self) -> tuple[int, int, int]:
        return (len(self.t2t), len(self.t2i), len(self.i2t))


def expand_t2t(gateway: ProviderGateway, query: UserQuery, n_t2t: int = DEFAULT_N_T2T) -> list[ParaphrasedQuery]:
    """Rewrite the user query n times; duplicates are kept as implicit up-weighting."""
    if n_t2t < 1:
        raise ValueError("n_t2t must be >= 1")
    texts = gateway.call_t2t(query.text, n_t2t)
    return [ParaphrasedQuery(kind="T2T", ordinal=i, text=t) for i, t in enumerate(texts)]


def expand_t2i(
    gateway: ProviderGateway,
    query: UserQuery,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    images_per_seed: int = DEFAULT_IMAGES_PER_SEED,
) -> list[ParaphrasedQuery]:
    """Generate images for the query, ordered by (seed index, image index)."""
    if not seeds:
        raise ValueError("seeds must be non-empty")
    if images_per_seed < 1:
        raise ValueError("images_per_seed must be >= 1")
    out: list[ParaphrasedQuery] = []
    for seed in seeds:
        for artifact in gateway.call_t2i(query.text, seed, images_per_seed):
            out.append(ParaphrasedQuery(kind="T2I", ordinal=len(out), image=artifact))
    return out


def expand_i2t(
    gateway: ProviderGateway,
    t2i: Sequence[ParaphrasedQuery],
    captions_per_image: int = DEFAULT_CAPTIONS_PER_IMAGE,
) -> list[ParaphrasedQuery]:
    """Caption every generated image; each caption remembers its source image."""
    if not t2i:
        raise ValueError("t2i list must be non-empty")
    if any(p.kind != "T2I" for p in t2i):
        raise ValueError("expand_i2t expects T2I paraphrases only")
    out: list[ParaphrasedQuery] = []
    for parent in t2i:
        assert parent.image is not None
        for caption in gateway.call_i2t(parent.image, captions_per_image):
            out.append(
                ParaphrasedQuery(
                    kind="I2T",
                    ordinal=len(out),
                    text=caption,
                    parent_image=parent.image.id,
                )
            )
    return out


def build_bundle(
    gateway: ProviderGateway,
    query: UserQuery,
    defaults: ParaphraseDefaults = ParaphraseDefaults(),
) -> ParaphraseBundle:
    """Run all three expansions plus QA generation; verification flags stay unset."""
    t2i = expand_t2i(gateway, query, defaults.seeds, defaults.images_per_seed)
    return ParaphraseBundle(
        query=query,
        t2t=expand_t2t(gateway, query, defaults.n_t2t),
        t2i=t2i,
        i2t=expand_i2t(gateway, t2i, defaults.captions_per_image),
        qa=gateway.call_qa_generate(query.text),
    )


# ---------------------------------------------------------------------------
# Topic and bundle files
# ---------------------------------------------------------------------------


def parse_topics(path: Path) -> list[UserQuery]:
    """One query per line: 'qid<TAB>text'."""
    queries: list[UserQuery] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'qid<TAB>text'")
            qid, text = line.split("\t", 1)
            if qid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate qid {qid!r}")
            seen.add(qid)
            queries.append(UserQuery(qid=qid, text=text))
    return queries


def _paraphrase_to_dict(p: ParaphrasedQuery) -> dict:
    d: dict = {"kind": p.kind, "ordinal": p.ordinal}
    if p.text is not None:
        d["text"] = p.text
    if p.image is not None:
        d["image_id"] = p.image.id
        d["source_prompt"] = p.image.source_prompt
        d["seed"] = p.image.seed
    if p.parent_image is not None:
        d["parent_image"] = p.parent_image
    if p.verified_count is not None:
        d["verified_count"] = p.verified_count
    if p.valid is not None:
        d["valid"] = p.valid
    if p.error is not None:
        d["error"] = p.error
    return d


def write_bundle(bundle: ParaphraseBundle, out_dir: Path, artifact_dir: Path) -> Path:
    """Serialize a bundle as '{qid}.bundle'; image bytes go to the artifact dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifact_dir = Path(artifact_dir)
    artifact_dir.mkdir(parents=True, exist_ok=True)
    for p in bundle.t2i:
        assert p.image is not None
        target = artifact_dir / p.image.id
        if not target.exists():
            tmp = target.with_name(target.name + ".tmp")
            tmp.write_bytes(p.image.bytes)
            tmp.replace(target)
    doc = {
        "qid": bundle.query.qid,
        "text": bundle.query.text,
        "t2t": [_paraphrase_to_dict(p) for p in bundle.t2t],
        "t2i": [_paraphrase_to_dict(p) for p in bundle.t2i],
        "i2t": [_paraphrase_to_dict(p) for p in bundle.i2t],
        "qa": [
            {"q": q.question, "a": q.answer, "kind": q.kind, "aspect": q.aspect}
            for q in bundle.qa
        ],
    }
    path = out_dir / f"{bundle.query.qid}.bundle"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(
        json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=True) + "\n",
        encoding="utf-8",
    )
    tmp.replace(path)
    return path


def read_bundle(path: Path, artifact_dir: Path) -> ParaphraseBundle:
    """Load a bundle file, pulling image bytes back from the artifact dir."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    artifact_dir = Path(artifact_dir)

    def load(entry: dict) -> ParaphrasedQuery:
        image = None
        if "image_id" in entry:
            data = (artifact_dir / entry["image_id"]).read_bytes()
            image = ImageArtifact(
                id=entry["image_id"],
                bytes=data,
                source_prompt=entry["source_prompt"],
                seed=entry["seed"],
            )
        return ParaphrasedQuery(
            kind=entry["kind"],
            ordinal=entry["ordinal"],
            text=entry.get("text"),
            image=image,
            parent_image=entry.get("parent_image"),
            verified_count=entry.get("verified_count"),
            valid=entry.get("valid"),
            error=entry.get("error"),
        )

    return ParaphraseBundle(
        query=UserQuery(qid=doc["qid"], text=doc["text"]),
        t2t=[load(e) for e in doc["t2t"]],
        t2i=[load(e) for e in doc["t2i"]],
        i2t=[load(e) for e in doc["i2t"]],
        qa=[
            QAPair(question=q["q"], answer=q["a"], kind=q["kind"], aspect=q["aspect"])
            for q in doc["qa"]
        ],
    )
