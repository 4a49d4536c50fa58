"""Bridge configuration: one JSON object, documented here, validated once.

Schema (all keys optional; defaults shown):

    {
      "host": "127.0.0.1",
      "port": 0,                     // 0 = ephemeral
      "device": "cpu",
      "record_dir": null,            // fixture directory; null = no recording
      "prompt_template_path": null,  // null = built-in template
      "max_concepts": 10,            // proposal list bound
      "models": {                    // per-operator model identifiers
        "proposer":   "region-proposer/tiny-v1",
        "grounder":   "color-grounder/tiny-v1",
        "editor":     "border-inpaint/tiny-v1",
        "classifier": "histogram-softmax/tiny-v1",
        "embedder":   "token-hash/tiny-v1"
      },
      "model_options": {             // per-operator constructor options
        "classifier": {"n_classes": 4, "seed": 0}
      }
    }

Command-line flags override file values, which override these defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .errors import StartupError
from .models import REGISTRY

#: instruction given to the concept proposer; bounded and groundability-focused
DEFAULT_PROMPT_TEMPLATE = (
    "List the distinct objects you can clearly see in the image as at most "
    "{max_concepts} short noun phrases, one per line, most prominent first. "
    "Name only concrete things whose outline you could trace, and describe "
    "each as a color word plus a shape word."
)

DEFAULT_MODELS = {
    "proposer": "region-proposer/tiny-v1",
    "grounder": "color-grounder/tiny-v1",
    "editor": "border-inpaint/tiny-v1",
    "classifier": "histogram-softmax/tiny-v1",
    "embedder": "token-hash/tiny-v1",
}


@dataclass(frozen=True)
class BridgeConfig:
    host: str = "127.0.0.1"
    port: int = 0
    device: str = "cpu"
    record_dir: Optional[str] = None
    prompt_template_path: Optional[str] = None
    max_concepts: int = 10
    models: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_MODELS))
    model_options: Mapping[str, Mapping] = field(default_factory=dict)

    def __post_init__(self):
        if not (0 <= self.port <= 65535):
            raise StartupError(f"port must lie in [0, 65535], got {self.port}")
        if self.max_concepts < 1:
            raise StartupError(f"max_concepts must be >= 1, got {self.max_concepts}")
        missing = sorted(set(REGISTRY) - set(self.models))
        unknown = sorted(set(self.models) - set(REGISTRY))
        if missing or unknown:
            raise StartupError(
                f"models must name exactly the operators {sorted(REGISTRY)}; "
                f"missing: {missing}, unknown: {unknown}"
            )
        bad_options = sorted(set(self.model_options) - set(REGISTRY))
        if bad_options:
            raise StartupError(f"model_options for unknown operators: {bad_options}")

    def prompt_template(self) -> str:
        if self.prompt_template_path is None:
            return DEFAULT_PROMPT_TEMPLATE
        path = Path(self.prompt_template_path)
        if not path.is_file():
            raise StartupError(f"prompt template {path} does not exist")
        text = path.read_text(encoding="utf-8").strip()
        if not text:
            raise StartupError(f"prompt template {path} is empty")
        return text

    def rendered_prompt(self) -> str:
        return self.prompt_template().format(max_concepts=self.max_concepts)

    def to_dict(self) -> dict:
        return {
            "host": self.host,
            "port": self.port,
            "device": self.device,
            "record_dir": self.record_dir,
            "prompt_template_path": self.prompt_template_path,
            "max_concepts": self.max_concepts,
            "models": dict(sorted(self.models.items())),
            "model_options": {
                op: dict(opts) for op, opts in sorted(self.model_options.items())
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BridgeConfig":
        known = {
            "host", "port", "device", "record_dir", "prompt_template_path",
            "max_concepts", "models", "model_options",
        }
        unknown = sorted(set(data) - known)
        if unknown:
            raise StartupError(
                f"unknown config keys: {', '.join(unknown)}; "
                f"known: {', '.join(sorted(known))}"
            )
        merged_models = dict(DEFAULT_MODELS)
        merged_models.update(data.get("models", {}))
        return cls(
            host=str(data.get("host", "127.0.0.1")),
            port=int(data.get("port", 0)),
            device=str(data.get("device", "cpu")),
            record_dir=data.get("record_dir"),
            prompt_template_path=data.get("prompt_template_path"),
            max_concepts=int(data.get("max_concepts", 10)),
            models=merged_models,
            model_options=data.get("model_options", {}),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "BridgeConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise StartupError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise StartupError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise StartupError(f"config {path} must hold a JSON object")
        return cls.from_dict(data)
