"""Prompt templates stored as package text files with {placeholder} interpolation.

Only known placeholders are substituted, so JSON braces inside a template
survive rendering untouched. A config may point at an override directory;
missing files there fall back to the packaged defaults.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


class PromptNotFound(KeyError):
    pass


def interpolate(template: str, **values: object) -> str:
    """Replace {name} placeholders that have a supplied value; leave the rest."""

    def repl(match: re.Match) -> str:
        name = match.group(1)
        if name in values:
            return str(values[name])
        return match.group(0)

    return _PLACEHOLDER.sub(repl, template)


class PromptLibrary:
    """Loads named templates, preferring an override directory when given."""

    def __init__(self, override_dir: str | Path | None = None):
        self._override = Path(override_dir) if override_dir else None
        self._cache: dict[str, str] = {}

    def _read(self, filename: str) -> str:
        if self._override is not None:
            candidate = self._override / filename
            if candidate.exists():
                return candidate.read_text(encoding="utf-8")
        ref = resources.files(__package__) / filename
        if not ref.is_file():
            raise PromptNotFound(filename)
        return ref.read_text(encoding="utf-8")

    def get(self, name: str) -> str:
        """Template text; a single trailing newline from the file is stripped."""
        if name not in self._cache:
            text = self._read(f"{name}.txt")
            if text.endswith("\n"):
                text = text[:-1]
            self._cache[name] = text
        return self._cache[name]

    def render(self, name: str, **values: object) -> str:
        return interpolate(self.get(name), **values)

    def data(self, name: str) -> dict:
        key = f"json:{name}"
        if key not in self._cache:
            self._cache[key] = self._read(f"{name}.json")
        return json.loads(self._cache[key])

    def domain_descriptions(self) -> dict[str, str]:
        return self.data("domain_descriptions")

    def domain_guidelines(self) -> dict[str, str]:
        return self.data("domain_guidelines")


_DEFAULT: PromptLibrary | None = None


def default_library() -> PromptLibrary:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PromptLibrary()
    return _DEFAULT


__all__ = ["PromptLibrary", "PromptNotFound", "default_library", "interpolate"]
