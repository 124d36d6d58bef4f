"""Score fusion and chunk selection.

Fused relevance is a weighted sum of the visual and textual scores. Selection
keeps chunks whose fused score strictly exceeds the threshold, sorts them by
score descending, and truncates to the top k. Ties are broken by source
position then chunk index, both ascending, so selection is fully
deterministic.
"""

from __future__ import annotations

from typing import Sequence


class ScoreLengthMismatch(ValueError):
    """Visual and textual score lists must align one-to-one with the chunks."""


def fuse_single(visual: float | None, textual: float | None,
                visual_weight: float, textual_weight: float) -> float:
    v = 0.0 if visual is None else visual
    t = 0.0 if textual is None else textual
    return visual_weight * v + textual_weight * t


def fuse_scores(visual: Sequence[float] | None, textual: Sequence[float] | None,
                visual_weight: float, textual_weight: float) -> list[float]:
    """Fuse per-chunk scores; an absent modality contributes zero."""
    if visual is None and textual is None:
        raise ScoreLengthMismatch("at least one modality must provide scores")
    n = len(visual) if visual is not None else len(textual)  # type: ignore[arg-type]
    if visual is not None and len(visual) != n:
        raise ScoreLengthMismatch(f"visual has {len(visual)} scores, expected {n}")
    if textual is not None and len(textual) != n:
        raise ScoreLengthMismatch(f"textual has {len(textual)} scores, expected {n}")
    return [
        fuse_single(visual[i] if visual is not None else None,
                    textual[i] if textual is not None else None,
                    visual_weight, textual_weight)
        for i in range(n)
    ]


def select_chunks(fused: Sequence[float], tie_keys: Sequence[tuple[int, int]],
                  threshold: float, top_k: int) -> list[int]:
    """Pick chunk indices for the context window.

    Keeps indices whose fused score strictly exceeds `threshold` (boundary
    equality drops the chunk), orders them by score descending with
    (source position, chunk index) ascending as the tie-break, and returns at
    most `top_k` indices in rank order.
    """
    if len(fused) != len(tie_keys):
        raise ScoreLengthMismatch(
            f"{len(fused)} scores but {len(tie_keys)} tie keys")
    if top_k < 0:
        raise ValueError(f"top_k must be >= 0, got {top_k}")
    kept = [i for i, score in enumerate(fused) if score > threshold]
    kept.sort(key=lambda i: (-fused[i], tie_keys[i][0], tie_keys[i][1]))
    return kept[:top_k]


__all__ = ["ScoreLengthMismatch", "fuse_scores", "fuse_single", "select_chunks"]
