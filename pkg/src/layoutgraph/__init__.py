"""Layout-graph engine: bipartite element/constraint graphs over GUIs, a
message-passing encoder, interactive autocompletion with confidence-rated
snapping, and embedding-based classification and retrieval."""

from .model import (
    AlignmentKind,
    BBox,
    ConstraintKind,
    ConstraintNode,
    Element,
    Gui,
    LayoutGraph,
    ParseError,
    ValidationError,
    build_graph,
    gui_from_json,
    gui_to_json,
)
from .extraction import ExtractionConfig, extract_all
from .autocomplete import Autocompleter, Confidence, RefineConfig, Suggestion, accept, refine
from .params import ModelConfig, ModelParams
from .embeddings import EmbeddingConfig

__all__ = [
    "AlignmentKind", "BBox", "ConstraintKind", "ConstraintNode", "Element",
    "Gui", "LayoutGraph", "ParseError", "ValidationError", "build_graph",
    "gui_from_json", "gui_to_json", "ExtractionConfig", "extract_all",
    "Autocompleter", "Confidence", "RefineConfig", "Suggestion", "accept",
    "refine", "ModelConfig", "ModelParams", "EmbeddingConfig",
]
