"""Teacher embedding export for synnamon."""

from .encoders import Encoder, HFEncoder
from .export import export_corpus, make_record
from .trees import Tree, parse_tree, read_treebank

__all__ = ["Encoder", "HFEncoder", "Tree", "export_corpus", "make_record", "parse_tree", "read_treebank"]
