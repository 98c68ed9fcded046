"""Bracketed trees, read with the same conventions as the Rust loader."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

_TOKEN = re.compile(r"[()]|[^\s()]+")


@dataclass
class Tree:
    label: str
    word: Optional[str] = None
    children: List["Tree"] = field(default_factory=list)

    def leaves(self) -> List[str]:
        if self.word is not None:
            return [self.word]
        return [w for c in self.children for w in c.leaves()]

    def __str__(self) -> str:
        if self.word is not None:
            return f"({self.label} {self.word})"
        return "(" + self.label + "".join(" " + str(c) for c in self.children) + ")"


class TreeError(ValueError):
    pass


def _parse(tokens: List[str], i: int) -> Tuple[Tree, int]:
    # tokens[i] is the label following an already-consumed "(".
    if i >= len(tokens) or tokens[i] in "()":
        raise TreeError("expected a label")
    label = tokens[i]
    i += 1
    if i < len(tokens) and tokens[i] not in "()":
        word = tokens[i]
        if i + 1 >= len(tokens) or tokens[i + 1] != ")":
            raise TreeError(f"expected ) after word {word!r}")
        return Tree(label, word=word), i + 2
    children = []
    while i < len(tokens) and tokens[i] == "(":
        child, i = _parse(tokens, i + 1)
        children.append(child)
    if not children:
        raise TreeError(f"node {label!r} has no children")
    if i >= len(tokens) or tokens[i] != ")":
        raise TreeError("unbalanced brackets")
    return Tree(label, children=children), i + 1


def parse_tree(text: str) -> Tree:
    tokens = _TOKEN.findall(text)
    if not tokens or tokens[0] != "(":
        raise TreeError("tree must start with (")
    if len(tokens) > 1 and tokens[1] == "(":
        # Label-less PTB wrapper around one tree.
        tree, i = _parse(tokens, 2)
        if i >= len(tokens) or tokens[i] != ")":
            raise TreeError("unbalanced outer wrapper")
        i += 1
    else:
        tree, i = _parse(tokens, 1)
    if i != len(tokens):
        raise TreeError("trailing input after tree")
    return tree


def _strip_function_tags(label: str) -> str:
    if label.startswith("-"):
        return label
    m = re.search(r"[-=]", label[1:])
    return label if m is None else label[: m.start() + 1]


def normalize_ptb(tree: Tree) -> Optional[Tree]:
    label = _strip_function_tags(tree.label)
    if tree.word is not None:
        return None if tree.label == "-NONE-" else Tree(label, word=tree.word)
    kept = [c for c in (normalize_ptb(c) for c in tree.children) if c is not None]
    return Tree(label, children=kept) if kept else None


def read_treebank(path: str, normalize: bool = True) -> Iterator[Tuple[int, Tree]]:
    """Yield (line number, tree), skipping blanks, `#` comments and trees
    that normalize to nothing."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                tree = parse_tree(s)
            except TreeError as e:
                raise TreeError(f"line {lineno}: {e}") from None
            if normalize:
                tree = normalize_ptb(tree)
                if tree is None:
                    continue
            yield lineno, tree
