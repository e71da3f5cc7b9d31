"""Reading corpus files written by :func:`pcfgbound.sampler.write_corpus`."""

import re
from dataclasses import dataclass
from pathlib import Path

_TREE_TOKEN = re.compile(r"\(|\)|[^\s()]+")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple
    tags: tuple = None


def parse_bracketed(line):
    """Parse a single-line bracketed tree into nested tuples."""
    stack = [[]]
    for tok in _TREE_TOKEN.findall(line):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) < 2:
                raise ValueError("unbalanced brackets: %r" % line)
            node = stack.pop()
            if not node:
                raise ValueError("empty node: %r" % line)
            stack[-1].append(tuple(node))
        else:
            stack[-1].append(tok)
    if len(stack) != 1 or len(stack[0]) != 1:
        raise ValueError("not a single tree: %r" % line)
    return stack[0][0]


def tree_yield(tree):
    """(tokens, preterminal tags) of a tree, left to right."""
    tokens, tags = [], []
    stack = [tree]
    while stack:
        node = stack.pop()
        kids = node[1:]
        if len(kids) == 1 and isinstance(kids[0], str):
            tokens.append(kids[0])
            tags.append(node[0])
        else:
            stack.extend(reversed([k for k in kids if not isinstance(k, str)]))
    return tuple(tokens), tuple(tags)


def parse_line(line, fmt):
    if fmt == "tokens":
        return Sentence(tuple(line.split()))
    if fmt == "tagged":
        pairs = [item.rsplit("/", 1) for item in line.split()]
        if any(len(p) != 2 for p in pairs):
            raise ValueError("expected token/TAG items: %r" % line)
        return Sentence(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
    if fmt == "trees":
        return Sentence(*tree_yield(parse_bracketed(line)))
    raise ValueError("unknown corpus format %r" % fmt)


def guess_format(path):
    suffix = Path(path).suffix.lstrip(".")
    return suffix if suffix in ("tagged", "trees") else "tokens"


def read_corpus(path, fmt=None):
    """Sentences of a corpus file; blank lines are skipped."""
    fmt = fmt or guess_format(path)
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(parse_line(line, fmt))
    return out
