"""
Errors raised by the benchmark harness.
"""


class HarnessError(Exception):
    """Base class for harness failures."""


class DatasetError(HarnessError):
    """A dataset file or question is malformed or its series cannot be loaded."""


class UnknownCategoryError(HarnessError):
    def __init__(self, category, known):
        self.category = category
        super().__init__(f'unknown category {category!r}; supported categories: {list(known)}')
