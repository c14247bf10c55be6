"""Domain-robust, domain-adaptive sequence-to-sequence translation at desk scale.

Word-level domain-mixing transformers, classifier-curriculum MAML and an
evaluation harness, all on a small numpy autodiff core.
"""

__version__ = "0.1.0"
