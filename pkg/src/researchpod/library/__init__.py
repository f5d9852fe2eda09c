"""Built-in skill library.

Importing this package registers the hybrid skill implementations (schemas,
verifiers, builders) with the runner module; the deterministic skill bodies
are referenced by entrypoint from the shipped skill manifests.
"""

from . import analysis, memos  # noqa: F401  (registration side effects)
