"""Synthetic deterministic skill bodies importable by entrypoint tests."""

import time

from researchpod.runtime import ArtifactDraft


def make_note(inputs, params, ctx):
    payload = {
        "note": params.get("note", ""),
        "n_inputs": sum(len(v) for v in inputs.values()),
    }
    return [ArtifactDraft(category="scratch_note", payload=payload)]


def forbidden_call(inputs, params, ctx):
    ctx.provider.complete(system="", prompt="", schema=None, seed=0)


def boom(inputs, params, ctx):
    raise KeyError("kaput")


def slow(inputs, params, ctx):
    time.sleep(0.05)
    return []
