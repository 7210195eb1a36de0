"""Fan a list of mappings out to an oracle with bounded concurrency."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from typing import Callable, Sequence

from ..alignment import Mapping
from ..prompts import PromptInstance
from .base import Oracle, OracleVerdict
from .store import VerdictStore, cache_key

log = logging.getLogger(__name__)


def batch_assess(
    mappings: Sequence[Mapping],
    oracle: Oracle,
    cache: VerdictStore | None = None,
    prompt_for: Callable[[Mapping], PromptInstance] | None = None,
    template: str = "-",
    system: str = "-",
    max_in_flight: int | None = None,
) -> list[OracleVerdict]:
    """Assess ``mappings`` and return verdicts in input order.

    Each distinct mapping is asked at most once: repeats and cache hits are
    answered from ``cache`` and flagged ``cached``. New verdicts are written to
    the cache as they arrive. The first fatal oracle error cancels outstanding
    work and is re-raised once the log is flushed.
    """
    if prompt_for is None and oracle.needs_prompt:
        raise ValueError(f"oracle {oracle.identity} needs prompts but no prompt_for was given")
    workers = max_in_flight or getattr(oracle, "max_in_flight", 8)

    prompts: dict[tuple, PromptInstance | None] = {}
    unique: dict[tuple, Mapping] = {}
    for m in mappings:
        if m.key not in unique:
            unique[m.key] = m
            prompts[m.key] = prompt_for(m) if prompt_for is not None else None

    def key_of(k):
        p = prompts[k]
        return cache_key(p.template.value if p else template, p.system.value if p else system, k, oracle.identity)

    results: dict[tuple, OracleVerdict] = {}
    todo = []
    for k, m in unique.items():
        hit = cache.get(key_of(k)) if cache is not None else None
        if hit is not None:
            results[k] = dataclasses.replace(hit, cached=True)
        else:
            todo.append(k)

    def ask(k):
        verdict = oracle.assess(unique[k], prompts[k])
        if cache is not None:
            cache.put(key_of(k), verdict)
        return k, verdict

    if todo:
        pool = ThreadPoolExecutor(max_workers=min(workers, len(todo)))
        try:
            futures = [pool.submit(ask, k) for k in todo]
            done, pending = wait(futures, return_when=FIRST_EXCEPTION)
            for f in done:
                if f.exception() is not None:
                    for p in pending:
                        p.cancel()
                    raise f.exception()
            for f in futures:
                k, verdict = f.result()
                results[k] = verdict
        finally:
            pool.shutdown(wait=True, cancel_futures=True)
            if cache is not None:
                cache.flush()

    out = []
    seen = set()
    for m in mappings:
        v = results[m.key]
        if m.key in seen and not v.cached:
            v = dataclasses.replace(v, cached=True)
        seen.add(m.key)
        out.append(v)
    return out
