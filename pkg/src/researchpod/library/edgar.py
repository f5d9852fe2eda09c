"""Polite EDGAR client for live filing ingest.

Live mode is opt-in. Requests identify themselves via a User-Agent (set
RESEARCHPOD_EDGAR_UA to your contact string), stay under five requests per
second, and every raw response is cached into the evidence store so a
re-run replays offline.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time

from ..errors import RunnerError
from ..runtime import ArtifactDraft
from .sources import split_filing_sections

TICKER_MAP_URL = "https://www.sec.gov/files/company_tickers.json"
SUBMISSIONS_URL = "https://data.sec.gov/submissions/CIK{cik:0>10}.json"
ARCHIVE_URL = "https://www.sec.gov/Archives/edgar/data/{cik}/{accession_nodash}/{document}"

MIN_REQUEST_INTERVAL = 0.21  # stays under 5 requests/second

_last_request = 0.0
_throttle = threading.Lock()


def _user_agent() -> str:
    return os.environ.get("RESEARCHPOD_EDGAR_UA", "researchpod/0.1 (research@example.com)")


def _get(url: str) -> str:
    import requests

    global _last_request
    with _throttle:
        wait = MIN_REQUEST_INTERVAL - (time.monotonic() - _last_request)
        if wait > 0:
            time.sleep(wait)
        _last_request = time.monotonic()
    response = requests.get(url, headers={"User-Agent": _user_agent()}, timeout=30)
    if response.status_code != 200:
        raise RunnerError(f"EDGAR returned {response.status_code} for {url}")
    return response.text


def _cached_fetch(url: str, ticker: str, ctx, parents) -> str:
    """Return the response body, via the evidence store when already cached."""
    for artifact in ctx.store.query(category="edgar_raw", ticker=ticker):
        if artifact.data().get("url") == url:
            return artifact.data()["body"]
    body = _get(url)
    ctx.store.append(
        "edgar_raw",
        {"ticker": ticker, "url": url, "body": body},
        engagement_id=ctx.engagement_id,
        producer_skill="fetch_filings",
        parent_ids=parents,
    )
    return body


def cik_for_ticker(ticker: str, ctx, parents) -> int:
    mapping = json.loads(_cached_fetch(TICKER_MAP_URL, ticker, ctx, parents))
    for entry in mapping.values():
        if entry.get("ticker", "").upper() == ticker.upper():
            return int(entry["cik_str"])
    raise RunnerError(f"ticker {ticker} not found in EDGAR company map")


def _strip_html(text: str) -> str:
    text = re.sub(r"(?is)<(script|style).*?</\1>", " ", text)
    text = re.sub(r"(?s)<[^>]+>", " ", text)
    return re.sub(r"[ \t]+", " ", text)


def fetch_live_filings(inputs: dict, params: dict, ctx) -> list[ArtifactDraft]:
    ticker = params.get("ticker", "")
    briefs = inputs.get("coverage_brief", [])
    parents = [briefs[0].id] if briefs else []
    cik = cik_for_ticker(ticker, ctx, parents)
    submissions = json.loads(
        _cached_fetch(SUBMISSIONS_URL.format(cik=cik), ticker, ctx, parents)
    )
    recent = submissions.get("filings", {}).get("recent", {})
    forms = recent.get("form", [])
    target = None
    for idx, form in enumerate(forms):
        if form in ("10-K", "10-Q"):
            target = idx
            break
    if target is None:
        raise RunnerError(f"no 10-K or 10-Q found for {ticker}")
    accession = recent["accessionNumber"][target]
    document = recent["primaryDocument"][target]
    url = ARCHIVE_URL.format(
        cik=cik, accession_nodash=accession.replace("-", ""), document=document
    )
    raw_html = _cached_fetch(url, ticker, ctx, parents)
    raw_text = _strip_html(raw_html)
    payload = {
        "ticker": ticker,
        "form_type": forms[target],
        "accession": accession,
        "filing_date": recent["filingDate"][target],
        "period": recent.get("reportDate", [""] * len(forms))[target],
        "raw_text": raw_text,
        "sections": split_filing_sections(raw_text),
    }
    return [ArtifactDraft(category="filings", payload=payload, parents=tuple(parents))]
