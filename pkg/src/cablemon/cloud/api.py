"""Read-only JSON query API.

Routing is a plain function of (path, query) so it can be tested without a
socket; :class:`ApiServer` puts it behind ``http.server``.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import threading
import urllib.parse
from datetime import datetime, timezone
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..edge.store import TimeSeriesStore
from .service import CloudService

log = logging.getLogger(__name__)

DEFAULT_PAGE = 100
MAX_PAGE = 1000


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def iso(t: float) -> str:
    return datetime.fromtimestamp(t, timezone.utc).isoformat().replace("+00:00", "Z")


def parse_time(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ApiError(400, f"{name}: not an ISO-8601 time or epoch seconds") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def encode_cursor(offset: int) -> str:
    return base64.urlsafe_b64encode(json.dumps({"o": offset}).encode()).decode().rstrip("=")


def decode_cursor(cursor: str) -> int:
    try:
        raw = base64.urlsafe_b64decode(cursor + "=" * (-len(cursor) % 4))
        offset = json.loads(raw)["o"]
    except (binascii.Error, ValueError, KeyError, TypeError):
        raise ApiError(400, "cursor: malformed") from None
    if not isinstance(offset, int) or offset < 0:
        raise ApiError(400, "cursor: malformed")
    return offset


def _page(items: list, query: dict[str, str]) -> dict:
    try:
        limit = int(query.get("limit", DEFAULT_PAGE))
    except ValueError:
        raise ApiError(400, "limit: not an integer") from None
    if not 1 <= limit <= MAX_PAGE:
        raise ApiError(400, f"limit: must be in [1, {MAX_PAGE}]")
    start = decode_cursor(query["cursor"]) if "cursor" in query else 0
    chunk = items[start : start + limit]
    nxt = start + limit if start + limit < len(items) else None
    return {"items": chunk, "next_cursor": encode_cursor(nxt) if nxt is not None else None}


def _event_doc(se) -> dict:
    doc = se.to_json()
    doc["time"] = iso(se.event.time)
    doc["ingest_time"] = iso(se.ingest_time)
    return doc


def _kpi_doc(snap) -> dict:
    doc = snap.to_json()
    doc["time"] = iso(snap.time)
    return doc


class Api:
    def __init__(self, service: CloudService, records: TimeSeriesStore | None = None):
        self.service = service
        self.records = records

    def handle(self, method: str, target: str) -> tuple[int, dict]:
        try:
            if method != "GET":
                raise ApiError(405, f"{method} not allowed")
            url = urllib.parse.urlsplit(target)
            query = dict(urllib.parse.parse_qsl(url.query, keep_blank_values=True))
            parts = [urllib.parse.unquote(p) for p in url.path.split("/") if p]
            return 200, self._route(parts, query)
        except ApiError as exc:
            return exc.status, {"error": exc.message, "status": exc.status}

    def _route(self, parts: list[str], query: dict[str, str]) -> dict:
        match parts:
            case ["health"]:
                return {"status": "ok", "events": len(self.service.events()), "circuits": len(self.service.circuits)}
            case ["circuits"]:
                return {"circuits": [self._circuit(cid) for cid in sorted(self.service.circuits)]}
            case ["circuits", cid, "kpi"]:
                if cid not in self.service.circuits:
                    raise ApiError(404, f"unknown circuit {cid}")
                since = parse_time(query["since"], "since") if "since" in query else None
                return _page([_kpi_doc(s) for s in self.service.kpi_history(cid, since)], query)
            case ["alarms"]:
                since = parse_time(query["since"], "since") if "since" in query else None
                severity = query.get("severity")
                if severity is not None and severity not in ("INFO", "WARNING", "CRITICAL"):
                    raise ApiError(400, f"severity: unknown value {severity!r}")
                priority = query.get("priority")
                items = self.service.alarms(since, severity, priority)
                return _page([_event_doc(se) for se in items], query)
            case ["records", imu]:
                return self._records(imu, query)
        raise ApiError(404, "no such endpoint")

    def _circuit(self, cid: str) -> dict:
        snap, rec = self.service.latest(cid)
        return {
            "id": cid,
            "rated_current_a": self.service.circuits[cid].rated_current_a,
            "kpi": _kpi_doc(snap) if snap else None,
            "recommendation": rec.to_json() | {"time": iso(rec.time)} if rec else None,
        }

    def _records(self, imu: str, query: dict[str, str]) -> dict:
        if self.records is None or not self.records.series(f"{imu}/"):
            raise ApiError(404, f"unknown imu {imu}")
        metric = query.get("metric")
        if not metric:
            raise ApiError(400, "metric: required")
        t1 = parse_time(query["from"], "from") if "from" in query else float("-inf")
        t2 = parse_time(query["to"], "to") if "to" in query else float("inf")
        if t1 >= t2:
            raise ApiError(400, "from must be earlier than to")
        series = f"{imu}/{metric}"
        if series not in self.records.series(series):
            raise ApiError(404, f"unknown metric {metric} for imu {imu}")
        rows = [{"time": iso(t), "value": v} for t, v in self.records.query(series, t1, t2) if isinstance(v, float)]
        return _page(rows, query) | {"imu": imu, "metric": metric}


def http_api(api: Api, method: str, target: str) -> tuple[int, dict]:
    return api.handle(method, target)


class _Handler(BaseHTTPRequestHandler):
    api: Api

    def do_GET(self) -> None:
        self._respond(*self.api.handle("GET", self.path))

    def do_POST(self) -> None:
        self._respond(*self.api.handle("POST", self.path))

    def _respond(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode()
        self.send_response(status, HTTPStatus(status).phrase)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s " + fmt, self.address_string(), *args)


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], api: Api):
        handler = type("Handler", (_Handler,), {"api": api})
        super().__init__(address, handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
