"""Read-only static server exposing viewer bundles to the browser client.

Endpoints: GET /bundles (JSON list of bundle ids), GET /bundles/{id}/
manifest.json, GET /bundles/{id}/{file}.  CORS is wide open (local tool);
there are no write endpoints.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

_CONTENT_TYPES = {
    ".json": "application/json",
    ".png": "image/png",
    ".ppm": "image/x-portable-pixmap",
    ".csv": "text/csv",
}


def list_bundles(root: Path) -> list:
    return sorted(p.parent.name for p in root.glob("*/manifest.json"))


class BundleHandler(BaseHTTPRequestHandler):
    root: Path = Path(".")
    quiet: bool = True

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    def _send(self, code: int, body: bytes, ctype: str = "application/json"):
        self.send_response(code)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self._send(204, b"")

    def do_GET(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["bundles"]:
            body = json.dumps({"bundles": list_bundles(self.root)}).encode()
            self._send(200, body)
            return
        if len(parts) == 3 and parts[0] == "bundles":
            bundle, name = parts[1], parts[2]
            base = (self.root / bundle).resolve()
            target = (base / name).resolve()
            if (not base.is_dir() or not (base / "manifest.json").exists()
                    or base.parent != self.root.resolve()):
                self._send(404, json.dumps({"error": f"unknown bundle {bundle!r}"}).encode())
                return
            if target.parent != base or not target.is_file():
                self._send(404, json.dumps({"error": f"no file {name!r} in {bundle!r}"}).encode())
                return
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            self._send(200, target.read_bytes(), ctype)
            return
        self._send(404, json.dumps({"error": "not found"}).encode())


def make_server(bundle_dir, port: int = 0) -> ThreadingHTTPServer:
    handler = type("Handler", (BundleHandler,), {"root": Path(bundle_dir).resolve()})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(bundle_dir, port: int, quiet: bool = False):
    server = make_server(bundle_dir, port)
    server.RequestHandlerClass.quiet = quiet
    print(f"serving bundles from {bundle_dir} on http://127.0.0.1:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


def start_background(bundle_dir, port: int = 0):
    """Server on a daemon thread; returns (server, base_url). Used by tests."""
    server = make_server(bundle_dir, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_address[1]}"
