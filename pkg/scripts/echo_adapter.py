#!/usr/bin/env python3
"""Reference implementation of the external authority-adapter protocol.

Listens on a TCP port, reads one JSON request per line, and answers with a
constant authority chunk. Plug a trained model in by replacing `decide`.

    python3 scripts/echo_adapter.py --port 7801 --alpha 0.3 &
    python3 -m vesselsim run --set policy.id=external --set policy.adapter_port=7801
"""

import argparse
import json
import socketserver

CHUNK_SIZE = 5


def decide(request: dict, alpha: float) -> dict:
    """Map one request to a chunk reply. Swap in a real model here.

    Request: {tick, safety: {d_min, iou, curvature, bifurcation_dist},
              intent: [{f, df, sigma} x 2], goal_dist}
    Reply:   {chunk: [[alpha_left, alpha_right] x C]}, entries in [0, 0.9].
    """
    return {"chunk": [[alpha, alpha]] * CHUNK_SIZE}


class Handler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                return
            try:
                request = json.loads(line)
            except json.JSONDecodeError:
                return
            reply = decide(request, self.server.alpha)
            self.wfile.write((json.dumps(reply) + "\n").encode())
            self.wfile.flush()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7801)
    parser.add_argument("--alpha", type=float, default=0.3)
    args = parser.parse_args()

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    server = Server((args.host, args.port), Handler)
    server.alpha = args.alpha
    print(f"authority adapter on {args.host}:{args.port}, constant alpha {args.alpha}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
