"""Minimal NDJSON oracle: fixed scores, or softmax of an ILRC1 model over supplied features."""

import base64
import json
import sys

LABELS = ["alpha", "beta", "gamma"]


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "echo"
    print(json.dumps({"type": "hello", "labels": LABELS}), flush=True)
    for line in sys.stdin:
        req = json.loads(line)
        pixels = base64.b64decode(req["pixels"])
        if len(pixels) != req["width"] * req["height"] * 3:
            resp = {"id": req["id"], "error": "pixel count mismatch"}
        elif mode == "wrong_id":
            resp = {"id": req["id"] + 7, "scores": {"alpha": 1.0}}
        elif mode == "remote_error":
            resp = {"id": req["id"], "error": "model exploded"}
        else:
            mean = sum(pixels) / len(pixels) / 255.0
            resp = {"id": req["id"], "scores": {"alpha": mean, "beta": 1.0 - mean, "gamma": 0.0}}
        print(json.dumps(resp), flush=True)


if __name__ == "__main__":
    main()
