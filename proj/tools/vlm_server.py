#!/usr/bin/env python3
"""HTTP bridge that serves a published CLIP checkpoint to the real-vlm encoder.

Requires torch and transformers. Start it, then point encoder.endpoint at it:

    python3 tools/vlm_server.py --port 8765
    zeroforge --set encoder.kind=real-vlm --set encoder.checkpoint=openai/clip-vit-base-patch32 ...

Images arrive planar (3 x R x R) in [0, 1]; the CLIP pixel normalization is
applied here so gradients flow back to the raw pixels.
"""

import argparse
import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch
from transformers import CLIPModel, CLIPTokenizer

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


class ContextOverflow(Exception):
    def __init__(self, prompt, tokens, limit):
        super().__init__(prompt)
        self.prompt, self.tokens, self.limit = prompt, tokens, limit


def _features(out):
    # Older transformers return the projected tensor; newer ones wrap it in pooler_output.
    return out if torch.is_tensor(out) else out.pooler_output


class Clip:
    def __init__(self, checkpoint, device):
        self.device = device
        self.model = CLIPModel.from_pretrained(checkpoint).to(device).eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        self.tokenizer = CLIPTokenizer.from_pretrained(checkpoint)
        self.resolution = self.model.config.vision_config.image_size
        self.context_limit = self.model.config.text_config.max_position_embeddings
        self.width = self.model.config.projection_dim
        self.mean = torch.tensor(CLIP_MEAN, device=device).view(1, 3, 1, 1)
        self.std = torch.tensor(CLIP_STD, device=device).view(1, 3, 1, 1)
        digest = hashlib.sha256()
        for name, t in sorted(self.model.state_dict().items()):
            digest.update(name.encode())
            digest.update(t.detach().cpu().contiguous().numpy().tobytes())
        self.checksum = digest.hexdigest()[:16]

    def encode_text(self, prompts):
        for p in prompts:
            n = len(self.tokenizer(p, truncation=False)["input_ids"])
            if n > self.context_limit:
                raise ContextOverflow(p, n, self.context_limit)
        batch = self.tokenizer(prompts, padding=True, return_tensors="pt").to(self.device)
        with torch.no_grad():
            e = _features(self.model.get_text_features(**batch))
        return torch.nn.functional.normalize(e.double(), dim=-1)

    def _pixels(self, images, resolution):
        if resolution != self.resolution:
            raise ValueError(f"expected {self.resolution} px images, got {resolution}")
        x = torch.tensor(images, dtype=torch.float32, device=self.device)
        return x.view(-1, 3, resolution, resolution)

    def _embed(self, pixels):
        e = _features(self.model.get_image_features(pixel_values=(pixels - self.mean) / self.std))
        return torch.nn.functional.normalize(e, dim=-1)

    def encode_image(self, images, resolution):
        with torch.no_grad():
            return self._embed(self._pixels(images, resolution)).double()

    def encode_image_vjp(self, images, resolution, grad):
        pixels = self._pixels(images, resolution).requires_grad_(True)
        e = self._embed(pixels)
        g = torch.tensor(grad, dtype=e.dtype, device=self.device)
        (gp,) = torch.autograd.grad(e, pixels, grad_outputs=g)
        return gp.double().reshape(len(images), -1)


class Handler(BaseHTTPRequestHandler):
    clip = None
    device = "cpu"
    lock = threading.Lock()

    def log_message(self, fmt, *args):
        pass

    def _reply(self, status, body):
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        try:
            req = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))))
            with Handler.lock:
                self._reply(200, self._dispatch(req))
        except ContextOverflow as e:
            self._reply(422, {"error": "context_overflow", "prompt": e.prompt, "tokens": e.tokens, "limit": e.limit})
        except Exception as e:  # reported to the client as an HTTP 500 body
            self._reply(500, {"error": f"{type(e).__name__}: {e}"})

    def _dispatch(self, req):
        if self.path == "/load":
            Handler.clip = Clip(req["checkpoint"], Handler.device)
            c = Handler.clip
            return {"embedding_width": c.width, "image_resolution": c.resolution,
                    "context_limit": c.context_limit, "checksum": c.checksum}
        c = Handler.clip
        if c is None:
            raise RuntimeError("no checkpoint loaded; POST /load first")
        if self.path == "/encode_text":
            return {"embeddings": c.encode_text(req["prompts"]).tolist()}
        if self.path == "/encode_image":
            return {"embeddings": c.encode_image(req["images"], req["resolution"]).tolist()}
        if self.path == "/encode_image_vjp":
            return {"grad_images": c.encode_image_vjp(req["images"], req["resolution"], req["grad"]).tolist()}
        raise RuntimeError(f"unknown route {self.path}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8765)
    ap.add_argument("--device", default="cuda" if torch.cuda.is_available() else "cpu")
    args = ap.parse_args()
    Handler.device = args.device
    server = ThreadingHTTPServer((args.host, args.port), Handler)
    print(f"serving on http://{args.host}:{args.port} ({args.device})", flush=True)
    server.serve_forever()


if __name__ == "__main__":
    main()
