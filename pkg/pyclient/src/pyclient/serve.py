"""Reference external evaluator: line-delimited JSON over stdin/stdout.

Scores grid-index profiles with a coupled synthetic loss read from a spec
file, demonstrating how a real evaluation backend attaches to the
optimizer's subprocess protocol:

    parent: {"type": "init", "layers": [names...], "grid": [sparsities...]}
    child:  {"type": "ready", "layers": L, "levels": n}
    parent: {"type": "eval", "id": k, "choices": [int...]}
    child:  {"type": "loss", "id": k, "loss": float}
    parent: {"type": "close"}

One response line per request line, same id, in order; every response is
flushed immediately.  A malformed request is answered with
{"type": "error", "message": ...} and the loop keeps serving; a closed
output pipe or end of input ends the process cleanly.

The spec file is a JSON object with "amplitudes", "exponents", and
"couplings" arrays (couplings has one entry per consecutive layer pair);
other keys, such as the "seed" used by instance generators, are ignored
here.  Scoring is deterministic and single-threaded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

EXIT_OK = 0
EXIT_DATA = 65


class SpecError(ValueError):
    """The loss-spec file is missing, unreadable, or invalid."""


class LossModel:
    """Coupled synthetic loss over grid-index profiles.

    additive part: sum_l amplitudes[l] * (i_l / (n - 1))^exponents[l];
    coupling part: sum_l couplings[l] * i_l * i_{l+1} / (n - 1)^2 over
    consecutive layer pairs, where n is the grid size announced at init.
    The all-dense profile scores exactly 0.
    """

    def __init__(self, amplitudes, exponents, couplings):
        amps = [float(a) for a in amplitudes]
        exps = [float(p) for p in exponents]
        gammas = [float(g) for g in couplings]
        if len(amps) < 1 or len(exps) != len(amps):
            raise SpecError("amplitudes and exponents must have equal nonzero length")
        if len(gammas) != max(0, len(amps) - 1):
            raise SpecError("couplings must have one entry per consecutive layer pair")
        if any(not math.isfinite(a) or a < 0 for a in amps):
            raise SpecError("amplitudes must be >= 0 and finite")
        if any(p < 1 for p in exps):
            raise SpecError("exponents must be >= 1")
        if any(g < 0 for g in gammas):
            raise SpecError("couplings must be >= 0")
        self.amplitudes = tuple(amps)
        self.exponents = tuple(exps)
        self.couplings = tuple(gammas)

    @property
    def num_layers(self) -> int:
        return len(self.amplitudes)

    @classmethod
    def from_file(cls, path: str) -> "LossModel":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as e:
            raise SpecError(f"cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise SpecError(f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise SpecError(f"{path}: spec must be a JSON object")
        try:
            return cls(data["amplitudes"], data["exponents"], data.get("couplings", []))
        except KeyError as e:
            raise SpecError(f"{path}: missing key {e}") from e
        except (TypeError, ValueError) as e:
            raise SpecError(f"{path}: {e}") from e

    def loss(self, choices: list[int], num_levels: int) -> float:
        den = float(num_levels - 1)
        total = 0.0
        for amp, expo, idx in zip(self.amplitudes, self.exponents, choices):
            total += amp * (idx / den) ** expo
        pair = 0.0
        for gamma, left, right in zip(self.couplings, choices, choices[1:]):
            pair += gamma * left * right
        return total + pair / (den * den)


def _handle_init(model: LossModel, request: dict, prev_levels: int) -> tuple[dict, int]:
    layers = request.get("layers")
    grid = request.get("grid")
    if not isinstance(layers, list) or not all(isinstance(x, str) for x in layers):
        return {"type": "error", "message": "init.layers must be a list of layer names"}, prev_levels
    if (
        not isinstance(grid, list)
        or len(grid) < 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in grid)
    ):
        return {"type": "error", "message": "init.grid must list at least two sparsity levels"}, prev_levels
    if len(layers) != model.num_layers:
        return {
            "type": "error",
            "message": f"spec covers {model.num_layers} layers, init announced {len(layers)}",
        }, prev_levels
    return {"type": "ready", "layers": len(layers), "levels": len(grid)}, len(grid)


def _handle_eval(model: LossModel, request: dict, num_levels: int) -> dict:
    if num_levels == 0:
        return {"type": "error", "message": "eval received before init"}
    choices = request.get("choices")
    if (
        not isinstance(choices, list)
        or len(choices) != model.num_layers
        or not all(isinstance(c, int) and not isinstance(c, bool) for c in choices)
    ):
        return {
            "type": "error",
            "message": f"eval.choices must be {model.num_layers} integer grid indices",
        }
    if any(c < 0 or c >= num_levels for c in choices):
        return {"type": "error", "message": f"choices out of range for {num_levels} levels"}
    return {"type": "loss", "id": request.get("id"), "loss": model.loss(choices, num_levels)}


def serve(model: LossModel, stdin=None, stdout=None) -> int:
    """Answer protocol requests until close, end of input, or a broken pipe."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    num_levels = 0  # 0 until a valid init arrives
    try:
        for raw in stdin:
            if not raw.strip():
                continue
            try:
                request = json.loads(raw)
            except json.JSONDecodeError as e:
                request = None
                reply = {"type": "error", "message": f"unparseable request line: {e}"}
            if request is not None:
                if not isinstance(request, dict):
                    reply = {"type": "error", "message": "request must be a JSON object"}
                else:
                    kind = request.get("type")
                    if kind == "close":
                        break
                    if kind == "init":
                        reply, num_levels = _handle_init(model, request, num_levels)
                    elif kind == "eval":
                        reply = _handle_eval(model, request, num_levels)
                    else:
                        reply = {"type": "error", "message": f"unknown request type {kind!r}"}
            stdout.write(json.dumps(reply) + "\n")
            stdout.flush()
    except BrokenPipeError:
        pass  # the parent went away; nothing left to serve
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pyclient",
        description="Serve profile-loss requests over stdin/stdout from a loss-spec file.",
    )
    parser.add_argument("spec", help="loss spec JSON: amplitudes, exponents, couplings")
    args = parser.parse_args(argv)
    try:
        model = LossModel.from_file(args.spec)
    except SpecError as e:
        print(f"pyclient: {e}", file=sys.stderr)
        return EXIT_DATA
    return serve(model)


if __name__ == "__main__":
    sys.exit(main())
