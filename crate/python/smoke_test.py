#!/usr/bin/env python3
"""Exercise the gaitedge_py extension end to end.

Loads the cdylib straight out of target/ (no install step), renders a
walker, and checks the operator identities that hold exactly:
decomposition is disjoint, compositing a mask with itself is the identity,
the synthesis gradient is the edge mask, uniform-0.5 BCE is ln 2.

Build first:  cargo build -p gaitedge-py
Then run:     python3 python/smoke_test.py
"""

import math
import sys
from importlib.machinery import ExtensionFileLoader
from importlib.util import module_from_spec, spec_from_loader
from pathlib import Path


def load_module():
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "release" / "libgaitedge_py.so",
        root / "target" / "debug" / "libgaitedge_py.so",
    ]
    for so in candidates:
        if so.exists():
            loader = ExtensionFileLoader("gaitedge_py", str(so))
            spec = spec_from_loader("gaitedge_py", loader)
            mod = module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit("no libgaitedge_py.so under target/; run `cargo build -p gaitedge-py` first")


def main():
    ge = load_module()

    frame = ge.walker_frame(1.3)
    assert (frame.height, frame.width) == (80, 60), frame
    assert frame.kind == "binary" and frame.count_foreground() > 0, frame

    edge, interior = ge.preprocess(frame, se_size=3)
    overlap = sum(e * i for e, i in zip(edge.values, interior.values))
    assert overlap == 0.0, "edge and interior must be disjoint"
    grown = ge.dilate(frame, se_size=3)
    union = [max(e, i) for e, i in zip(edge.values, interior.values)]
    assert union == grown.values, "edge | interior must equal the dilation"

    prob = ge.Grid.float(frame.height, frame.width, frame.values)
    synth = ge.synthesize(edge, interior, prob)
    assert synth.composite.values == frame.values, "self-composite must be the identity"

    upstream = [0.5] * (frame.height * frame.width)
    grad = synth.backward(upstream)
    assert grad == [0.5 * e for e in edge.values], "gradient must be gated by the edge band"

    half = ge.Grid.float(frame.height, frame.width, [0.5] * (frame.height * frame.width))
    loss, bce_grad = ge.bce_loss(half, frame)
    assert abs(loss - math.log(2.0)) < 1e-12, loss
    assert len(bce_grad) == frame.height * frame.width
    assert ge.joint_loss(1.0, 2.0, lambda_seg=10.0) == 12.0

    aligned, ctx = ge.gait_align(prob)
    assert (aligned.height, aligned.width) == (64, 44), aligned
    mask = aligned.binarized()
    assert any(mask.get(0, c) == 1.0 for c in range(44)), "body must reach the top row"
    assert any(mask.get(63, c) == 1.0 for c in range(44)), "body must reach the bottom row"
    back = ctx.backward([1.0] * (64 * 44))
    assert len(back) == frame.height * frame.width
    assert any(v != 0.0 for v in back), "alignment must route gradient to the input"

    seq = ge.walker_sequence(12)
    aligned_seq = [ge.gait_align(ge.Grid.float(f.height, f.width, f.values))[0] for f in seq]
    energy = ge.gei(aligned_seq)
    assert (energy.height, energy.width) == (64, 44)
    assert all(0.0 <= v <= 1.0 for v in energy.values)
    assert ge.distance(energy, energy) == 0.0

    shifted = ge.disturb(frame, seed=9, max_offset=4)
    assert shifted.values == ge.disturb(frame, seed=9, max_offset=4).values
    assert (shifted.height, shifted.width) == (frame.height, frame.width)

    small = ge.size_normalize(frame, height=32, width=24)
    assert (small.height, small.width) == (32, 24)

    try:
        ge.Grid.binary(1, 2, [0.5, 1.0])
        raise SystemExit("binary grid accepted a non-binary value")
    except ValueError:
        pass

    print("smoke test passed")


if __name__ == "__main__":
    main()
