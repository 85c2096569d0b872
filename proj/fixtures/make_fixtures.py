"""Regenerates the checked-in test fixtures with numpy.

The C++ NPY reader/writer is tested against these files, so they are produced
by numpy's own writer rather than by the code under test. Sidecar JSON files
record shape and Frobenius norm as computed here.

    python3 fixtures/make_fixtures.py
"""

import json
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent


def save(path, array, sidecar=True):
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, array, allow_pickle=False)
    if sidecar:
        meta = {
            "shape": list(array.shape),
            "descr": array.dtype.str,
            "frobenius": float(np.linalg.norm(array.astype(np.float64))),
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


def header(descr, fortran, shape):
    d = "{'descr': '%s', 'fortran_order': %s, 'shape': %s, }" % (descr, fortran, shape)
    d += " " * (64 - (10 + len(d) + 1) % 64) + "\n"
    return b"\x93NUMPY\x01\x00" + len(d).to_bytes(2, "little") + d.encode("latin1")


def embeddings():
    rng = np.random.default_rng(20240607)
    out = ROOT / "embeddings"
    save(out / "concept_768x6.npy", rng.standard_normal((768, 6)))
    save(out / "concept_768x6_f4.npy", rng.standard_normal((768, 6)).astype("<f4"))
    save(out / "retain_768x5.npy", rng.standard_normal((768, 5)))
    save(out / "sigma_4_3.npy", np.diag([4.0, 3.0]))
    save(out / "vector_5.npy", np.arange(5, dtype="<f8") - 2.0)
    save(out / "zeros_1x1.npy", np.zeros((1, 1)))


def malformed():
    out = ROOT / "malformed"
    out.mkdir(parents=True, exist_ok=True)
    good = np.arange(6, dtype="<f8").reshape(3, 2)
    payload = good.tobytes()

    np.save(out / "big_endian.npy", good.astype(">f8"))
    np.save(out / "int32.npy", good.astype("<i4"))
    np.save(out / "fortran_order.npy", np.asfortranarray(np.arange(6.0).reshape(2, 3)))
    np.save(out / "rank3.npy", np.zeros((2, 2, 2)))

    (out / "bad_magic.npy").write_bytes(b"\x93NUMPX" + header("<f8", False, (3, 2))[6:] + payload)
    (out / "version2.npy").write_bytes(b"\x93NUMPY\x02\x00" + header("<f8", False, (3, 2))[8:] + payload)
    (out / "truncated.npy").write_bytes(header("<f8", False, (3, 2)) + payload[:-8])
    (out / "extra_bytes.npy").write_bytes(header("<f8", False, (3, 2)) + payload + b"\x00" * 8)


def tiny_bundle():
    rng = np.random.default_rng(7)
    out = ROOT / "bundles" / "tiny768"
    out.mkdir(parents=True, exist_ok=True)
    tensors = [
        ("blocks.0.attn2.to_k.weight", (8, 768), "editable"),
        ("blocks.0.attn2.to_v.weight", (8, 768), "editable"),
        ("blocks.0.attn1.to_q.weight", (8, 8), "frozen"),
    ]
    lines = ["# Synthetic 768-dimensional bundle for end-to-end tests", "total_param_count 20000"]
    for name, shape, flag in tensors:
        np.save(out / f"{name}.npy", rng.standard_normal(shape) / np.sqrt(shape[1]))
        lines.append(f"tensor {name} {shape[0]} {shape[1]} {flag}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def sd14_manifest():
    # Cross-attention (attn2) key/value projections of the SD-v1.4 UNet. Each
    # maps the 768-wide CLIP text embedding to the block's channel width.
    blocks = []
    for i, ch in enumerate([320, 640, 1280]):
        blocks += [(f"down_blocks.{i}.attentions.{j}", ch) for j in range(2)]
    blocks.append(("mid_block.attentions.0", 1280))
    for i, ch in zip([1, 2, 3], [1280, 640, 320]):
        blocks += [(f"up_blocks.{i}.attentions.{j}", ch) for j in range(3)]
    assert len(blocks) == 16

    total = 859_520_964  # UNet2DConditionModel parameter count for SD-v1.x
    lines = [
        "# SD-v1.4 UNet cross-attention key/value projections (16 blocks x {to_k, to_v}).",
        "# total_param_count is the full UNet parameter count.",
        f"total_param_count {total}",
    ]
    editable = 0
    for prefix, ch in blocks:
        for proj in ("to_k", "to_v"):
            lines.append(f"tensor {prefix}.transformer_blocks.0.attn2.{proj}.weight {ch} 768 editable")
            editable += ch * 768
    (ROOT / "sd14_cross_attention.manifest").write_text("\n".join(lines) + "\n")
    print(f"sd14 editable {editable} / {total} = {100 * editable / total:.4f}%")


def sweeps():
    out = ROOT / "sweeps"
    out.mkdir(parents=True, exist_ok=True)
    configs = {
        "disjoint.json": {"d": 16, "k_f": 4, "k_r": 4, "overlap": 0, "seed": 7},
        "overlap.json": {"d": 16, "k_f": 4, "k_r": 4, "overlap": 2, "seed": 7},
        "full_overlap.json": {"d": 8, "k_f": 2, "k_r": 2, "overlap": 2, "seed": 7},
    }
    for name, cfg in configs.items():
        (out / name).write_text(json.dumps(cfg, indent=2) + "\n")


def jobs():
    out = ROOT / "jobs"
    out.mkdir(parents=True, exist_ok=True)
    job = {
        "forget": [{"path": "../embeddings/concept_768x6.npy", "label": "concept"}],
        "retain": ["../embeddings/retain_768x5.npy"],
        "alpha": 2,
        "mode": "stacked",
        "weights_in": "../bundles/tiny768",
        "weights_out": "out/tiny768_edited",
        "report_out": "out/tiny768_report.json",
    }
    (out / "tiny768.json").write_text(json.dumps(job, indent=2) + "\n")


if __name__ == "__main__":
    embeddings()
    malformed()
    tiny_bundle()
    sd14_manifest()
    sweeps()
    jobs()
