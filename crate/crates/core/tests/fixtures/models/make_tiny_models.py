"""Builds the tiny ONNX backbones used by the extractor tests.

Run from this directory: python3 make_tiny_models.py
"""
import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper

rng = np.random.default_rng(20240501)
weights = rng.normal(0.0, 0.5, size=(4, 3, 3, 3)).astype(np.float32)
bias = rng.normal(0.0, 0.1, size=(4,)).astype(np.float32)


def conv_nodes(inp, out):
    return [
        helper.make_node("Conv", [inp, "w", "b"], ["conv"], pads=[1, 1, 1, 1]),
        helper.make_node("Relu", ["conv"], [out]),
    ]


def save(name, nodes, inputs, outputs):
    graph = helper.make_graph(
        nodes,
        name,
        inputs,
        outputs,
        initializer=[numpy_helper.from_array(weights, "w"), numpy_helper.from_array(bias, "b")],
    )
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])
    model.ir_version = 8
    onnx.checker.check_model(model)
    onnx.save(model, name)


nchw_in = helper.make_tensor_value_info("image", TensorProto.FLOAT, ["N", 3, 8, 8])

save(
    "tiny_featmap_nchw.onnx",
    conv_nodes("image", "features"),
    [nchw_in],
    [helper.make_tensor_value_info("features", TensorProto.FLOAT, ["N", 4, 8, 8])],
)

save(
    "tiny_pooled_nchw.onnx",
    conv_nodes("image", "relu")
    + [
        helper.make_node("GlobalAveragePool", ["relu"], ["gap"]),
        helper.make_node("Flatten", ["gap"], ["features"], axis=1),
    ],
    [nchw_in],
    [helper.make_tensor_value_info("features", TensorProto.FLOAT, ["N", 4])],
)

save(
    "tiny_featmap_nhwc.onnx",
    [helper.make_node("Transpose", ["image"], ["chw"], perm=[0, 3, 1, 2])]
    + conv_nodes("chw", "relu")
    + [helper.make_node("Transpose", ["relu"], ["features"], perm=[0, 2, 3, 1])],
    [helper.make_tensor_value_info("image", TensorProto.FLOAT, ["N", 8, 8, 3])],
    [helper.make_tensor_value_info("features", TensorProto.FLOAT, ["N", 8, 8, 4])],
)


# Reference features under scale_pm1 preprocessing, computed with a direct
# numpy convolution: line 1 for an 8x8 RGB test pattern, line 2 for an
# all-black 8x8 frame. The Rust tests compare the extractor's pooled output
# against these values.
def pattern():
    y, x, c = np.meshgrid(np.arange(8), np.arange(8), np.arange(3), indexing="ij")
    return ((x * 31 + y * 17 + c * 5) % 256).astype(np.float32)


def reference_features(img_hwc):
    chw = np.transpose(img_hwc / 127.5 - 1.0, (2, 0, 1))
    padded = np.pad(chw, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((4, 8, 8), dtype=np.float64)
    for o in range(4):
        for i in range(8):
            for j in range(8):
                out[o, i, j] = np.sum(padded[:, i : i + 3, j : j + 3] * weights[o]) + bias[o]
    return np.maximum(out, 0.0).mean(axis=(1, 2))


with open("tiny_reference_features.txt", "w") as f:
    for img in (pattern(), np.zeros((8, 8, 3), dtype=np.float32)):
        f.write(" ".join(f"{v:.9e}" for v in reference_features(img)) + "\n")
