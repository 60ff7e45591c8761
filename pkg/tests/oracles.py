"""Slow, loop-based reference implementations used as test oracles."""

import math

import numpy as np


def matmul_loops(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i, j] += a[i, t] * b[t, j]
    return out


def conv2d_loops(x, w, bias=None, stride=1, padding=0):
    c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    xp = np.zeros((c_in, h + 2 * padding, wd + 2 * padding))
    xp[:, padding : padding + h, padding : padding + wd] = x
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0 if bias is None else bias[o]
                for c in range(c_in):
                    for u in range(k):
                        for v in range(k):
                            acc += xp[c, i * stride + u, j * stride + v] * w[o, c, u, v]
                out[o, i, j] = acc
    return out


def conv_transpose2d_loops(x, w, bias=None, stride=1, padding=0, output_padding=0):
    """Scatter-add definition; ``w`` is ``C_in x C_out x k x k``."""
    c_in, h, wd = x.shape
    _, c_out, k, _ = w.shape
    full_h = (h - 1) * stride + k + output_padding
    full_w = (wd - 1) * stride + k + output_padding
    canvas = np.zeros((c_out, full_h, full_w))
    for c in range(c_in):
        for i in range(h):
            for j in range(wd):
                for o in range(c_out):
                    for u in range(k):
                        for v in range(k):
                            canvas[o, i * stride + u, j * stride + v] += x[c, i, j] * w[c, o, u, v]
    ho = (h - 1) * stride - 2 * padding + k + output_padding
    wo = (wd - 1) * stride - 2 * padding + k + output_padding
    out = canvas[:, padding : padding + ho, padding : padding + wo]
    if bias is not None:
        out = out + np.asarray(bias)[:, None, None]
    return out


def layer_norm_two_pass(x, gamma, beta, eps):
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def softmax_direct(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def gelu_scalar(x):
    return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))


def depth_metrics_loop(pred_depth, gt, mask):
    rel, sq, sqlog, l10 = [], [], [], []
    acc = [0, 0, 0]
    n = 0
    for y in range(gt.shape[0]):
        for x in range(gt.shape[1]):
            if not mask[y, x]:
                continue
            p, g = float(pred_depth[y, x]), float(gt[y, x])
            n += 1
            rel.append(abs(p - g) / g)
            # squares by multiplication: libm pow(x, 2) is not always correctly rounded
            sq.append((p - g) * (p - g))
            # elementwise logs come from numpy's scalar ufuncs; everything else is plain Python
            dl = float(np.log(p) - np.log(g))
            sqlog.append(dl * dl)
            l10.append(abs(float(np.log10(p) - np.log10(g))))
            d = max(p / g, g / p)
            for k in range(3):
                if d < 1.25 ** (k + 1):
                    acc[k] += 1
    return {
        "abs_rel": math.fsum(rel) / n,
        "rmse": math.sqrt(math.fsum(sq) / n),
        "rmse_log": math.sqrt(math.fsum(sqlog) / n),
        "log10": math.fsum(l10) / n,
        "delta_acc": [a / n for a in acc],
    }


def seg_metrics_sets(pred, gt, num_classes, ignore_label=255):
    keep = {(y, x) for y in range(gt.shape[0]) for x in range(gt.shape[1]) if gt[y, x] != ignore_label}
    correct = sum(1 for (y, x) in keep if pred[y, x] == gt[y, x])
    ious = []
    for c in range(num_classes):
        p = {q for q in keep if pred[q] == c}
        g = {q for q in keep if gt[q] == c}
        union = p | g
        ious.append(len(p & g) / len(union) if union else float("nan"))
    valid = [v for v in ious if not math.isnan(v)]
    return correct / len(keep), math.fsum(valid) / len(valid), ious


def whdr_enumerate(pred, pairs, margin):
    wrong = 0
    for a, b, rel in pairs:
        pa, pb = pred[a], pred[b]
        if pa / pb > 1 + margin:
            got = "a_closer"
        elif pb / pa > 1 + margin:
            got = "b_closer"
        else:
            got = "equal"
        wrong += got != rel
    return wrong / len(pairs)
