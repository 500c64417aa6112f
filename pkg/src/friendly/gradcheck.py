"""Central finite-difference checks for every primitive and both training losses."""

import time

import numpy as np

from .autodiff import ops
from .autodiff.tape import Tape
from .engines import ct_loss, nft_loss
from .models import FC_B_WIDTHS, AuxNetSpec, ClassifierSpec, build_auxiliary, build_classifier

STEP = 1e-5
TOLERANCE = 1e-4


def relative_error(analytic, numeric):
    """Max absolute deviation divided by the largest gradient magnitude (floored at 1e-8)."""
    a, n = np.asarray(analytic, float), np.asarray(numeric, float)
    if a.size == 0:
        return 0.0
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n)) / scale)


def check(fn, arrays, seed=0, h=STEP):
    """Relative error between tape gradients and central differences.

    ``fn`` maps a dict of tensors (or arrays) to an output tensor; a fixed
    random projection turns non-scalar outputs into a scalar root.
    """
    arrays = {k: np.array(v, dtype=np.float64) for k, v in arrays.items()}
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in arrays.items()}
    out = fn(leaves)
    proj = np.random.default_rng([seed, 99]).normal(size=out.shape)
    root = ops.sum(ops.mul(out, proj))
    analytic = dict(zip(leaves, tape.grad(root, list(leaves.values()))))

    def value():
        return float(np.sum(fn(arrays).data * proj))

    a_all, n_all = [], []
    for k, arr in arrays.items():
        numeric = np.zeros_like(arr)
        flat, nflat = arr.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = value()
            flat[i] = orig - h
            fm = value()
            flat[i] = orig
            nflat[i] = (fp - fm) / (2 * h)
        a_all.append(analytic[k].ravel())
        n_all.append(numeric.ravel())
    # one scale per case: a parameter whose true gradient is zero (a bias
    # feeding batch norm) must not turn finite-difference noise into a failure
    return relative_error(np.concatenate(a_all), np.concatenate(n_all))


# ------------------------------------------------------------------- cases

def _primitive_cases(rng, seed):
    n = rng.normal
    pad = seed % 2
    cases = {
        "matmul": ({"a": n(size=(3, 4)), "b": n(size=(4, 2))}, lambda t: ops.matmul(t["a"], t["b"])),
        "add": ({"x": n(size=(4, 3)), "b": n(size=3)}, lambda t: ops.add(t["x"], t["b"])),
        "tanh": ({"x": n(size=(4, 5))}, lambda t: ops.tanh(t["x"])),
        "relu": ({"x": n(size=(4, 5))}, lambda t: ops.relu(t["x"])),
        "softmax": ({"x": n(size=(3, 5))}, lambda t: ops.softmax(t["x"])),
        "conv2d": ({"x": n(size=(2, 2, 5, 5)), "w": n(size=(3, 2, 3, 3)), "b": n(size=3)},
                   lambda t: ops.conv2d(t["x"], t["w"], t["b"], padding=pad)),
        "maxpool2d": ({"x": n(size=(2, 2, 4, 5))}, lambda t: ops.maxpool2d(t["x"])),
        "batchnorm1d": ({"x": n(size=(6, 4)), "g": n(size=4), "b": n(size=4)},
                        lambda t: ops.batchnorm1d(t["x"], t["g"], t["b"], train=True)),
        "dropout": ({"x": n(size=(4, 5))}, lambda t: ops.dropout(t["x"], 0.3, True, (seed, 7))),
        "square": ({"x": n(size=(4, 5))}, lambda t: ops.square(t["x"])),
        "sum": ({"x": n(size=(3, 4))}, lambda t: ops.sum(t["x"], axis=seed % 2)),
        "mean": ({"x": n(size=(3, 4))}, lambda t: ops.mean(t["x"], axis=1 - seed % 2)),
        "concat": ({"a": n(size=(2, 3)), "b": n(size=(2, 2))},
                   lambda t: ops.concat([t["a"], t["b"]], axis=1)),
        "sub": ({"a": n(size=(4, 3)), "b": n(size=(1, 3))}, lambda t: ops.sub(t["a"], t["b"])),
        "mul": ({"a": n(size=(4, 3)), "b": n(size=(4, 3))}, lambda t: ops.mul(t["a"], t["b"])),
        "reshape": ({"x": n(size=(2, 6))}, lambda t: ops.reshape(t["x"], (3, 4))),
        "upsample2d": ({"x": n(size=(1, 2, 3, 3))}, lambda t: ops.upsample2d(t["x"])),
    }
    labels = rng.integers(0, 4, size=5)
    cases["cross_entropy"] = ({"z": 2 * n(size=(5, 4))}, lambda t: ops.cross_entropy(t["z"], labels))
    return cases


def _randomize(net, rng, scale=0.5):
    for p in net.params.params.values():
        p.value[...] = scale * rng.normal(size=p.value.shape)
    return net


def _bound(net, names_prefix, t):
    return {k[len(names_prefix):]: v for k, v in t.items() if k.startswith(names_prefix)}


def _fc_b_relu_margin(net, x, eps=1e-5):
    """Smallest |pre-activation| at any ReLU of an fc_b stack in train mode."""
    w = {k: p.value for k, p in net.params.params.items()}
    h, margin = x, np.inf
    for i in range(len(FC_B_WIDTHS)):
        h = h @ w[f"fc{i}.w"] + w[f"fc{i}.b"]
        h = (h - h.mean(0)) / np.sqrt(h.var(0) + eps) * w[f"bn{i}.gamma"] + w[f"bn{i}.beta"]
        margin = min(margin, np.abs(h).min())
        h = np.maximum(h, 0.0)
    return margin


def _network_cases(rng, seed):
    """Composite networks (each well under 500 parameters) and the two training losses."""
    d, c, b = 3, 3, 6
    x = rng.normal(size=(b, d))
    y = rng.integers(0, c, size=b)
    fc = _randomize(build_classifier(ClassifierSpec("fc_a", (d,), c, hidden=8), seed), rng)
    aux = _randomize(build_auxiliary(AuxNetSpec("fc_residual", (d,), hidden=6), [seed, 1]), rng)
    eta = float(rng.uniform(0.5, 2.0))

    img = rng.normal(size=(2, 1 * 6 * 6))
    cnn = build_classifier(ClassifierSpec("cnn_a", (1, 6, 6), 2, scale=0.1, dropout=0.2), seed)
    _randomize(cnn, rng)
    conv_aux = _randomize(build_auxiliary(
        AuxNetSpec("conv_bottleneck", (1, 4, 4), n_f=64, depth=1, scale=0.05), [seed, 2]), rng)
    img4 = rng.normal(size=(2, 16))
    fcb = build_classifier(ClassifierSpec("fc_b", (d,), c, scale=0.004), seed)
    _randomize(fcb, rng)
    # finite differences straddling a ReLU kink measure the kink, not the tape
    xb = x
    while _fc_b_relu_margin(fcb, xb) < 1e-3:
        xb = rng.normal(size=(b, d))

    def params(net, prefix):
        return {prefix + k: v.value.copy() for k, v in net.params.params.items()}

    cases = {
        "net:fc_tanh": (params(fc, "w:"), lambda t: fc.apply(_bound(fc, "w:", t), x)),
        "net:cnn": (params(cnn, "w:"),
                    lambda t: cnn.apply(_bound(cnn, "w:", t), img, True, (seed, 3))),
        "net:fc_batchnorm": (params(fcb, "w:"),
                             lambda t: fcb.apply(_bound(fcb, "w:", t), xb, True, (0,),
                                                 {k: v.copy() for k, v in fcb.params.buffers.items()})),
        "net:conv_aux": (params(conv_aux, "a:"),
                         lambda t: conv_aux.apply(_bound(conv_aux, "a:", t), img4)),
        "loss:ct": (params(fc, "w:"), lambda t: ct_loss(fc, x, y, _bound(fc, "w:", t))),
        "loss:nft_theta": (params(aux, "a:"),
                           lambda t: nft_loss(fc, aux, x, y, eta, None, _bound(aux, "a:", t))),
        "loss:nft_w": (params(fc, "w:"),
                       lambda t: nft_loss(fc, aux, x, y, eta, _bound(fc, "w:", t), None)),
        "loss:nft_penalty": (params(aux, "a:"), lambda t: ops.sub(
            nft_loss(fc, aux, x, y, eta, None, _bound(aux, "a:", t)),
            nft_loss(fc, aux, x, y, 0.0, None, _bound(aux, "a:", t)))),
    }
    for name, (arrays, _) in cases.items():
        assert sum(a.size for a in arrays.values()) <= 500, name
    return cases


def run_suite(seeds=range(20), h=STEP):
    """Worst relative error per check name over all ``seeds``."""
    worst = {}
    for seed in seeds:
        rng = np.random.default_rng([seed, 12345])
        cases = {**_primitive_cases(rng, seed), **_network_cases(rng, seed)}
        for name, (arrays, fn) in cases.items():
            worst[name] = max(worst.get(name, 0.0), check(fn, arrays, seed, h))
    return worst


def report(seed=0, n_seeds=20, tol=TOLERANCE, out=print):
    """Print one line per check; returns True when every check is within ``tol``."""
    t0 = time.perf_counter()
    worst = run_suite(range(seed, seed + n_seeds))
    ok = True
    for name, err in worst.items():
        passed = err < tol
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name:<20s} worst_rel_err={err:.3e}")
    out(f"{len(worst)} checks, {n_seeds} seeds, h={STEP}, tol={tol}, "
        f"{time.perf_counter() - t0:.1f}s")
    return ok
