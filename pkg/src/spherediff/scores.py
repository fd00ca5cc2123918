"""Score-function providers.

An analytic vMF-mixture score serves as ground truth on synthetic data;
a small fully-connected network with manual backpropagation stands in
for a learned score. The network regresses onto the conditional score
kappa_t (I - z z^T) x of the one-shot corruption z ~ vMF(x, kappa_t)
and supports squared-error, cosine, and geodesic objectives.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMixture, NonFiniteLoss, ZeroVector
from .geometry import geodesic_angle, tangent_project
from .vmf import ambient_score, mixture_score

_VEC_EPS = 1e-12
_COS_CLIP = 1e-12

WEIGHTS_FORMAT = "spherediff-weights"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class MixtureSpec:
    """Per-class vMF components with mixture weights."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        if len(self.components) == 0:
            raise EmptyMixture("mixture needs at least one component")
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))
        if w.shape != (len(self.components),):
            raise ValueError("one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")

    def check_margin(self, margin):
        """Verify pairwise angular separation of the component means."""
        mus = np.stack([c.mu for c in self.components])
        for i in range(len(mus)):
            for j in range(i + 1, len(mus)):
                ang = float(geodesic_angle(mus[i], mus[j]))
                if ang < margin:
                    raise ValueError(
                        f"component means {i},{j} separated by {ang:.3f} < {margin:.3f}"
                    )
        return True

    @classmethod
    def equal_weights(cls, components):
        k = len(components)
        return cls(tuple(components), np.full(k, 1.0 / k))


class AnalyticVmfScore:
    """Ambient score of a vMF mixture; conditional on a class when given.

    Call as model(z, t, y). The time index is ignored (the target
    density is static); y may be None (mixture score), an int, or a
    per-row integer array for batched states.
    """

    def __init__(self, spec):
        self.spec = spec
        self._grads = np.stack([ambient_score(c) for c in spec.components])

    def __call__(self, z, t=None, y=None):
        z = np.asarray(z, dtype=float)
        if y is None:
            return mixture_score(
                z, self.spec.components, self.spec.weights, tangent=False
            )
        y = np.asarray(y)
        if y.ndim == 0:
            grad = self._grads[int(y)]
            return np.broadcast_to(grad, z.shape).copy()
        return self._grads[y.astype(int)]


# ------------------------------------------------------------------ losses


def _as_pair(pred, target):
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return p, t


def loss_mse(pred, target):
    """Squared Euclidean distance ||pred - target||^2."""
    p, t = _as_pair(pred, target)
    return float(np.sum((p - t) ** 2))


def loss_cosine(pred, target):
    """1 - cos(pred, target) after normalizing both; range [0, 2]."""
    p, t = _as_pair(pred, target)
    np_, nt = np.linalg.norm(p), np.linalg.norm(t)
    if np_ <= _VEC_EPS or nt <= _VEC_EPS:
        raise ZeroVector("cosine loss needs nonzero vectors")
    return float(1.0 - np.dot(p, t) / (np_ * nt))


def loss_geodesic(pred, target):
    """Squared angle arccos^2 of the normalized dot; range [0, pi^2]."""
    p, t = _as_pair(pred, target)
    np_, nt = np.linalg.norm(p), np.linalg.norm(t)
    if np_ <= _VEC_EPS or nt <= _VEC_EPS:
        raise ZeroVector("geodesic loss needs nonzero vectors")
    c = np.clip(np.dot(p, t) / (np_ * nt), -1.0, 1.0)
    return float(np.arccos(c) ** 2)


def _batch_loss_grad(kind, pred, target):
    """Mean loss over a batch and its gradient w.r.t. pred."""
    b = pred.shape[0]
    if kind == "mse":
        diff = pred - target
        return float(np.mean(np.sum(diff * diff, axis=1))), 2.0 * diff / b
    pn = np.linalg.norm(pred, axis=1, keepdims=True)
    tn = np.linalg.norm(target, axis=1, keepdims=True)
    if np.any(pn <= _VEC_EPS) or np.any(tn <= _VEC_EPS):
        raise ZeroVector("angular losses need nonzero vectors")
    u = pred / pn
    v = target / tn
    c = np.sum(u * v, axis=1, keepdims=True)
    dcos_dpred = (v - c * u) / pn
    if kind == "cosine":
        return float(np.mean(1.0 - c)), -dcos_dpred / b
    if kind == "geodesic":
        cc = np.clip(c, -1.0 + _COS_CLIP, 1.0 - _COS_CLIP)
        ang = np.arccos(cc)
        dl_dc = -2.0 * ang / np.sqrt(1.0 - cc * cc)
        return float(np.mean(ang**2)), dl_dc * dcos_dpred / b
    raise ValueError(f"unknown loss kind {kind!r}")


# ------------------------------------------------------------- score net


class MlpScoreNet:
    """Small MLP score model with learned time and class embeddings.

    Input is [z, t_embed[t], y_embed[y]]; hidden layers use tanh (or
    identity for a purely linear map). All parameters live in float64
    numpy arrays and gradients are computed by hand.
    """

    def __init__(
        self,
        dim,
        num_steps,
        num_classes,
        hidden=(128, 128),
        t_embed_dim=16,
        y_embed_dim=8,
        activation="tanh",
        seed=0,
    ):
        if activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        self.dim = int(dim)
        self.num_steps = int(num_steps)
        self.num_classes = int(num_classes)
        self.hidden = tuple(int(h) for h in hidden)
        self.t_embed_dim = int(t_embed_dim)
        self.y_embed_dim = int(y_embed_dim)
        self.activation = activation
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        in_dim = self.dim + self.t_embed_dim + self.y_embed_dim
        sizes = (in_dim,) + self.hidden + (self.dim,)
        self.params = {}
        for i in range(len(sizes) - 1):
            scale = 1.0 / np.sqrt(sizes[i])
            self.params[f"W{i}"] = rng.normal(0.0, scale, size=(sizes[i], sizes[i + 1]))
            self.params[f"b{i}"] = np.zeros(sizes[i + 1])
        self.params["t_embed"] = rng.normal(
            0.0, 0.1, size=(self.num_steps + 1, self.t_embed_dim)
        )
        self.params["y_embed"] = rng.normal(
            0.0, 0.1, size=(self.num_classes, self.y_embed_dim)
        )
        self._n_layers = len(sizes) - 1

    def _assemble(self, z, t, y):
        t = np.asarray(t, dtype=int)
        y = np.asarray(y, dtype=int)
        return np.concatenate(
            [z, self.params["t_embed"][t], self.params["y_embed"][y]], axis=1
        ), t, y

    def forward(self, z, t, y, cache=None):
        """Evaluate the net on a batch; fills cache for backward()."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        h, t, y = self._assemble(z, np.broadcast_to(t, z.shape[:1]),
                                 np.broadcast_to(y, z.shape[:1]))
        acts = [h]
        for i in range(self._n_layers):
            a = h @ self.params[f"W{i}"] + self.params[f"b{i}"]
            if i < self._n_layers - 1 and self.activation == "tanh":
                h = np.tanh(a)
            else:
                h = a
            acts.append(h)
        if cache is not None:
            cache["acts"] = acts
            cache["t"] = t
            cache["y"] = y
        return acts[-1]

    def __call__(self, z, t, y):
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        out = self.forward(z[None, :] if single else z, t, y)
        return out[0] if single else out

    def backward(self, cache, dout):
        """Gradients of the cached forward pass for upstream dout."""
        acts, t, y = cache["acts"], cache["t"], cache["y"]
        grads = {}
        dh = dout
        for i in range(self._n_layers - 1, -1, -1):
            h_in = acts[i]
            grads[f"W{i}"] = h_in.T @ dh
            grads[f"b{i}"] = dh.sum(axis=0)
            if i > 0:
                dh = dh @ self.params[f"W{i}"].T
                if self.activation == "tanh":
                    dh = dh * (1.0 - acts[i] ** 2)
        # input gradient flows into the embedding tables
        din = dh @ self.params["W0"].T
        te = np.zeros_like(self.params["t_embed"])
        ye = np.zeros_like(self.params["y_embed"])
        d0 = self.dim
        np.add.at(te, t, din[:, d0 : d0 + self.t_embed_dim])
        np.add.at(ye, y, din[:, d0 + self.t_embed_dim :])
        grads["t_embed"] = te
        grads["y_embed"] = ye
        return grads

    # -------------------------------------------------------- persistence

    def save(self, path):
        """Flat binary container with a one-line JSON header."""
        names = sorted(self.params)
        header = {
            "format": WEIGHTS_FORMAT,
            "version": WEIGHTS_VERSION,
            "dim": self.dim,
            "num_steps": self.num_steps,
            "num_classes": self.num_classes,
            "hidden": list(self.hidden),
            "t_embed_dim": self.t_embed_dim,
            "y_embed_dim": self.y_embed_dim,
            "activation": self.activation,
            "seed": self.seed,
            "arrays": [
                {"name": n, "shape": list(self.params[n].shape)} for n in names
            ],
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            for n in names:
                fh.write(np.ascontiguousarray(self.params[n], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            if header.get("format") != WEIGHTS_FORMAT:
                raise ValueError("not a score-net weights file")
            if header.get("version") != WEIGHTS_VERSION:
                raise ValueError(f"unsupported weights version {header.get('version')}")
            net = cls(
                header["dim"],
                header["num_steps"],
                header["num_classes"],
                hidden=tuple(header["hidden"]),
                t_embed_dim=header["t_embed_dim"],
                y_embed_dim=header["y_embed_dim"],
                activation=header["activation"],
                seed=header["seed"],
            )
            for spec in header["arrays"]:
                shape = tuple(spec["shape"])
                count = int(np.prod(shape)) if shape else 1
                buf = fh.read(count * 8)
                net.params[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        return net


# ------------------------------------------------------------- training


def conditional_score_target(x, z_t, kappa_t):
    """Regression target kappa_t (I - z z^T) x for corrupted states."""
    kappa_t = np.asarray(kappa_t, dtype=float)
    return kappa_t[:, None] * tangent_project(z_t, x)


def train_score(
    net,
    vectors,
    labels,
    schedule,
    loss_kind="mse",
    epochs=100,
    rng=None,
    batch_size=128,
    lr=1e-3,
    momentum=0.9,
    forward_mode="angular",
    kappa_const=None,
):
    """Fit the net to the conditional score of one-shot corruptions.

    Per batch: draw per-sample steps t, corrupt x to z_t at angle
    theta_t, regress the net output onto kappa_t (I - z z^T) x, and take
    one SGD-with-momentum step. Returns the per-epoch mean loss curve.
    kappa_const replaces the scheduled cot(theta_t) with a single
    corruption level (the no-scheduling ablation).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x = np.asarray(vectors, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a nonempty (n, d) training array")
    n = x.shape[0]
    velocity = {k: np.zeros_like(v) for k, v in net.params.items()}
    curve = []
    if kappa_const is not None:
        thetas = np.full(schedule.num_steps, np.arctan(1.0 / kappa_const))
        kappas = np.full(schedule.num_steps, float(kappa_const))
    else:
        thetas = schedule.thetas
        kappas = 1.0 / np.tan(thetas)
    for _ in range(int(epochs)):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = x[idx], y[idx]
            t = rng.integers(1, schedule.num_steps + 1, size=idx.size)
            kt = kappas[t - 1]
            if forward_mode == "angular":
                v = rng.standard_normal(xb.shape)
                v /= np.linalg.norm(v, axis=1, keepdims=True)
                zt = np.cos(thetas[t - 1])[:, None] * xb + np.sin(thetas[t - 1])[:, None] * v
                zt /= np.linalg.norm(zt, axis=1, keepdims=True)
            elif forward_mode == "vmf":
                from .vmf import sample_vmf_batch

                zt = sample_vmf_batch(rng, xb, kt)
            else:
                raise ValueError(f"unknown forward mode {forward_mode!r}")
            target = conditional_score_target(xb, zt, kt)
            cache = {}
            pred = net.forward(zt, t, yb, cache=cache)
            loss, dpred = _batch_loss_grad(loss_kind, pred, target)
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"{loss_kind} loss became non-finite (epoch {len(curve)})"
                )
            grads = net.backward(cache, dpred)
            for k, g in grads.items():
                velocity[k] = momentum * velocity[k] - lr * g
                net.params[k] += velocity[k]
            losses.append(loss)
        curve.append(float(np.mean(losses)))
    return net, curve


def gradient_check(net, z, t, y, target, h=1e-5, loss_kind="mse", n_coords=40, seed=0):
    """Max relative error of analytic vs central-difference gradients.

    Perturbs a random subset of parameter coordinates; intended for
    inputs away from the arccos endpoints when checking the geodesic
    loss, whose derivative is singular at antipodal alignment.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    rng = np.random.default_rng(seed)

    def batch_loss():
        pred = net.forward(z, t, y)
        loss, _ = _batch_loss_grad(loss_kind, pred, target)
        return loss

    cache = {}
    pred = net.forward(z, t, y, cache=cache)
    _, dpred = _batch_loss_grad(loss_kind, pred, target)
    grads = net.backward(cache, dpred)

    names = sorted(net.params)
    max_rel = 0.0
    for _ in range(n_coords):
        name = names[rng.integers(len(names))]
        arr = net.params[name]
        flat = rng.integers(arr.size)
        idx = np.unravel_index(flat, arr.shape)
        orig = arr[idx]
        arr[idx] = orig + h
        up = batch_loss()
        arr[idx] = orig - h
        down = batch_loss()
        arr[idx] = orig
        fd = (up - down) / (2.0 * h)
        an = grads[name][idx]
        denom = max(abs(fd), abs(an), 1e-8)
        max_rel = max(max_rel, abs(fd - an) / denom)
    return max_rel
