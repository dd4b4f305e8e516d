"""From-scratch LSTM encoder-decoder numerics.

Plain numpy forward and backward passes for a forget-gate LSTM, the
encoder-decoder composition with a linear readout, and the Adam update.
Everything operates on flat {name: array} parameter dictionaries so
gradients can be checked tensor by tensor against finite differences.
"""

from __future__ import annotations

import numpy as np

GATES = ("i", "f", "o", "c")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def init_lstm(input_size: int, hidden: int, rng: np.random.Generator,
              scale: float = 0.25) -> dict[str, np.ndarray]:
    """Uniform(-scale, scale) weights, zero biases."""
    p = {}
    for g in GATES:
        p[f"W{g}"] = rng.uniform(-scale, scale, (input_size, hidden))
        p[f"U{g}"] = rng.uniform(-scale, scale, (hidden, hidden))
        p[f"b{g}"] = np.zeros(hidden)
    return p


def zero_lstm(input_size: int, hidden: int) -> dict[str, np.ndarray]:
    p = {}
    for g in GATES:
        p[f"W{g}"] = np.zeros((input_size, hidden))
        p[f"U{g}"] = np.zeros((hidden, hidden))
        p[f"b{g}"] = np.zeros(hidden)
    return p


def lstm_cell_step(x, h_prev, c_prev, p):
    """One forget-gate LSTM step; returns (h, c).

    Gates are sigmoid(x W + h U + b); the candidate cell input is tanh of
    the same affine form; the new cell mixes the previous cell through the
    forget gate with the gated candidate, and the hidden output is the
    output gate times tanh of the cell.
    """
    h, c, _ = _cell_forward(np.asarray(x, dtype=np.float64),
                            np.asarray(h_prev, dtype=np.float64),
                            np.asarray(c_prev, dtype=np.float64), p)
    return h, c


def _cell_forward(x, h_prev, c_prev, p):
    if x.shape[-1] != p["Wi"].shape[0] or h_prev.shape[-1] != p["Ui"].shape[0]:
        raise ValueError("input/state shapes do not match the parameters")
    i = sigmoid(x @ p["Wi"] + h_prev @ p["Ui"] + p["bi"])
    f = sigmoid(x @ p["Wf"] + h_prev @ p["Uf"] + p["bf"])
    o = sigmoid(x @ p["Wo"] + h_prev @ p["Uo"] + p["bo"])
    g = np.tanh(x @ p["Wc"] + h_prev @ p["Uc"] + p["bc"])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = (x, h_prev, c_prev, i, f, o, g, tc)
    return h, c, cache


def _cell_backward(dh, dc, cache, p, grads, prefix):
    x, h_prev, c_prev, i, f, o, g, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc ** 2)
    df = dc * c_prev
    di = dc * g
    dg = dc * i
    da = {"i": di * i * (1.0 - i), "f": df * f * (1.0 - f),
          "o": do * o * (1.0 - o), "c": dg * (1.0 - g ** 2)}
    dx = np.zeros_like(x)
    dh_prev = np.zeros_like(h_prev)
    for gate, d in da.items():
        grads[f"{prefix}W{gate}"] += x.T @ d
        grads[f"{prefix}U{gate}"] += h_prev.T @ d
        grads[f"{prefix}b{gate}"] += d.sum(axis=0)
        dx += d @ p[f"W{gate}"].T
        dh_prev += d @ p[f"U{gate}"].T
    dc_prev = dc * f
    return dx, dh_prev, dc_prev


def run_lstm(x_seq, p, h0=None, c0=None):
    """Unroll over (batch, steps, features); returns (h_seq, h_T, c_T, caches)."""
    b, steps, _ = x_seq.shape
    hidden = p["Ui"].shape[0]
    h = np.zeros((b, hidden)) if h0 is None else h0
    c = np.zeros((b, hidden)) if c0 is None else c0
    caches = []
    hs = np.empty((b, steps, hidden))
    for t in range(steps):
        h, c, cache = _cell_forward(x_seq[:, t, :], h, c, p)
        hs[:, t, :] = h
        caches.append(cache)
    return hs, h, c, caches


def flatten(params: dict) -> list[tuple[str, np.ndarray]]:
    return sorted(params.items())


def global_norm(grads: dict) -> float:
    total = 0.0
    for _, g in flatten(grads):
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_gradients(grads: dict, max_norm: float) -> tuple[dict, float]:
    """Scale all gradients so the global norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if norm > max_norm > 0:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


class Adam:
    def __init__(self, lr: float = 0.005, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# encoder-decoder network


def init_seq2seq(hidden: int, rng: np.random.Generator, input_size: int = 2) -> dict:
    params = {}
    for name, p in (("enc.", init_lstm(input_size, hidden, rng)),
                    ("dec.", init_lstm(1, hidden, rng))):
        for k, v in p.items():
            params[name + k] = v
    params["out.W"] = rng.uniform(-0.25, 0.25, (hidden, 1))
    params["out.b"] = np.zeros(1)
    return params


def zero_seq2seq(hidden: int, input_size: int = 2) -> dict:
    params = {}
    for name, p in (("enc.", zero_lstm(input_size, hidden)),
                    ("dec.", zero_lstm(1, hidden))):
        for k, v in p.items():
            params[name + k] = v
    params["out.W"] = np.zeros((hidden, 1))
    params["out.b"] = np.zeros(1)
    return params


def _subset(params: dict, prefix: str) -> dict:
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


def seq2seq_loss_and_grads(params: dict, x_seq: np.ndarray, y: np.ndarray,
                           y_teacher_scaled: np.ndarray,
                           dropout_mask: np.ndarray | None = None):
    """Teacher-forced MSE loss and analytic gradients.

    ``x_seq`` is (batch, lookup steps, input signals); ``y`` the raw target
    counts (batch, horizon); ``y_teacher_scaled`` the scaled decoder inputs,
    column j feeding decoder step j (zeros in column 0).  ``dropout_mask``
    (batch, horizon, hidden), already divided by the keep rate, multiplies
    the decoder hidden state before the readout.
    """
    enc = _subset(params, "enc.")
    dec = _subset(params, "dec.")
    w_out, b_out = params["out.W"], params["out.b"]
    batch, horizon = y.shape

    _, h_enc, c_enc, enc_caches = run_lstm(x_seq, enc)
    dec_in = y_teacher_scaled[:, :, None]
    hs, _, _, dec_caches = run_lstm(dec_in, dec, h0=h_enc, c0=c_enc)
    hs_out = hs if dropout_mask is None else hs * dropout_mask
    preds = hs_out @ w_out[None, :, :]
    preds = preds[:, :, 0] + b_out[0]
    resid = preds - y
    loss = float(np.mean(resid ** 2))

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dpred = 2.0 * resid / resid.size
    grads["out.W"] += np.einsum("bth,bt->h", hs_out, dpred)[:, None]
    grads["out.b"] += np.array([dpred.sum()])
    dh_seq = dpred[:, :, None] * w_out[None, None, :, 0]
    if dropout_mask is not None:
        dh_seq = dh_seq * dropout_mask

    hidden = h_enc.shape[1]
    dh = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    for t in range(horizon - 1, -1, -1):
        _, dh, dc = _cell_backward(dh + dh_seq[:, t, :], dc, dec_caches[t],
                                   dec, grads, "dec.")
    for t in range(x_seq.shape[1] - 1, -1, -1):
        _, dh, dc = _cell_backward(dh, dc, enc_caches[t], enc, grads, "enc.")
    return loss, grads, preds


def seq2seq_predict(params: dict, x_seq: np.ndarray, horizon: int,
                    y_mean: float, y_std: float) -> np.ndarray:
    """Autoregressive inference; outputs clamped at zero (counts).

    The decoder receives the scaled previous output, zero at the first step.
    Deterministic: no dropout at inference.
    """
    single = x_seq.ndim == 2
    if single:
        x_seq = x_seq[None, :, :]
    enc = _subset(params, "enc.")
    dec = _subset(params, "dec.")
    _, h, c, _ = run_lstm(np.asarray(x_seq, dtype=np.float64), enc)
    batch = x_seq.shape[0]
    prev = np.zeros((batch, 1))
    outs = np.empty((batch, horizon))
    for j in range(horizon):
        h, c, _ = _cell_forward(prev, h, c, dec)
        yhat = (h @ params["out.W"])[:, 0] + params["out.b"][0]
        yhat = np.maximum(yhat, 0.0)
        outs[:, j] = yhat
        prev = ((yhat - y_mean) / y_std)[:, None]
    return outs[0] if single else outs
