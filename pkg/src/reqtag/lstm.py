"""Single LSTM cell: forward step, backward step, parameter init.

Gate order in the stacked weight matrices is [input, forget, candidate,
output]. The forget-gate bias block starts at 1.0; everything else is
uniform(-k, k) with k = 1/sqrt(hidden).
"""

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, sigmoid, tanh


@dataclass
class LstmCellParams:
    w_in: np.ndarray   # (4*hidden, input_dim)
    w_h: np.ndarray    # (4*hidden, hidden)
    b: np.ndarray      # (4*hidden,)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1]


def init_lstm(input_dim: int, hidden: int, rng: np.random.Generator) -> LstmCellParams:
    k = 1.0 / np.sqrt(hidden)
    p = LstmCellParams(
        w_in=rng.uniform(-k, k, size=(4 * hidden, input_dim)),
        w_h=rng.uniform(-k, k, size=(4 * hidden, hidden)),
        b=rng.uniform(-k, k, size=4 * hidden),
    )
    p.b[hidden:2 * hidden] = 1.0  # forget gate bias
    return p


def zero_grads(params: LstmCellParams) -> LstmCellParams:
    return LstmCellParams(w_in=np.zeros_like(params.w_in),
                          w_h=np.zeros_like(params.w_h),
                          b=np.zeros_like(params.b))


@dataclass
class LstmStepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray


def lstm_step(params: LstmCellParams, x, h_prev, c_prev):
    """One LSTM step on vectors; returns (h, c, cache)."""
    h = params.hidden
    if x.shape != (params.input_dim,):
        raise ShapeError(f"input shape {x.shape}, expected ({params.input_dim},)")
    if h_prev.shape != (h,) or c_prev.shape != (h,):
        raise ShapeError(f"state shapes {h_prev.shape}/{c_prev.shape}, expected ({h},)")
    a = params.w_in @ x + params.w_h @ h_prev + params.b
    i = sigmoid(a[:h])
    f = sigmoid(a[h:2 * h])
    g = tanh(a[2 * h:3 * h])
    o = sigmoid(a[3 * h:])
    c = f * c_prev + i * g
    h_t = o * tanh(c)
    cache = LstmStepCache(x=x, h_prev=h_prev, c_prev=c_prev,
                          i=i, f=f, g=g, o=o, c=c)
    return h_t, c, cache


def lstm_step_backward(params: LstmCellParams, cache: LstmStepCache,
                       dh, dc, grads: LstmCellParams):
    """Backprop one step; accumulates into grads, returns (dx, dh_prev, dc_prev)."""
    tc = np.tanh(cache.c)
    do = dh * tc
    dc_total = dc + dh * cache.o * (1.0 - tc * tc)
    di = dc_total * cache.g
    df = dc_total * cache.c_prev
    dg = dc_total * cache.i
    dc_prev = dc_total * cache.f

    da = np.concatenate([
        di * cache.i * (1.0 - cache.i),
        df * cache.f * (1.0 - cache.f),
        dg * (1.0 - cache.g * cache.g),
        do * cache.o * (1.0 - cache.o),
    ])
    grads.w_in += np.outer(da, cache.x)
    grads.w_h += np.outer(da, cache.h_prev)
    grads.b += da
    dx = params.w_in.T @ da
    dh_prev = params.w_h.T @ da
    return dx, dh_prev, dc_prev
