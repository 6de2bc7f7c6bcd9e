import numpy as np

from masaat.autodiff import Tensor, backward


def eval_scalar(fn) -> float:
    """Evaluate a graph-building closure and return the scalar loss value."""
    return float(fn().data)


def finite_difference(params, fn, h=1e-5):
    """Central-difference gradients of a scalar closure w.r.t. named tensors.

    ``params`` maps names to Tensors whose .data is perturbed in place;
    ``fn`` rebuilds the loss graph from current parameter values.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = eval_scalar(fn)
            flat[i] = orig - h
            minus = eval_scalar(fn)
            flat[i] = orig
            g.reshape(-1)[i] = (plus - minus) / (2.0 * h)
        grads[name] = g
    return grads


def analytic_gradients(params, fn):
    for p in params.values():
        p.grad = None
    loss = fn()
    backward(loss)
    return {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in params.items()}


def max_relative_error(params, fn, h=1e-5):
    """Worst-case elementwise relative error between autodiff and central FD."""
    analytic = analytic_gradients(params, fn)
    numeric = finite_difference(params, fn, h=h)
    worst = 0.0
    for name in params:
        a, b = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
        worst = max(worst, float((np.abs(a - b) / denom).max()))
    return worst


def random_tensor(rng, shape, requires_grad=True) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=requires_grad)
