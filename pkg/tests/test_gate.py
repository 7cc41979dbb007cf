import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from adaprep.attention import apply_attention, attention_vector
from adaprep.frames import MASKED, RAW, FrameStack
from adaprep.gate import (GateError, GateModule, gate_coupling, gate_decision, mlp_forward,
                          select_stream)

SIGMOID_2 = 1.0 / (1.0 + math.exp(-2.0))  # 0.8807970779778823


def zero_gate(c=80, h=128):
    g = GateModule(c, h).double()
    with torch.no_grad():
        for p in g.parameters():
            p.zero_()
    return g


def tiny_gate(c=3):
    """h=1, hidden row e0, out weight 1, zero biases."""
    g = zero_gate(c, 1)
    with torch.no_grad():
        g.hidden.weight[0, 0] = 1.0
        g.out.weight[0, 0] = 1.0
    return g


def random_gate(seed, c=80, h=16, w_scale=1.0):
    gen = torch.Generator().manual_seed(seed)
    g = GateModule(c, h).double()
    with torch.no_grad():
        for p in g.parameters():
            p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64))
        g.W.mul_(w_scale)
    return g


def test_default_init():
    g = GateModule(80, 128)
    assert torch.count_nonzero(g.W) == 0
    assert torch.count_nonzero(g.out.weight) == 0 and torch.count_nonzero(g.out.bias) == 0
    assert torch.count_nonzero(g.hidden.bias) == 0
    assert abs(g.hidden.weight.std().item() - math.sqrt(2 / 80)) < 0.01
    out = gate_decision(torch.rand(80), g)
    assert out.d1.item() == 0.5 and out.d2.item() == 0.0 and out.choice == RAW


def test_zero_mlp_gives_half():
    g = zero_gate()
    for v in (torch.zeros(80), torch.rand(80) * 5):
        assert mlp_forward(v, g).item() == 0.5


def test_tiny_mlp_sigmoid_two():
    v = torch.tensor([2.0, 0.0, 0.0], dtype=torch.float64)
    assert mlp_forward(v, tiny_gate()).item() == pytest.approx(SIGMOID_2, abs=1e-12)
    assert SIGMOID_2 == pytest.approx(0.880797, abs=1e-6)


def test_mlp_rejects_bad_input():
    g = zero_gate(4, 2)
    with pytest.raises(GateError):
        mlp_forward(torch.tensor([1.0, float("nan"), 0, 0]), g)
    with pytest.raises(GateError):
        mlp_forward(torch.zeros(5), g)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 10))
def test_mlp_output_in_open_interval(seed, scale):
    g = random_gate(seed % 1000)
    v = torch.rand(80, generator=torch.Generator().manual_seed(seed), dtype=torch.float64) * scale
    d1 = mlp_forward(v, g).item()
    assert 0.0 < d1 < 1.0


def test_zero_embedding_always_raw(rng):
    g = random_gate(0)
    with torch.no_grad():
        g.W.zero_()
    for _ in range(50):
        out = gate_decision(rng.random(80) * 3, g)
        assert out.d2.item() == 0.0 and out.choice == RAW


def test_large_embedding_selects_masked():
    g = zero_gate()
    with torch.no_grad():
        g.W[0] = 10.0
    c = np.zeros(80); c[0] = 1.0
    out = gate_decision(c, g)
    assert out.d2.item() == 10.0
    assert out.d_hat.item() == 0.0 and out.choice == MASKED


def test_no_objects_always_raw():
    g = random_gate(3, w_scale=100.0)
    out = gate_decision(np.zeros(80), g)
    assert out.d2.item() == 0.0 and out.choice == RAW


def test_gate_dimension_mismatch():
    with pytest.raises(GateError):
        gate_decision(np.zeros(79), zero_gate())


def test_gate_output_relations(rng):
    for seed in range(100):
        g = random_gate(seed, w_scale=rng.choice([0.01, 1.0, 10.0]))
        c = rng.random(80) * rng.choice([0.1, 1, 3])
        out = gate_decision(c, g)
        d1, d2 = out.d1.item(), out.d2.item()
        assert 0 < d1 < 1
        assert out.d.item() == d1 - d2
        assert out.d_hat.item() == max(d1 - d2, 0.0)
        assert (out.choice == MASKED) == (out.d_hat.item() == 0.0)


def test_scaling_embedding_keeps_masked(rng):
    for seed in range(50):
        g = random_gate(seed)
        c = rng.random(80)
        out = gate_decision(c, g)
        if out.choice != MASKED or out.d2.item() < out.d1.item():
            continue
        for k in (1.0, 1.5, 4.0, 100.0):
            gk = random_gate(seed)
            with torch.no_grad():
                gk.W.mul_(k)
            assert gate_decision(c, gk).choice == MASKED


def stacks(n=2):
    raw = FrameStack(torch.ones(n, 2, 2, 3, dtype=torch.float64), RAW)
    masked = FrameStack(torch.zeros(n, 2, 2, 3, dtype=torch.float64), MASKED)
    return raw, masked


def _output(d_hat):
    t = torch.tensor(d_hat, dtype=torch.float64)
    from adaprep.gate import GateOutput
    return GateOutput(t, t, t, t)


def test_select_stream():
    raw, masked = stacks()
    assert select_stream(_output(0.0), raw, masked) is masked
    assert select_stream(_output(0.3), raw, masked) is raw
    same = select_stream(_output(0.3), raw, raw)
    assert torch.equal(same.frames, raw.frames)
    with pytest.raises(GateError):
        select_stream(_output(0.3), raw, FrameStack(torch.zeros(3, 2, 2, 3), MASKED))


def test_coupling_is_forward_identity(rng):
    for seed in range(20):
        g = random_gate(seed)
        out = gate_decision(rng.random(80), g)
        x = torch.from_numpy(rng.random((3, 4, 4, 3)))
        y = gate_coupling(FrameStack(x, RAW), out)
        assert torch.equal(y.frames, x)
        assert y.kind == RAW


def fd_grad(f, param, eps=1e-5):
    """Central differences of scalar f() w.r.t. every entry of param."""
    g = torch.zeros_like(param)
    flat = param.data.view(-1)
    for i in range(flat.numel()):
        old = flat[i].item()
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        g.view(-1)[i] = (fp - fm) / (2 * eps)
    return g


def test_coupling_gradient_wrt_embedding(rng):
    g = random_gate(5, c=6, h=4, w_scale=0.05)
    c = torch.from_numpy(rng.random(6))
    p = torch.from_numpy(rng.random((2, 3, 3, 3)))
    out = gate_decision(c, g)
    assert out.choice == RAW
    y = gate_coupling(FrameStack(p, RAW), out).frames
    y[1, 2, 0, 1].backward()
    # d(d)/dW[i] = -c[i], measured by finite differences on d
    dd_dw = fd_grad(lambda: gate_decision(c, g).d.item(), g.W)
    np.testing.assert_allclose(dd_dw, -c, rtol=1e-8)
    np.testing.assert_allclose(g.W.grad, -c * p[1, 2, 0, 1], rtol=1e-8)


def test_coupling_gradient_wrt_mlp(rng):
    g = random_gate(6, c=6, h=4, w_scale=0.01)
    c = torch.from_numpy(rng.random(6))
    p = torch.from_numpy(rng.random((2, 3, 3, 3)))
    out = gate_decision(c, g)
    assert out.choice == RAW
    gate_coupling(FrameStack(p, RAW), out).frames[0, 1, 1, 2].backward()
    for param in (g.hidden.weight, g.hidden.bias, g.out.weight, g.out.bias):
        dd1 = fd_grad(lambda: gate_decision(c, g).d1.item(), param)
        np.testing.assert_allclose(param.grad, dd1 * p[0, 1, 1, 2], rtol=1e-6, atol=1e-12)


def test_coupling_no_gradient_when_masked(rng):
    g = random_gate(7, c=6, h=4, w_scale=50.0)
    c = torch.from_numpy(rng.random(6) + 0.5)
    with torch.no_grad():
        g.W.abs_()
    out = gate_decision(c, g)
    assert out.choice == MASKED
    p = torch.from_numpy(rng.random((2, 3, 3, 3)))
    gate_coupling(FrameStack(p, MASKED), out).frames.sum().backward()
    assert torch.count_nonzero(g.W.grad) == 0


# -- attention -----------------------------------------------------------------

def test_attention_zero_mlp():
    a = attention_vector(torch.rand(7, 80, dtype=torch.float64), zero_gate())
    assert a.shape == (7,) and torch.all(a == 0.5)


def test_attention_identical_rows(rng):
    row = rng.random(80)
    a = attention_vector(np.stack([row, row, rng.random(80)]), random_gate(1))
    assert a[0].item() == a[1].item()


def test_attention_tiny_mlp():
    ft = torch.tensor([[2.0, 0, 0], [0, 0, 0]], dtype=torch.float64)
    a = attention_vector(ft, tiny_gate())
    assert a[0].item() == pytest.approx(SIGMOID_2, abs=1e-12)
    assert a[1].item() == 0.5


def test_attention_shares_gate_mlp(rng):
    g = random_gate(2)
    ft = rng.random((4, 80))
    a = attention_vector(ft, g)
    for j in range(4):
        assert a[j].item() == pytest.approx(mlp_forward(ft[j], g).item(), abs=1e-15)
        assert a[j].item() == pytest.approx(gate_decision(ft[j], g).d1.item(), abs=1e-15)


def test_attention_range_and_errors(rng):
    a = attention_vector(rng.random((16, 80)) * 4, random_gate(4))
    assert torch.all((a > 0) & (a < 1))
    with pytest.raises(GateError):
        attention_vector(np.zeros((4, 79)), zero_gate())
    with pytest.raises(GateError):
        attention_vector(np.zeros(80), zero_gate())


def test_apply_attention_values():
    x = torch.full((3, 2, 2, 3), 0.8, dtype=torch.float64)
    s = FrameStack(x, RAW)
    assert torch.equal(apply_attention(s, torch.ones(3, dtype=torch.float64)).frames, x)
    out = apply_attention(s, torch.tensor([0.5, 1.0, 1.0], dtype=torch.float64)).frames
    assert torch.allclose(out[0], torch.full((2, 2, 3), 0.4, dtype=torch.float64), atol=1e-15)
    assert torch.equal(out[1:], x[1:])
    with pytest.raises(GateError):
        apply_attention(s, torch.ones(2))


def test_apply_attention_linear(rng):
    a = torch.from_numpy(rng.random(4))
    s1, s2 = (torch.from_numpy(rng.random((4, 3, 3, 3))) for _ in range(2))
    lhs = apply_attention(FrameStack(s1 + s2), a).frames
    rhs = apply_attention(FrameStack(s1), a).frames + apply_attention(FrameStack(s2), a).frames
    torch.testing.assert_close(lhs, rhs, rtol=0, atol=1e-15)


def test_apply_attention_gradient(rng):
    x = torch.from_numpy(rng.random((3, 2, 2, 3)))
    a = torch.from_numpy(rng.random(3)).requires_grad_()
    j = 1
    for k in range(3):
        grad_out = torch.zeros_like(x)
        grad_out[j] = torch.from_numpy(rng.random((2, 2, 3)))
        (ga,) = torch.autograd.grad((apply_attention(FrameStack(x), a).frames * grad_out).sum(), a)
        f = lambda: float((apply_attention(FrameStack(x), a.detach()).frames * grad_out).sum())
        fd = fd_grad(f, a)
        np.testing.assert_allclose(ga, fd, rtol=1e-7, atol=1e-12)
        # d(out_j)/d(a_j) is frame j itself; other weights do not touch frame j
        assert ga[j].item() == pytest.approx(float((x[j] * grad_out[j]).sum()), rel=1e-12)
        assert ga[0].item() == 0 and ga[2].item() == 0
