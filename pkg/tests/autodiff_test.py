import numpy as np
from pytest import approx, raises
from pytest import mark as pytestr
from saydream.autodiff import (Adam, Tensor, finite_diff_check, no_grad,
                               param_grad_check, read_checkpoint,
                               write_checkpoint, functional as F)
from saydream.autodiff.nn import Linear, Parameter, SelfAttention
from saydream.autodiff.optim import LambdaLinearSchedule, get_schedule
from saydream.errors import (CheckpointError, MissingGradError,
                             NonFiniteError, ShapeError, TapeConsumedError)

WEIGHTS = np.linspace(-1.0, 2.0, 12).reshape(3, 4)

SCALAR_FUNCTIONS = {
    'square': lambda t: (t * t).sum(),
    'cube-mean': lambda t: (t ** 3).mean(),
    'exp': lambda t: (t.exp() * WEIGHTS).sum(),
    'log': lambda t: (t.log() * WEIGHTS).sum(),
    'ratio': lambda t: (t / (t + 1.0)).sum(),
    'tanh': lambda t: (t.tanh() * t).sum(),
    'sigmoid': lambda t: (t.sigmoid() * WEIGHTS).sum(),
    'gelu': lambda t: (t.gelu() * WEIGHTS).sum(),
    'softmax': lambda t: (t.softmax(-1) * WEIGHTS).sum(),
    'layer-norm': lambda t: (F.layer_norm(t) * WEIGHTS).sum(),
    'matmul': lambda t: ((t @ WEIGHTS.T) ** 2).sum(),
    'transpose': lambda t: (t.transpose(1, 0) * WEIGHTS.T).sum(),
    'slice': lambda t: (t[1:, :2] ** 2).sum(),
    'concat': lambda t: (F.concat([t, t * 2.0], axis=0) ** 2).sum(),
    'broadcast': lambda t: ((t + t.sum(axis=0, keepdims=True)) ** 2).sum(),
}


@pytestr.parametrize('name', sorted(SCALAR_FUNCTIONS))
@pytestr.randomize(seed=int, min_num=0, max_num=2 ** 31, ncalls=3)
def test_gradients_match_central_differences(name, seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.uniform(0.5, 1.5, size=(3, 4)))
    assert finite_diff_check(SCALAR_FUNCTIONS[name], x) < 1e-4


@pytestr.randomize(seed=int, min_num=0, max_num=2 ** 31, ncalls=3)
def test_conv_gradients(seed):
    rng = np.random.default_rng(seed)
    x = Parameter(rng.normal(size=(2, 3, 5, 5)))
    w = Parameter(rng.normal(size=(4, 3, 3, 3)))
    b = Parameter(rng.normal(size=4))

    def loss():
        return (F.conv2d(x, w, b, stride=2, padding=1) ** 2).sum()

    assert param_grad_check(loss, [x, w, b]) < 1e-4


@pytestr.randomize(seed=int, min_num=0, max_num=2 ** 31, ncalls=3)
def test_transposed_conv_gradients(seed):
    rng = np.random.default_rng(seed)
    x = Parameter(rng.normal(size=(1, 2, 3, 3)))
    w = Parameter(rng.normal(size=(2, 3, 4, 4)))

    def loss():
        return (F.conv_transpose2d(x, w, stride=2, padding=1) ** 2).sum()

    assert F.conv_transpose2d(x, w, stride=2, padding=1).shape == \
        (1, 3, 6, 6)
    assert param_grad_check(loss, [x, w]) < 1e-4


def test_conv3d_gradients():
    rng = np.random.default_rng(3)
    x = Parameter(rng.normal(size=(1, 2, 3, 4, 4)))
    w = Parameter(rng.normal(size=(2, 2, 3, 3, 3)))

    def loss():
        return (F.conv3d(x, w, padding=1) ** 2).sum()

    assert param_grad_check(loss, [x, w], max_coords=20) < 1e-4


def test_attention_gradients():
    rng = np.random.default_rng(5)
    q = Parameter(rng.normal(size=(2, 3, 4)))
    k = Parameter(rng.normal(size=(2, 5, 4)))
    v = Parameter(rng.normal(size=(2, 5, 4)))

    def loss():
        return (F.attention(q, k, v) ** 2).sum()

    assert param_grad_check(loss, [q, k, v]) < 1e-4


@pytestr.parametrize("lead", [(3,), (2, 3)])
def test_self_attention_module(lead):
    rng = np.random.default_rng(9)
    attn = SelfAttention(4, 2, rng)
    x = Parameter(rng.normal(size=lead + (5, 4)))
    out = attn(x)
    assert out.shape == lead + (5, 4)

    def loss():
        return (attn(x) ** 2).sum()

    assert param_grad_check(loss, [x] + attn.parameters(), floor=1e-6) < 1e-4


def test_self_attention_mixes_positions():
    attn = SelfAttention(4, 2, np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=(1, 5, 4))
    moved = x.copy()
    moved[0, 4] += 1.0
    diff = attn(Tensor(moved)).numpy() - attn(Tensor(x)).numpy()
    assert np.all(np.abs(diff[0, 0]) > 0)


def test_transpose_accepts_a_sequence():
    t = Tensor(np.arange(24.0).reshape(2, 3, 4))
    assert t.transpose((2, 0, 1)).shape == (4, 2, 3)
    assert t.transpose([2, 0, 1]).shape == t.transpose(2, 0, 1).shape
    assert t.transpose().shape == (4, 3, 2)


def test_embedding_gradient_accumulates_repeats():
    weight = Parameter(np.ones((4, 2)))
    F.embedding(weight, np.array([1, 1, 3])).sum().backward()
    assert weight.grad.tolist() == [[0, 0], [2, 2], [0, 0], [1, 1]]


def test_shape_mismatch_names_both_shapes():
    with raises(ShapeError) as err:
        Tensor(np.ones((2, 3))) + Tensor(np.ones(4))
    assert '(2, 3)' in str(err.value) and '(4,)' in str(err.value)
    with raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))
    with raises(ShapeError):
        F.mse(Tensor(np.ones(3)), np.ones(4))


def test_non_finite_values_are_reported():
    with raises(NonFiniteError) as err:
        Tensor(np.zeros(2)).log()
    assert 'log' in str(err.value)


def test_backward_twice_is_an_error():
    x = Tensor(np.ones(3), requires_grad=True)
    loss = (x * x).sum()
    loss.backward()
    with raises(TapeConsumedError):
        loss.backward()


def test_backward_needs_a_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with raises(ShapeError):
        (x * 2.0).backward()


def test_gradients_accumulate_across_graphs():
    x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    (x * x).sum().backward()
    (x * x).sum().backward()
    assert x.grad == approx(4.0 * x.data)


def test_shared_subexpression():
    x = Tensor(np.array([3.0]), requires_grad=True)
    y = x * x
    (y + y).sum().backward()
    assert x.grad == approx([12.0])


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * x).sum()
    assert not y.requires_grad
    assert y.is_leaf()


def test_adam_first_step_is_bias_corrected():
    p = Parameter(np.array([1.0, 1.0]))
    optim = Adam([('p', p)], lr=0.1)
    p.grad = np.array([2.0, -0.5])
    optim.step()
    assert p.data == approx([0.9, 1.1], rel=1e-6)
    assert p.grad.tolist() == [0.0, 0.0]


def test_adam_weight_decay_is_decoupled():
    p = Parameter(np.array([2.0]))
    optim = Adam([('p', p)], lr=0.1, weight_decay=0.5)
    p.grad = np.array([0.0])
    optim.step()
    assert p.data == approx([2.0 * (1 - 0.05)])


def test_adam_needs_gradients():
    optim = Adam([('p', Parameter(np.ones(2)))])
    with raises(MissingGradError):
        optim.step()


def test_adam_minimizes_a_quadratic():
    p = Parameter(np.array([0.0]))
    optim = Adam([('p', p)], lr=0.1)
    for _ in range(300):
        optim.zero_grad()
        ((p - 3.0) ** 2).sum().backward()
        optim.step()
    assert p.data == approx([3.0], abs=0.05)


def test_linear_layer_learns():
    rng = np.random.default_rng(0)
    layer = Linear(2, 1, rng)
    optim = Adam(layer.named_parameters(), lr=0.05)
    x = rng.normal(size=(32, 2))
    y = x @ np.array([[1.5], [-0.5]]) + 0.25
    first = None
    for _ in range(200):
        optim.zero_grad()
        loss = F.mse(layer(Tensor(x)), y)
        first = loss.item() if first is None else first
        loss.backward()
        optim.step()
    assert loss.item() < 0.05 * first


def test_lr_schedules():
    schedule = LambdaLinearSchedule(cycle_length=10)
    assert schedule(0) == approx(0.6)
    assert schedule(5) == approx(0.3)
    assert schedule(10) == approx(0.6)
    warm = LambdaLinearSchedule(warm_up=4, cycle_length=10, f_start=0.0)
    assert warm(2) == approx(0.3)
    assert get_schedule('constant')(123) == 1.0
    with raises(ValueError):
        get_schedule('cosine')


def test_checkpoint_round_trip(tmp_path):
    path = str(tmp_path / 'blob.ckpt')
    arrays = {'w': np.arange(6.0).reshape(2, 3), 'scalar': np.array(2.5)}
    write_checkpoint(path, 'codec', arrays, {'note': 'x'})
    tag, back, meta = read_checkpoint(path, 'codec')
    assert tag == 'codec' and meta == {'note': 'x'}
    assert back['w'].tolist() == arrays['w'].tolist()
    assert float(back['scalar']) == 2.5


def test_checkpoint_errors(tmp_path):
    path = str(tmp_path / 'blob.ckpt')
    write_checkpoint(path, 'codec', {'w': np.ones(3)})
    with raises(CheckpointError):
        read_checkpoint(path, 'teacher')
    with open(path, 'rb') as fh:
        data = fh.read()
    with open(path, 'wb') as fh:
        fh.write(data[:-5])
    with raises(CheckpointError):
        read_checkpoint(path)
    with open(path, 'wb') as fh:
        fh.write(b'not a checkpoint')
    with raises(CheckpointError):
        read_checkpoint(path)


def test_module_state(tmp_path):
    rng = np.random.default_rng(0)
    a, b = Linear(3, 2, rng), Linear(3, 2, rng)
    assert a.checksum() != b.checksum()
    b.load_state_dict(a.state_dict())
    assert a.checksum() == b.checksum()
    with raises(CheckpointError):
        b.load_state_dict({'weight': np.ones((3, 2))})
    with raises(CheckpointError):
        b.load_state_dict({'weight': np.ones((2, 2)), 'bias': np.ones(2)})
    a.freeze()
    assert not any(p.requires_grad for p in a.parameters())
