import numpy as np
from pytest import approx, raises
from saydream.autodiff import param_grad_check
from saydream.errors import CheckpointError, ShapeError
from saydream.policy.net import (PolicyInput, PolicyNet, input_names,
                                 load_policy, normalize_actions,
                                 predict_chunk, save_policy, to_actions)
from saydream.policy.train import (PolicyDataset, chunk_targets,
                                   evaluate_policy_loss, history_indices,
                                   history_window, train_policy)
from saydream.sim.world import STEP_BOUND
from tests.helper import (SMALL, expert_trajectories, identity_codec,
                          tiny_config, tiny_world_model)


def _net(seed=0):
    return PolicyNet((SMALL, SMALL), n=4, k=2, m=3, width=8, layers=1,
                     heads=2, rng=np.random.default_rng(seed))


def _inputs(batch=2):
    traj = expert_trajectories(1)[0]
    imagined = np.stack([traj.frames[:4]] * batch)
    history = np.stack([traj.frames[[0, -1]]] * batch)
    proprio = np.tile(traj.annotations[0, 0:3], (batch, 1))
    return imagined, history, proprio


def test_the_task_is_not_an_input():
    assert input_names() == ('imagined', 'history', 'proprio')
    assert not any('task' in name for name in input_names())


def test_output_bounds():
    out = _net()(*_inputs()).data
    assert out.shape == (2, 3, 3)
    assert np.all(np.abs(out[..., :2]) <= 1.0)
    assert np.all((out[..., 2] >= 0.0) & (out[..., 2] <= 1.0))


def test_network_gradients():
    rng = np.random.default_rng(8)
    net = PolicyNet((8, 8), n=2, k=2, m=2, width=8, layers=1, heads=2,
                    rng=rng)
    imagined = rng.uniform(size=(2, 2, 8, 8, 3))
    history = rng.uniform(size=(2, 2, 8, 8, 3))
    proprio = rng.uniform(size=(2, 3))
    target = rng.uniform(-0.5, 0.5, size=(2, 2, 3))

    def loss():
        return ((net(imagined, history, proprio) - target) ** 2).mean()

    assert param_grad_check(loss, net.parameters(), max_coords=2, rng=rng,
                            floor=1e-6) < 1e-3


def test_predict_chunk():
    imagined, history, proprio = _inputs(1)
    inp = PolicyInput(imagined[0], history[0], proprio[0])
    chunk = predict_chunk(inp, _net())
    assert len(chunk) == 3
    assert all(abs(a.dx) <= STEP_BOUND and abs(a.dy) <= STEP_BOUND
               for a in chunk)
    assert [tuple(a) for a in chunk] == \
        [tuple(a) for a in predict_chunk(inp, _net())]


def test_history_order_matters():
    imagined, history, proprio = _inputs(1)
    swapped = history[:, ::-1]
    first = _net()(imagined, history, proprio).data
    second = _net()(imagined, swapped, proprio).data
    assert not np.allclose(first, second)


def test_input_shapes_are_checked():
    imagined, history, proprio = _inputs()
    with raises(ShapeError):
        _net()(imagined[:, :3], history, proprio)
    with raises(ShapeError):
        _net()(imagined, history[:, :1], proprio)
    with raises(ShapeError):
        _net()(imagined, history, proprio[:, :2])


def test_action_normalization():
    actions = np.array([[0.05, -0.025, 1.0]])
    assert normalize_actions(actions).tolist() == [[1.0, -0.5, 1.0]]
    assert to_actions(normalize_actions(actions)) == approx(actions)


def test_history_indices():
    assert history_indices(3, 5) == [0, 0, 0, 1, 2]
    assert history_indices(10, 3) == [7, 8, 9]
    assert history_indices(10, 4, 'uniform') == [0, 3, 6, 9]
    with raises(ValueError):
        history_indices(10, 4, 'random')
    frames = [np.full((1, 1, 3), i) for i in range(4)]
    assert history_window(frames, 2)[:, 0, 0, 0].tolist() == [2, 3]


def test_chunk_targets_pad_with_idle():
    actions = np.arange(15.0).reshape(5, 3)
    out = chunk_targets(actions, 3, 4)
    assert out[:2].tolist() == actions[3:].tolist()
    assert not out[2:].any()


def test_dreams_are_required_below_q_one():
    trajectories = expert_trajectories(2)
    with raises(CheckpointError):
        PolicyDataset(trajectories, 4, 2, 3, 0.5)
    with raises(CheckpointError):
        train_policy(trajectories, tiny_config(policy={'q': 0.5}).policy, 4)


def test_dataset_batches():
    data = PolicyDataset(expert_trajectories(2), 4, 2, 3, 1.0)
    imagined, history, proprio, targets = data.sample(
        np.random.default_rng(0), 5)
    assert imagined.shape == (5, 4, SMALL, SMALL, 3)
    assert history.shape == (5, 2, SMALL, SMALL, 3)
    assert proprio.shape == (5, 3) and targets.shape == (5, 3, 3)
    assert np.all(np.abs(targets[..., :2]) <= 1.0 + 1e-6)


def test_training_and_checkpoint(tmp_path):
    config = tiny_config().policy
    trajectories = expert_trajectories(2)
    net, history = train_policy(trajectories, config, 4, seed=1)
    again, history_again = train_policy(trajectories, config, 4, seed=1)
    assert len(history) == config.iterations
    assert history == history_again
    assert net.checksum() == again.checksum()
    assert np.isfinite(evaluate_policy_loss(net, trajectories, config, 4))
    path = str(tmp_path / 'policy.ckpt')
    save_policy(path, net, {'q': config.q})
    back, meta = load_policy(path)
    assert back.checksum() == net.checksum() and meta['q'] == 1.0


def test_training_on_dreams():
    config = tiny_config(policy={'q': 0.0}).policy
    net, history = train_policy(expert_trajectories(2), config, 4,
                                tiny_world_model(), identity_codec(), seed=0)
    assert len(history) == config.iterations
    assert all(np.isfinite(history))
