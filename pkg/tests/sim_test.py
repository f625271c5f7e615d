import math
import numpy as np
from pytest import approx, raises
from pytest import mark as pytestr
from saydream.errors import DatasetError, LayoutError
from saydream.sim import (Action, Block, Color, TaskSpec, WorldState, render,
                          reset, run_expert, step, success)
from saydream.sim.dataset import (dataset_bytes, make_tasks, parse_dataset,
                                  read_dataset, read_header, split_holdout,
                                  write_dataset)
from saydream.sim.render import GRIPPER_RGB, TABLE_RGB, glyph_box
from saydream.sim.world import BOX_REGION, HOME
from tests.helper import SMALL, expert_trajectories, tiny_config


def _same_trajectory(a, b):
    return (tuple(a.task) == tuple(b.task) and
            a.block_colors == b.block_colors and
            a.box_region == b.box_region and
            np.array_equal(a.frames, b.frames) and
            np.array_equal(a.actions, b.actions) and
            np.array_equal(a.annotations, b.annotations))


@pytestr.randomize(seed=int, min_num=0, max_num=2 ** 31, ncalls=5)
def test_reset_is_deterministic(seed):
    task = TaskSpec(Color.BLUE, 3, seed)
    first, second = reset(task), reset(task)
    assert first == second
    assert first.blocks[0].color == Color.BLUE
    colors = [b.color for b in first.blocks]
    assert len(set(colors)) == len(colors) == 4
    for a in first.blocks:
        assert math.dist((a.x, a.y), HOME) >= 0.15
        for b in first.blocks:
            if (a.id < b.id):
                assert math.dist((a.x, a.y), (b.x, b.y)) >= 0.18


@pytestr.parametrize('distractors', [0, 4])
def test_invalid_distractor_count(distractors):
    with raises(LayoutError):
        reset(TaskSpec(Color.RED, distractors, 0))


def test_step_is_pure_and_clamped():
    state = reset(TaskSpec(Color.RED, 1, 4))
    before = state.copy()
    after = step(state, Action(0.1, -0.2, 0.0))
    assert state == before
    assert after.gripper == approx((HOME[0] + 0.05, HOME[1] - 0.05))
    assert after.step_count == 1
    with raises(ValueError):
        step(state, Action(float('nan'), 0.0, 0.0))


def test_grasp_carries_the_block():
    block = Block(0, Color.RED, 0.3, 0.3)
    state = WorldState((0.31, 0.3), True, None, [block])
    state = step(state, Action(0.0, 0.0, 1.0))
    assert state.held == 0 and not state.gripper_open
    state = step(state, Action(0.02, 0.01, 1.0))
    assert (state.block(0).x, state.block(0).y) == approx((0.33, 0.31))
    state = step(state, Action(0.0, 0.0, 0.0))
    assert state.held is None and state.gripper_open


def test_success_needs_release_inside_the_box():
    task = TaskSpec(Color.GREEN, 1, 0)
    inside = Block(0, Color.GREEN, 0.78, 0.22)
    assert success(WorldState((0.5, 0.5), True, None, [inside]), task)
    assert not success(WorldState((0.78, 0.22), False, 0, [inside]), task)
    outside = Block(0, Color.GREEN, 0.2, 0.5)
    assert not success(WorldState((0.5, 0.5), True, None, [outside]), task)


@pytestr.parametrize('color', list(Color))
@pytestr.parametrize('distractors', [1, 2, 3])
def test_expert_solves_every_task(color, distractors):
    traj = run_expert(TaskSpec(color, distractors, 17), SMALL, SMALL)
    assert traj.success()
    assert traj.length < traj.task.max_steps
    assert traj.frames.shape == (traj.length + 1, SMALL, SMALL, 3)
    assert traj.state_at(traj.length).held is None


def test_render_draws_the_gripper_on_top():
    blocks = [Block(0, Color.RED, 0.1, 0.1)]
    frame = render(WorldState((0.5, 0.5), True, None, blocks), SMALL, SMALL)
    assert frame.shape == (SMALL, SMALL, 3)
    assert tuple(frame[6, 6]) == GRIPPER_RGB
    assert tuple(frame[7, 7]) == TABLE_RGB
    assert glyph_box(0.5, 0.5, SMALL, SMALL) == (6, 6, 9, 10)
    assert glyph_box(0.0, 0.0, SMALL, SMALL, margin=1) == (0, 0, 2, 3)
    assert frame.min() >= 0.0 and frame.max() <= 1.0


def test_color_names():
    assert Color.parse('Yellow') is Color.YELLOW
    assert Color.GREEN.label() == 'green'
    with raises(ValueError):
        Color.parse('purple')


def test_make_tasks_balances_colors():
    tasks = make_tasks(8, tiny_config())
    assert [t.target_color for t in tasks] == list(Color) * 2
    assert all(1 <= t.num_distractors <= 3 for t in tasks)
    assert [tuple(t) for t in tasks] == \
        [tuple(t) for t in make_tasks(8, tiny_config())]
    with raises(ValueError):
        make_tasks(0, tiny_config())


def test_dataset_file_round_trip(tmp_path):
    trajectories = expert_trajectories(3)
    path = str(tmp_path / 'dataset.sdds')
    write_dataset(path, trajectories, SMALL, SMALL)
    assert read_header(path) == (3, SMALL, SMALL)
    back = read_dataset(path)
    assert len(back) == 3
    assert all(_same_trajectory(a, b) for a, b in zip(trajectories, back))
    assert back[0].box_region == approx(BOX_REGION)


def test_damaged_datasets_are_rejected(tmp_path):
    data = dataset_bytes(expert_trajectories(1), SMALL, SMALL)
    with raises(DatasetError):
        parse_dataset(data[:-7])
    with raises(DatasetError):
        parse_dataset(b'XXXX' + data[4:])
    with raises(DatasetError) as err:
        read_dataset(str(tmp_path / 'missing.sdds'))
    assert err.value.path.endswith('missing.sdds')


def test_split_holdout():
    items = list(range(10))
    train, held = split_holdout(items, 0.2)
    assert (train, held) == (items[:8], items[8:])
    assert split_holdout(items, 0.0)[1] == [9]
    assert split_holdout([1], 0.5) == ([1], [1])
