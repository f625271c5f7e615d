# PYTHON_ARGCOMPLETE_OK
"""
The experiment runner. Every subcommand reads its inputs from and writes its
artifacts to the output directory, under the fixed names below.
"""
import json
import logging
import os
import sys
import time
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from saydream.args import command, commands, get_parser, option, step_list
from saydream.codec import Codec, frame_pool, round_trip_psnr, train_codec
from saydream.config import ExperimentConfig, content_hash, stage_seed
from saydream.diffusion.sampler import WorldModel, load_world_model
from saydream.diffusion.schedule import DiscreteSchedule
from saydream.diffusion.teacher import (TeacherTrainer, build_clip_set,
                                        evaluate_loss)
from saydream.diffusion.denoiser import load_denoiser
from saydream.distill.trainer import DistillTrainer
from saydream.errors import CheckpointError, DatasetError, SaydreamError, \
    error, warning
from saydream.export import export_video
from saydream.imagination import dream, training_clip
from saydream.metrics.frechet import frechet_feature_distance
from saydream.metrics.quality import clip_scores
from saydream.metrics.report import (build_report, quality_summary,
                                     score_videos, write_report)
from saydream.metrics.success import referring_success
from saydream import plot
from saydream.policy.net import load_policy, save_policy
from saydream.policy.rollout import read_episode, rollout_many, write_episode
from saydream.policy.train import evaluate_policy_loss, train_policy
from saydream.sim.dataset import (generate_dataset, make_tasks, read_dataset,
                                  read_header, split_holdout)
from saydream.sim.expert import run_expert
from saydream.sim.world import Color, TaskSpec

logger = logging.getLogger('saydream')

DATASET = 'dataset.sdds'
CODEC = 'codec.ckpt'
TEACHER = 'teacher.ckpt'
STUDENT = 'student.ckpt'
POLICY = 'policy.ckpt'
ROLLOUTS = 'rollouts'
REPORT = 'report.json'
ABLATION = 'ablation.json'


def _path(args, name: str) -> str:
    return os.path.join(args.out, name)


def _require(path: str) -> str:
    if (not os.path.exists(path)):
        raise DatasetError(path, 'missing input artifact')
    return path


def _hashes(*paths: str) -> Dict[str, str]:
    return {os.path.basename(p): content_hash(p) for p in paths}


def _meta(config: ExperimentConfig, *inputs: str) -> Dict[str, Any]:
    """The config echo and input hashes embedded into every artifact."""
    return {'config': config.to_dict(), 'inputs': _hashes(*inputs)}


def _write_json(path: str, data: Dict[str, Any]) -> None:
    try:
        with open(path, 'w') as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write('\n')
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))


def _open_log(path: str, mode: str = 'w'):
    try:
        return open(path, mode)
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))


def _plot(name: str, *args: Any) -> None:
    """Call the named `saydream.plot` function if matplotlib is present."""
    try:
        getattr(plot, name)(*args)
    except ImportError:
        warning('matplotlib is not installed, skipping the plot')
    except DatasetError as e:
        warning(f'skipping the plot: {e}')


PLOT = option('--plot', action='store_true',
              help='Also plot the training losses (needs matplotlib)')


def _dataset(args, config: ExperimentConfig):
    trajectories = read_dataset(_require(_path(args, DATASET)))
    return split_holdout(trajectories, config.env.holdout_fraction)


def _codec(args) -> Tuple[Codec, str]:
    path = _require(_path(args, CODEC))
    codec, _ = Codec.load(path)
    return codec, path


def _world_model(args, config: ExperimentConfig,
                 kind: Optional[str] = None) -> Tuple[WorldModel, str]:
    kind = kind if kind is not None else config.eval.world_model
    if (kind not in ('teacher', 'student')):
        raise CheckpointError(f'unknown world model "{kind}"')
    path = _path(args, STUDENT if kind == 'student' else TEACHER)
    if (not os.path.exists(path)):
        raise CheckpointError(f'{path}: no {kind} world-model checkpoint')
    wm = config.wm
    return load_world_model(path, wm.sample_steps, wm.p, wm.sigma_min,
                            wm.sigma_max, content_hash(path)), path


@command('gen-data', 'Record expert episodes into the dataset file')
def gen_data(args, config: ExperimentConfig) -> str:
    path = _path(args, DATASET)
    trajectories = generate_dataset(config.env.episodes, config, path)
    _write_json(path + '.json', _meta(config))
    count, height, width = read_header(path)
    done = sum(t.success() for t in trajectories)
    return (f'gen-data: {count} episodes ({height}x{width}), {done} '
            f'successful, mean length '
            f'{np.mean([t.length for t in trajectories]):.1f} -> {path}')


@command('train-codec', 'Fit the per-frame latent codec')
def train_codec_cmd(args, config: ExperimentConfig) -> str:
    data = _require(_path(args, DATASET))
    train, held = _dataset(args, config)
    cfg = config.codec
    rng = np.random.default_rng(stage_seed(config.seed, 'train-codec'))
    codec = Codec(cfg.factor, rng, orthogonal=cfg.init == 'orthogonal')
    codec, history = train_codec(frame_pool(train), cfg.epochs, cfg.lr,
                                 cfg.batch_size, cfg.factor, rng, codec)
    psnr = round_trip_psnr(codec, frame_pool(held))
    path = _path(args, CODEC)
    meta = _meta(config, data)
    meta.update({'history': history, 'holdout_psnr': psnr})
    codec.save(path, meta)
    return f'train-codec: held-out round trip {psnr:.2f} dB -> {path}'


@command('train-teacher', 'Train the multi-step diffusion world model',
         option('--resume', action='store_true',
                help='Continue from the teacher checkpoint in the output '
                'directory'),
         PLOT)
def train_teacher_cmd(args, config: ExperimentConfig) -> str:
    data = _require(_path(args, DATASET))
    codec, codec_path = _codec(args)
    train, held = _dataset(args, config)
    clips = build_clip_set(train, codec, config.wm.n_frames)
    path = _path(args, TEACHER)
    if (args.resume):
        trainer = TeacherTrainer.resume(_require(path), clips, config.wm)
    else:
        trainer = TeacherTrainer(clips, config.wm,
                                 stage_seed(config.seed, 'train-teacher'))
    meta = _meta(config, data, codec_path)
    log_path = _path(args, 'teacher_log.jsonl')
    with _open_log(log_path, 'a' if args.resume else 'w') as log:
        trainer.run(config.wm.iterations, path, log, meta)
    if (args.plot):
        _plot('plot_losses', log_path, _path(args, 'teacher_loss.png'))
    held_clips = build_clip_set(held, codec, config.wm.n_frames)
    loss = evaluate_loss(trainer.net, held_clips, np.random.default_rng(
        stage_seed(config.seed, 'teacher-holdout')))
    return (f'train-teacher: {trainer.step_count} steps, held-out loss '
            f'{loss:.5f} -> {path}')


@command('distill', 'Distill the teacher into a few-step student', PLOT)
def distill_cmd(args, config: ExperimentConfig) -> str:
    data = _require(_path(args, DATASET))
    codec, codec_path = _codec(args)
    teacher_path = _require(_path(args, TEACHER))
    teacher, _, _ = load_denoiser(teacher_path)
    train, _ = _dataset(args, config)
    clips = build_clip_set(train, codec, teacher.n_frames)
    wm, cfg = config.wm, config.distill
    schedule = DiscreteSchedule(cfg.steps, wm.p, wm.sigma_min, wm.sigma_max)
    trainer = DistillTrainer(teacher, clips, cfg, schedule,
                             stage_seed(config.seed, 'distill'))
    log_path = _path(args, 'distill_log.jsonl')
    with _open_log(log_path) as log:
        history = trainer.run(cfg.iterations, log)
    if (args.plot):
        _plot('plot_losses', log_path, _path(args, 'distill_loss.png'),
              ['l_adv_d', 'l_adv_g', 'l_rec_distill', 'l_rec_domain'])
    path = _path(args, STUDENT)
    trainer.save(path, _meta(config, data, codec_path, teacher_path))
    last = history[-1] if history else None
    total = 'n/a' if last is None else f'{last.l_gen_total:.5f}'
    return (f'distill: {len(history)} iterations, {cfg.steps} steps, final '
            f'generator loss {total} -> {path}')


@command('train-policy', 'Behavior-clone the action model', PLOT)
def train_policy_cmd(args, config: ExperimentConfig) -> str:
    data = _require(_path(args, DATASET))
    train, held = _dataset(args, config)
    cfg = config.policy
    wm, codec, inputs = None, None, [data]
    if (cfg.q < 1.0):
        wm, wm_path = _world_model(args, config)
        codec, codec_path = _codec(args)
        inputs += [codec_path, wm_path]
    seed = stage_seed(config.seed, 'train-policy')
    log_path = _path(args, 'policy_log.jsonl')
    with _open_log(log_path) as log:
        net, history = train_policy(train, cfg, config.wm.n_frames, wm, codec,
                                    seed, log)
    if (args.plot):
        _plot('plot_losses', log_path, _path(args, 'policy_loss.png'))
    held_loss = evaluate_policy_loss(net, held, cfg, config.wm.n_frames, seed)
    path = _path(args, POLICY)
    meta = _meta(config, *inputs)
    meta.update({'train_loss': history[-1] if history else None,
                 'holdout_loss': held_loss})
    save_policy(path, net, meta)
    return (f'train-policy: final loss {meta["train_loss"]}, held-out chunk '
            f'mse {held_loss:.5f} -> {path}')


def _shifted(task: TaskSpec, colors: List[Color]) -> TaskSpec:
    """The same task with the next configured target color."""
    color = colors[(colors.index(task.target_color) + 1) % len(colors)]
    return TaskSpec(color, task.num_distractors, task.layout_seed,
                    task.max_steps)


@command('rollout', 'Run the policy closed-loop in the simulator',
         option('--wrong-dream', action='store_true',
                help='Imagine the task with a different target color'))
def rollout_cmd(args, config: ExperimentConfig) -> str:
    policy_path = _require(_path(args, POLICY))
    policy, _ = load_policy(policy_path)
    wm, wm_path = _world_model(args, config)
    codec, codec_path = _codec(args)
    tasks = make_tasks(config.eval.episodes, config, 'rollout')
    dream_tasks = None
    if (args.wrong_dream):
        colors = [Color.parse(c) for c in config.env.colors]
        dream_tasks = [_shifted(t, colors) for t in tasks]
    records = rollout_many(tasks, policy, wm, codec, config.policy,
                           stage_seed(config.seed, 'rollout'), config.workers,
                           dream_tasks, config.env.height, config.env.width)
    out_dir = _path(args, ROLLOUTS)
    os.makedirs(out_dir, exist_ok=True)
    meta = _meta(config, policy_path, wm_path, codec_path)
    for i, record in enumerate(records):
        record.meta.update(meta)
        write_episode(os.path.join(out_dir, f'episode_{i:04d}.sdep'), record)
    success = 100.0 * np.mean([r.success for r in records])
    referring = 100.0 * np.mean([
        referring_success(r.trajectory.frames, t, config=config.eval)
        for r, t in zip(records, tasks)])
    summary = dict(meta, success_rate=success, referring_rate=referring,
                   wrong_dream=args.wrong_dream, episodes=len(records))
    _write_json(os.path.join(out_dir, 'summary.json'), summary)
    return (f'rollout: {len(records)} episodes, success {success:.1f}%, '
            f'referring {referring:.1f}% -> {out_dir}')


def _dream_clips(trajectories, wm: WorldModel, codec: Codec,
                 seed: int) -> np.ndarray:
    clips = []
    for i, traj in enumerate(trajectories):
        rng = np.random.default_rng([seed, i])
        clips.append(dream(traj.frames[0], traj.task, wm, codec,
                           rng=rng).frames)
    return np.stack(clips)


@command('evaluate', 'Score videos with the embodiment and success metrics',
         option('--source', choices=('dream', 'expert', 'rollout'),
                default=None, help='The videos to score (default: '
                'eval.source of the config)'))
def evaluate_cmd(args, config: ExperimentConfig) -> str:
    source = args.source or config.eval.source
    count = config.eval.episodes
    quality, inputs = None, []
    if (source == 'expert'):
        tasks = make_tasks(count, config, 'evaluate')
        videos = [run_expert(t, config.env.height, config.env.width).frames
                  for t in tasks]
    elif (source == 'rollout'):
        out_dir = _require(_path(args, ROLLOUTS))
        names = sorted(f for f in os.listdir(out_dir) if f.endswith('.sdep'))
        records = [read_episode(os.path.join(out_dir, f))
                   for f in names[:count]]
        tasks = [r.trajectory.task for r in records]
        videos = [r.trajectory.frames for r in records]
        inputs = [os.path.join(out_dir, f) for f in names[:count]]
    else:
        _, held = _dataset(args, config)
        held = held[:count]
        wm, wm_path = _world_model(args, config)
        codec, codec_path = _codec(args)
        tasks = [t.task for t in held]
        videos = list(_dream_clips(held, wm, codec,
                                   stage_seed(config.seed, 'evaluate')))
        truth = np.stack([training_clip(t, wm.n_frames).frames for t in held])
        quality = quality_summary(np.stack(videos), truth, config.eval)
        inputs = [_path(args, DATASET), wm_path, codec_path]
    rows = score_videos(videos, tasks, config.eval, workers=config.workers)
    report = build_report(rows, config.to_dict(), _hashes(*inputs), quality)
    path = _path(args, REPORT)
    write_report(path, report)
    agg = report.aggregates
    return (f'evaluate ({source}): EC {agg["ec"]:.2f}, RSR {agg["rsr"]:.1f}%, '
            f'ISR {agg["isr"]:.1f}%, TCR {agg["tcr"]:.1f}% -> {path}')


def ablate_steps(wm: WorldModel, codec: Codec, trajectories,
                 steps_list: Tuple[int, ...], seed: int,
                 ffd_seed: int = 1234,
                 ffd_dims: int = 64) -> List[Dict[str, Any]]:
    """
    Sample the same (first frame, task) pairs with every step count and
    compare against their ground-truth clips.

    Returns:
      One row {steps, time, ffd, ssim, psnr} per step count, `time` being
      the mean wall-clock seconds per clip.
    """
    truth = np.stack([training_clip(t, wm.n_frames).frames
                      for t in trajectories])
    rows = []
    for steps in steps_list:
        model = wm.with_steps(steps)
        start = time.perf_counter()
        clips = _dream_clips(trajectories, model, codec, seed)
        elapsed = (time.perf_counter() - start) / len(trajectories)
        scores = clip_scores(clips, truth)
        ffd = None
        if (len(clips) >= 2):
            ffd, _ = frechet_feature_distance(clips, truth, ffd_seed,
                                              ffd_dims)
        rows.append({'steps': steps, 'time': elapsed, 'ffd': ffd,
                     'ssim': float(scores[:, 0].mean()),
                     'psnr': float(scores[:, 1].mean())})
        logger.info('ablation %d steps: ssim %.4f psnr %.2f (%.3fs/clip)',
                    steps, rows[-1]['ssim'], rows[-1]['psnr'], elapsed)
    return rows


@command('ablate-steps', 'Compare sample quality across denoise step counts',
         option('--steps', type=step_list, default=None, metavar='LIST',
                help='Comma separated step counts (default: '
                'eval.ablation_steps of the config)'),
         option('--plot', action='store_true',
                help='Also plot the table (needs matplotlib)'))
def ablate_steps_cmd(args, config: ExperimentConfig) -> str:
    steps_list = args.steps or tuple(config.eval.ablation_steps)
    wm, wm_path = _world_model(args, config, 'teacher')
    codec, codec_path = _codec(args)
    _, held = _dataset(args, config)
    held = held[:config.eval.ablation_clips]
    rows = ablate_steps(wm, codec, held, steps_list,
                        stage_seed(config.seed, 'ablate-steps'),
                        config.eval.ffd_seed, config.eval.ffd_dims)
    path = _path(args, ABLATION)
    _write_json(path, dict(_meta(config, _path(args, DATASET), wm_path,
                                 codec_path), rows=rows))
    if (args.plot):
        _plot('plot_ablation', rows, _path(args, 'ablation.png'))
    table = ', '.join(f'{r["steps"]}: {r["ssim"]:.3f}' for r in rows)
    return f'ablate-steps: ssim by steps {table} -> {path}'


@command('export-video', 'Export an episode record as pixmaps and a GIF',
         option('--clip', type=str, default=None, metavar='PATH',
                help='The episode record to export (default: the first '
                'rollout episode)'),
         option('--executed', action='store_true',
                help='Export the executed episode instead of the imagined '
                'clip'),
         option('--no-gif', dest='gif', action='store_false',
                help='Only write the pixmaps'))
def export_video_cmd(args, config: ExperimentConfig) -> str:
    path = args.clip or _path(args, os.path.join(ROLLOUTS,
                                                 'episode_0000.sdep'))
    record = read_episode(_require(path))
    if (args.executed or record.clip is None):
        frames, stem = record.trajectory.frames, 'executed'
    else:
        frames, stem = record.clip.frames, 'imagined'
    out_dir = _path(args, 'video')
    paths = export_video(list(frames), out_dir, stem, args.gif)
    return f'export-video: {len(paths)} files -> {out_dir}'


def main(argv: Optional[List[str]] = None) -> int:
    args = get_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s',
                        stream=sys.stderr)
    try:
        config = ExperimentConfig.load(args.config, args.seed)
        os.makedirs(args.out, exist_ok=True)
        summary = commands[args.command].fn(args, config)
    except (SaydreamError, OSError) as e:
        error(e)
    print(summary)
    return 0


if __name__ == "__main__":
    main()
