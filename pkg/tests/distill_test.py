import numpy as np
from pytest import approx, raises
from pytest import mark as pytestr
from saydream.autodiff import Tensor, param_grad_check
from saydream.autodiff.nn import Parameter
from saydream.diffusion import Conditioning, DiscreteSchedule, load_world_model
from saydream.diffusion.denoiser import DenoiserNet
from saydream.diffusion.teacher import build_clip_set
from saydream.distill.discriminator import Discriminator, disc_scores
from saydream.distill.losses import disc_loss, gen_adv_loss
from saydream.distill.trainer import DistillTrainer, _checked, disc_noise
from saydream.errors import DivergenceError, ShapeError
from tests.helper import (expert_trajectories, identity_codec, tiny_config,
                          tiny_world_model)


def test_hinge_losses():
    scores = np.array([0.5, -2.0])
    assert disc_loss([-scores], [scores]).item() == approx(0.75 + 0.75)
    assert gen_adv_loss([scores]).item() == approx(0.75)
    two = disc_loss([np.ones(2), np.zeros(3)], [-np.ones(2), np.zeros(3)])
    assert two.item() == approx((0.0 + 2.0) / 2)


def test_hinge_loss_errors():
    with raises(ShapeError):
        disc_loss([np.zeros(2)], [np.zeros(3)])
    with raises(ValueError):
        disc_loss([np.zeros(2)], [np.zeros(2), np.zeros(2)])
    with raises(ValueError):
        gen_adv_loss([])


@pytestr.parametrize('taps', [[], [2], [-1]])
def test_taps_must_name_blocks(taps):
    with raises(ValueError):
        Discriminator(tiny_world_model().net, taps)


def test_score_maps():
    net = tiny_world_model().net
    disc = Discriminator(net, [0, 1], head_channels=4)
    assert not any(p.requires_grad for p in disc.backbone.parameters())
    assert all(p.requires_grad for _, p in disc.head_parameters())
    latent = identity_codec().encode(expert_trajectories(1)[0].frames[0])
    cond = Conditioning.single(latent, 0, 4)
    scores = disc_scores(np.zeros(cond.clip_shape()), 2.0, cond, disc)
    assert [s.shape for s in scores] == [(1, 1, 4, 4, 4)] * 2
    with raises(ShapeError):
        disc_scores(np.zeros((1, 3, 16, 8, 8)), 2.0, cond, disc)


def test_score_gradients_reach_heads_and_input():
    rng = np.random.default_rng(6)
    net = DenoiserNet(2, (4, 4), width=8, heads=2, blocks=2, rng=rng)
    disc = Discriminator(net, [1], head_channels=4, rng=rng)
    cond = Conditioning(rng.normal(size=(1, 16, 4, 4)), np.array([1]), 2)
    latent = Parameter(rng.normal(size=(1, 2, 16, 4, 4)))

    def loss():
        return sum((s ** 2).mean() for s in disc_scores(latent, 1.5, cond,
                                                        disc))

    params = [latent] + [p for _, p in disc.head_parameters()]
    assert param_grad_check(loss, params, max_coords=4, rng=rng,
                            floor=1e-6) < 1e-3
    # frame 0 is replaced by the conditioning latent
    assert np.all(latent.grad[:, 0] == 0.0)
    assert np.any(latent.grad[:, 1] != 0.0)


def test_divergence_check_covers_whole_tensors():
    estimate = Tensor(np.ones((2, 3)))
    assert _checked(estimate, lambda: estimate) is estimate
    bad = np.ones((2, 3))
    bad[1, 2] = np.nan
    with raises(DivergenceError) as err:
        _checked(estimate, lambda: Tensor(bad))
    assert estimate in str(err.value)


def test_disc_noise_shares_the_level():
    x = np.zeros((2, 3))
    noised, sigma = disc_noise(x, np.random.default_rng(0), 0.5)
    assert sigma == 0.5 and noised.shape == (2, 3)
    _, drawn = disc_noise(x, np.random.default_rng(0))
    assert drawn > 0.0


def test_distillation(tmp_path):
    teacher = tiny_world_model().net
    before = teacher.checksum()
    clips = build_clip_set(expert_trajectories(4), identity_codec(), 4)
    cfg = tiny_config().distill
    trainer = DistillTrainer(teacher, clips, cfg, DiscreteSchedule(cfg.steps),
                             seed=2)
    history = trainer.run(2)
    assert len(history) == 2
    for losses in history:
        assert losses.l_gen_total == approx(
            cfg.lam * losses.l_adv_g + losses.l_rec_distill +
            losses.l_rec_domain)
        assert losses.sigma_t in DiscreteSchedule(cfg.steps).levels()
    assert trainer.disc.backbone.checksum() == trainer.backbone_checksum
    assert teacher.checksum() == before
    assert trainer.student.checksum() != before
    path = str(tmp_path / 'student.ckpt')
    trainer.save(path)
    student = load_world_model(path, sample_steps=35)
    assert (student.kind, student.schedule.steps) == ('student', cfg.steps)
    assert student.net.checksum() == trainer.student.checksum()
