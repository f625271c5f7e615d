"""
Few-step distillation of the teacher into a student with a latent
adversarial loss, a noise-weighted reconstruction loss at the student's
discrete levels, and a domain-adaptation reconstruction term at log-normal
levels within the same iteration.
"""
from __future__ import annotations
import json
import logging
from typing import Any, Callable, Dict, List, Optional, TextIO, Tuple
import numpy as np
from recordclass import RecordClass
from saydream.autodiff import Adam, Tensor
from saydream.config import DistillConfig
from saydream.diffusion.denoiser import (DenoiserNet, clone_denoiser,
                                         save_denoiser)
from saydream.diffusion.precond import (Conditioning, denoise, recon_loss,
                                        sample_sigma_lognormal)
from saydream.diffusion.schedule import DiscreteSchedule, discrete_sigma
from saydream.diffusion.teacher import ClipSet
from saydream.distill.discriminator import Discriminator, disc_scores
from saydream.distill.losses import disc_loss, gen_adv_loss
from saydream.errors import DivergenceError, NonFiniteError

logger = logging.getLogger(__name__)


class DistillBatchLosses(RecordClass):
    l_adv_d: float
    l_adv_g: float
    l_rec_distill: float
    l_rec_domain: float
    l_gen_total: float
    sigma_t: float
    sigma_prime: float


def disc_noise(x: np.ndarray, rng: np.random.Generator,
               sigma_prime: Optional[float] = None) -> Tuple[np.ndarray,
                                                              float]:
    """
    Diffuse `x` for the discriminator: x + sigma' * eps with
    log sigma' ~ N(0, 1) unless `sigma_prime` is given.
    """
    if (sigma_prime is None):
        sigma_prime = sample_sigma_lognormal(rng)
    return x + sigma_prime * rng.standard_normal(np.shape(x)), sigma_prime


def _checked(component: str, fn: Callable[[], Tensor]) -> Tensor:
    try:
        value = fn()
    except NonFiniteError as e:
        raise DivergenceError(f'{component} diverged: {e}')
    if (not np.all(np.isfinite(value.data))):
        raise DivergenceError(f'{component} diverged')
    return value


def distill_step(batch: Tuple[np.ndarray, Conditioning],
                 student: DenoiserNet, disc: Discriminator,
                 schedule: DiscreteSchedule, lam: float,
                 rng: np.random.Generator, student_optim: Adam,
                 head_optim: Adam) -> DistillBatchLosses:
    """
    One distillation iteration: a discriminator step on the detached
    student estimate, then a student step on
    lam * L_adv^G + L_rec(sigma_t) + L_rec(domain).

    Raises:
      DivergenceError: naming the loss component that became non-finite.
    """
    x0, cond = batch
    t = int(rng.integers(1, schedule.steps + 1))
    sigma_t = discrete_sigma(t, schedule)
    x_t = x0 + sigma_t * rng.standard_normal(x0.shape)
    x0_hat = _checked('student estimate',
                      lambda: denoise(x_t, sigma_t, cond, student))
    # real and fake share one sigma' with independent noise
    real_noised, sigma_p = disc_noise(x0, rng)
    fake_eps = rng.standard_normal(x0.shape)

    head_optim.zero_grad()
    l_d = _checked('l_adv_d', lambda: disc_loss(
        disc_scores(real_noised, sigma_p, cond, disc),
        disc_scores(x0_hat.data + sigma_p * fake_eps, sigma_p, cond, disc)))
    l_d.backward()
    head_optim.step()

    student_optim.zero_grad()
    l_g = _checked('l_adv_g', lambda: gen_adv_loss(
        disc_scores(x0_hat + sigma_p * fake_eps, sigma_p, cond, disc)))
    l_rec = _checked('l_rec_distill',
                     lambda: recon_loss(x0_hat, x0, sigma_t))
    sigma_d = sample_sigma_lognormal(rng, size=x0.shape[0])
    x_d = x0 + sigma_d.reshape(-1, 1, 1, 1, 1) * \
        rng.standard_normal(x0.shape)
    l_dom = _checked('l_rec_domain', lambda: recon_loss(
        denoise(x_d, sigma_d, cond, student), x0, sigma_d))
    total = _checked('l_gen_total', lambda: l_g * lam + l_rec + l_dom)
    total.backward()
    student_optim.step()
    # generator backward also reached the heads; they only train on L_D
    head_optim.zero_grad()
    return DistillBatchLosses(l_d.item(), l_g.item(), l_rec.item(),
                              l_dom.item(), total.item(), sigma_t, sigma_p)


class DistillTrainer:
    """
    Args:
      teacher: The trained teacher; the student starts as its copy and the
        discriminator backbone is a frozen copy.
      clips: The training clips.
      config: The distillation config section.
      schedule: The student's discrete levels.
      seed: Seed of head initialization and the training stream.
    """
    def __init__(self, teacher: DenoiserNet, clips: ClipSet,
                 config: DistillConfig, schedule: DiscreteSchedule,
                 seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.clips = clips
        self.config = config
        self.schedule = schedule
        self.student = clone_denoiser(teacher)
        self.disc = Discriminator(teacher, config.head_taps,
                                  config.head_channels, self.rng)
        self.student_optim = Adam(self.student.named_parameters(),
                                  lr=config.lr)
        self.head_optim = Adam(self.disc.head_parameters(), lr=config.lr)
        self.backbone_checksum = self.disc.backbone.checksum()
        self.history: List[DistillBatchLosses] = []

    def step(self) -> DistillBatchLosses:
        idx = self.rng.integers(0, len(self.clips),
                                size=self.config.batch_size)
        losses = distill_step(self.clips.batch(idx), self.student, self.disc,
                              self.schedule, self.config.lam, self.rng,
                              self.student_optim, self.head_optim)
        self.history.append(losses)
        return losses

    def run(self, iterations: int,
            log: Optional[TextIO] = None) -> List[DistillBatchLosses]:
        for it in range(1, iterations + 1):
            losses = self.step()
            if (log is not None):
                record = {'step': it}
                record.update(zip(DistillBatchLosses.__fields__, losses))
                log.write(json.dumps(record) + '\n')
            if (it % self.config.log_every == 0 or it == iterations):
                logger.info('distill step %d: D %.4f G %.4f rec %.4f '
                            'domain %.4f', it, losses.l_adv_d,
                            losses.l_adv_g, losses.l_rec_distill,
                            losses.l_rec_domain)
        return self.history

    def save(self, path: str, meta: Optional[Dict[str, Any]] = None) -> None:
        meta = dict(meta or {})
        meta.update({'kind': 'student', 'distill_steps': self.schedule.steps,
                     'iterations': len(self.history),
                     'backbone_checksum': self.disc.backbone.checksum(),
                     'trained': True})
        heads = {f'disc.{name}': p.data
                 for name, p in self.disc.head_parameters()}
        save_denoiser(path, 'student', self.student, meta, heads)
