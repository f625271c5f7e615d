from saydream.distill.losses import disc_loss, gen_adv_loss
from saydream.distill.discriminator import Discriminator, disc_scores
from saydream.distill.trainer import (DistillBatchLosses, DistillTrainer,
                                      disc_noise, distill_step)

__all__ = [
    'disc_loss',
    'gen_adv_loss',
    'Discriminator',
    'disc_scores',
    'DistillBatchLosses',
    'DistillTrainer',
    'disc_noise',
    'distill_step',
]
