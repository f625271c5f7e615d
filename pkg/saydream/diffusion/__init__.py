from saydream.diffusion.precond import (NoiseBundle, Conditioning,
                                        precondition, apply_first_frame_cond,
                                        denoise, sample_sigma_lognormal,
                                        recon_loss)
from saydream.diffusion.schedule import DiscreteSchedule, discrete_sigma
from saydream.diffusion.denoiser import DenoiserNet
from saydream.diffusion.sampler import (WorldModel, restart_sample,
                                        sample_teacher, sample_student,
                                        load_world_model)

__all__ = [
    'NoiseBundle',
    'Conditioning',
    'precondition',
    'apply_first_frame_cond',
    'denoise',
    'sample_sigma_lognormal',
    'recon_loss',
    'DiscreteSchedule',
    'discrete_sigma',
    'DenoiserNet',
    'WorldModel',
    'restart_sample',
    'sample_teacher',
    'sample_student',
    'load_world_model',
]
