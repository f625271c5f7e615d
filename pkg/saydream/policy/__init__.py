from saydream.policy.net import (PolicyInput, PolicyNet, input_names,
                                 predict_chunk, save_policy, load_policy)
from saydream.policy.train import (history_indices, history_window,
                                   train_policy, evaluate_policy_loss)
from saydream.policy.rollout import (EpisodeRecord, rollout, rollout_many,
                                     read_episode, write_episode)

__all__ = [
    'PolicyInput',
    'PolicyNet',
    'input_names',
    'predict_chunk',
    'save_policy',
    'load_policy',
    'history_indices',
    'history_window',
    'train_policy',
    'evaluate_policy_loss',
    'EpisodeRecord',
    'rollout',
    'rollout_many',
    'read_episode',
    'write_episode',
]
