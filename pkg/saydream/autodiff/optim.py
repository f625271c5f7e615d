from typing import Dict, Iterable, Optional, Tuple
import numpy as np
from deprecated.sphinx import versionadded
from saydream.autodiff.nn import Parameter
from saydream.errors import MissingGradError


class AdamState:
    """
    First/second moment buffers (keyed by parameter name), the step counter
    and the hyper-parameters of an Adam optimizer.
    """
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.step = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay

    def arrays(self) -> Dict[str, np.ndarray]:
        """Moment buffers flattened for checkpointing."""
        out = {f'adam.m.{k}': v for k, v in self.m.items()}
        out.update({f'adam.v.{k}': v for k, v in self.v.items()})
        return out

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for key, value in arrays.items():
            if (key.startswith('adam.m.')):
                self.m[key[len('adam.m.'):]] = np.array(value)
            elif (key.startswith('adam.v.')):
                self.v[key[len('adam.v.'):]] = np.array(value)


def adam_step(params: Dict[str, Parameter], state: AdamState) -> None:
    """
    Apply one bias-corrected Adam update (decoupled weight decay when
    ``state.weight_decay`` > 0) and zero the gradients afterwards.

    Raises:
      MissingGradError: if any parameter holds no gradient.
    """
    for name, p in params.items():
        if (p.grad is None):
            raise MissingGradError(f'parameter "{name}" has no gradient')
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = p.grad
        m = state.m.get(name)
        v = state.v.get(name)
        if (m is None or v is None):
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        data = p.data
        if (state.weight_decay > 0.0):
            data = data - state.lr * state.weight_decay * data
        p.data = data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.grad = np.zeros_like(p.data)


class Adam:
    """Adam over a fixed, named set of parameters."""
    def __init__(self, named_params: Iterable[Tuple[str, Parameter]],
                 lr: float = 1e-3, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params: Dict[str, Parameter] = dict(named_params)
        self.state = AdamState(lr, betas[0], betas[1], eps, weight_decay)
        self.base_lr = lr

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = np.zeros_like(p.data)

    def step(self) -> None:
        adam_step(self.params, self.state)


class ConstantSchedule:
    def __call__(self, step: int) -> float:
        return 1.0


@versionadded(version='0.2.0')
class LambdaLinearSchedule:
    """
    Cyclic learning-rate multiplier: linear warm-up from `f_start` to `f_max`
    over `warm_up` steps, then a linear decay from `f_max` to `f_min` across
    each cycle of `cycle_length` steps.
    """
    def __init__(self, warm_up: int = 0, cycle_length: int = 1000,
                 f_start: float = 1e-6, f_max: float = 0.6,
                 f_min: float = 0.0):
        self.warm_up = warm_up
        self.cycle_length = cycle_length
        self.f_start = f_start
        self.f_max = f_max
        self.f_min = f_min

    def __call__(self, step: int) -> float:
        if (step < self.warm_up):
            return self.f_start + (self.f_max - self.f_start) * \
                step / self.warm_up
        pos = (step - self.warm_up) % self.cycle_length
        return self.f_min + (self.f_max - self.f_min) * \
            (self.cycle_length - pos) / self.cycle_length


def get_schedule(name: str, cycle_length: Optional[int] = None):
    if (name == 'constant'):
        return ConstantSchedule()
    elif (name == 'lambda_linear'):
        return LambdaLinearSchedule(cycle_length=cycle_length or 1000)
    raise ValueError(f'Unknown learning-rate schedule "{name}"')
