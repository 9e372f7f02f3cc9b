from .tools import (
    atomic_write_bytes,
    counter_rng,
    finite_difference_check,
    require_finite,
    seed_everything,
    sha256_bytes,
    sha256_file,
    torch_generator,
)

__all__ = ['require_finite', 'counter_rng', 'torch_generator', 'seed_everything',
           'finite_difference_check', 'sha256_bytes', 'sha256_file', 'atomic_write_bytes']
