"""Mixed-type tabular synthesis: an autoencoder maps rows to a continuous latent
space, and a score-based diffusion model (or a GAN) learns to sample it."""

from .autoencoder import AutoencoderModel, AutoencoderSpec, decode, encode, train_autoencoder
from .diffusion import DiffusionBundle, SamplerConfig, euler_maruyama_sample, train_diffusion
from .gan import GanModel, GanSpec, gan_sample, train_gan
from .pipeline import RunConfig, evaluate, fit, generate, load_run, sample
from .schema import TableSchema, infer_schema, postprocess, preprocess, read_csv
from .scorenet import ScoreNetSpec
from .sde import SdeConfig

__version__ = "0.1.0"
