from .encoders import EncoderArch, EncoderModel, encode, make_arch
from .io import load_encoder, save_encoder
from .training import TrainConfig, train_encoder

__all__ = ["EncoderArch", "EncoderModel", "TrainConfig", "encode", "load_encoder",
           "make_arch", "save_encoder", "train_encoder"]
