from .dataset import Dataset, load_dataset, save_dataset
from .split import assign, split, split_key
from .synth import PROFILE_AUDIO, synth_dataset
from .wav import (
    V12_CLASSES,
    V12_COMMANDS,
    V35_COMMANDS,
    encode_wav,
    load_wav_dir,
    parse_wav,
    read_wav,
    write_wav,
)

__all__ = [
    "PROFILE_AUDIO",
    "V12_CLASSES",
    "V12_COMMANDS",
    "V35_COMMANDS",
    "Dataset",
    "assign",
    "encode_wav",
    "load_dataset",
    "load_wav_dir",
    "parse_wav",
    "read_wav",
    "save_dataset",
    "split",
    "split_key",
    "synth_dataset",
    "write_wav",
]
