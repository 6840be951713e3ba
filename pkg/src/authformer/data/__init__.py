from authformer.data.blob import decode_blob, encode_blob, read_blob, write_blob
from authformer.data.checkpoint import load_checkpoint, save_checkpoint
from authformer.data.dataset import Dataset, load_dataset, split_assignment, split_dataset
from authformer.data.manifest import DatasetManifest, ModalityDescriptor, SampleRecord
from authformer.data.synthetic import generate_synthetic, synthesize

__all__ = [
    "Dataset",
    "DatasetManifest",
    "ModalityDescriptor",
    "SampleRecord",
    "decode_blob",
    "encode_blob",
    "generate_synthetic",
    "load_checkpoint",
    "load_dataset",
    "read_blob",
    "save_checkpoint",
    "split_assignment",
    "split_dataset",
    "synthesize",
    "write_blob",
]
