from .curation import CuratedDataset, Segment, delta_curate
from .io import SubjectManifest, load_recordings, read_manifest, write_subject
from .patches import PatchGrid, make_patches, patch_view
from .preprocess import PreprocessConfig, bandpass_filtfilt, decimate_to, median_reference, preprocess
from .recording import Recording
from .synth import SynthSpec, synth_generate, synth_recording, synth_subject

__all__ = [
    "CuratedDataset",
    "PatchGrid",
    "PreprocessConfig",
    "Recording",
    "Segment",
    "SubjectManifest",
    "SynthSpec",
    "bandpass_filtfilt",
    "decimate_to",
    "delta_curate",
    "load_recordings",
    "make_patches",
    "median_reference",
    "patch_view",
    "preprocess",
    "read_manifest",
    "synth_generate",
    "synth_recording",
    "synth_subject",
    "write_subject",
]
