"""Source-free domain adaptation on frozen-encoder embeddings.

Zero-shot classification from precomputed text/video embeddings, adapter
training on source labels and filtered pseudo-labels, and distillation of
the three-headed teacher ensemble into a student-space adapter.
"""

from .adapter import (
    Adapter,
    adapter_backward,
    adapter_forward,
    init_adapter,
    load_adapter,
    save_adapter,
)
from .dataio import (
    BenchmarkManifest,
    EmbeddingDataset,
    VideoRecord,
    align_by_id,
    load_embeddings,
    load_manifest,
    load_text_bank,
    save_embeddings,
    save_manifest,
    save_text_bank,
)
from .kernels import cross_entropy, finite_diff_grad, kl_div, l2_normalize, softmax
from .losses import blended_distill_loss, similarity_kl_loss, tempered_distill_kl
from .optim import AdamWState, adamw_step
from .pipeline import (
    TeacherBundle,
    TrainConfig,
    adapt_target,
    distill,
    evaluate,
    train_source_adapter,
)
from .pseudolabel import (
    EnsembleBundle,
    PseudoLabelSet,
    ensemble_average,
    filter_by_class_percentile,
    majority_vote,
)
from .synth import SynthConfig, generate_benchmark
from .textspace import (
    ClassPrototypes,
    TextBank,
    VideoPrediction,
    build_prototypes,
    frame_probs,
    video_probs,
    zeroshot_classify,
)

__version__ = "0.1.0"
