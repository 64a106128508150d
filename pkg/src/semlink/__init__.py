"""semlink: a semantic test oracle for hyperlinks.

Checks whether a link's target page still fulfils the promise its source
context makes, catching the soft link rot (error pages and drifted
content served with HTTP 200) that status-code checkers cannot see.
"""

from .corpus import (
    CorpusPair,
    CorpusSplit,
    HyperlinkContext,
    Label,
    LinkKind,
    PageContent,
    RejectReason,
    clean_pair,
    read_corpus,
    split_corpus,
    write_corpus,
)
from .embedding import (
    EMBED_DIM,
    EmbeddingCache,
    HashProvider,
    RemoteProvider,
    hash_embed,
    remote_embed,
)
from .oracle import (
    DEFAULT_THRESHOLD,
    Decision,
    FeatureKind,
    FeatureText,
    Verdict,
    batch_verify,
    score_pair,
    weight_of,
)
from .siamese import (
    SiameseModel,
    TrainConfig,
    TrainingTriplet,
    bce_loss,
    forward,
    load_model,
    save_model,
    total_loss,
    train,
    triplet_loss,
)

__version__ = "0.1.0"

__all__ = [
    "CorpusPair",
    "CorpusSplit",
    "HyperlinkContext",
    "Label",
    "LinkKind",
    "PageContent",
    "RejectReason",
    "clean_pair",
    "read_corpus",
    "split_corpus",
    "write_corpus",
    "EMBED_DIM",
    "EmbeddingCache",
    "HashProvider",
    "RemoteProvider",
    "hash_embed",
    "remote_embed",
    "DEFAULT_THRESHOLD",
    "Decision",
    "FeatureKind",
    "FeatureText",
    "Verdict",
    "batch_verify",
    "score_pair",
    "weight_of",
    "SiameseModel",
    "TrainConfig",
    "TrainingTriplet",
    "bce_loss",
    "forward",
    "load_model",
    "save_model",
    "total_loss",
    "train",
    "triplet_loss",
    "__version__",
]
