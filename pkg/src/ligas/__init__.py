"""Layer integrated gradients for a toy acceptability classifier.

The package trains a small transformer encoder on LA/LUA (linguistically
acceptable / unacceptable) sentence pairs, attributes its predictions to
the embedding layer with integrated gradients, aggregates the scores to
words, sentences and constituency subtrees, and reports sign statistics
and pattern rankings over the result.
"""

from .attribution import (
    IGConfig,
    SentenceAttribution,
    integrated_gradients,
    interpolation_points,
    make_baseline,
    path_integral,
    word_scores,
)
from .autodiff import Tensor, backward, grad_of
from .config import CATEGORIES, config_digest, stream_rng, sub_seed
from .corpus import (
    LabeledSentence,
    generate_all,
    generate_synthetic,
    read_corpus_tsv,
    split,
    write_corpus_tsv,
)
from .errors import DataError, LigasError, NumericError, ShapeError, UsageError
from .model import (
    CLASSES,
    ModelConfig,
    ModelWeights,
    Prediction,
    TrainConfig,
    embed,
    forward_from_embeddings,
    init,
    load_weights,
    predict,
    save_weights,
    train,
)
from .tokenizer import TokenizedSentence, Vocabulary, build_vocab, split_words, tokenize
from .trees import (
    ParseTree,
    align,
    mine_patterns,
    parse_bracketed,
    rank_subtrees,
    render_leafed,
    subtree_scores,
    to_pattern,
)

__version__ = "0.1.0"
