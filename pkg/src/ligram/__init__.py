"""Hierarchical heterogeneous text graphs with contrastive training for
semi-supervised short-text classification."""

from .config import Hyperparams, RunConfig
from .corpus import (
    AnnotatedDocument,
    Corpus,
    assign_splits,
    build_vocabularies,
    deduplicate,
    filter_low_frequency,
    load_corpus,
    save_corpus,
)
from .embeddings import EmbeddingTable, read_embedding_table, write_embedding_table
from .errors import (
    ConfigError,
    CorpusError,
    EmbeddingError,
    GraphError,
    LigramError,
    NumericsError,
    TrainingError,
)
from .graphs import (
    AttentionVectors,
    GraphBundle,
    SparseMatrix,
    Subgraph,
    build_entity_graph,
    build_graph_bundle,
    build_morpheme_graph,
    build_pos_graph,
    compute_document_pmi,
    compute_entity_attention,
    compute_tfidf_attention,
    compute_windowed_pmi,
    graph_stats,
    normalize_adjacency,
)
from .model import (
    ModelParameters,
    build_document_graph,
    full_forward,
    init_parameters,
    predict,
    prepare_graphs,
)
from .semcon import assign_pseudo_topics, contrastive_loss, form_pairs
from .synthetic import SyntheticSpec, generate_synthetic_corpus
from .training import (
    MetricsReport,
    OptimizerState,
    TrainRun,
    adamw_step,
    compute_metrics,
    cross_entropy_loss,
    evaluate,
    train,
    unified_loss,
)

__version__ = "0.1.0"
