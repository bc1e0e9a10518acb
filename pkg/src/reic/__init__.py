"""Reinforcement-learned evidence-sentence selection for cross-document
relation extraction, with heuristic baselines and a planted-evidence
benchmark generator."""

from .baselines import BaselineConfig, bridge_filter_select, snippet_select
from .corpus import (
    Bag,
    Corpus,
    Document,
    EmbeddingStore,
    Sentence,
    TextPath,
    load_corpus,
    load_embedding_store,
    target_sentence_index,
    validate_bag,
    write_corpus,
    write_embedding_store,
)
from .metrics import RankedPrediction, best_f1, bridge_mention_stats, pr_auc, precision_at_k
from .rehead import REHead, aggregate_bag, loss_end2end, loss_threshold, path_representation, score_relations
from .rltrain import RewardConfig, TrainConfig, TrainHistory, evaluate, reinforce_update, reward_end2end, reward_threshold, train
from .selector import PolicyNetwork, SelectionState, SelectorConfig, apply_token_cap, policy_logits, select, select_one_step
from .synth import SyntheticConfig, generate_synthetic

__version__ = "0.1.0"
