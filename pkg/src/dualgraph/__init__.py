"""Dual top-down / bottom-up graph-to-sequence generation from AMR graphs."""

from .amr import (AmrExample, AmrGraph, GraphStats, GraphView, PenmanError, corpus_stats,
                  dfs_order, graph_stats, levi_transform, parse_penman, read_amr_corpus,
                  reverse_view)
from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .evaluation import adequacy, bleu, bucket_eval
from .model import Graph2Seq, count_parameters
from .train import TrainConfig, train
from .vocab import Vocabulary, build_vocab, load_pretrained_embeddings

__version__ = "0.1.0"
