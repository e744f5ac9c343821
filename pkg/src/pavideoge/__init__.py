"""Video search over per-video metadata records built from playpages."""

from .corpus import CorpusBundle, Playpage, SiteProfile, ingest_corpus, load_site_profile
from .extractor import (
    FixtureTransport,
    PavideogeRecord,
    TextInformation,
    build_pavideoge,
    extract_text_information,
    extract_video_id,
    resolve_playnum,
    resolve_real_link,
)
from .fusion import EffectFactors, ScoreBreakdown, Searcher, modified_score, normalize_scores, playnum_proportion, search
from .graph import LinkGraph, VideorankResult, build_link_graph, compute_videorank, videorank_oracle
from .index import LmIndex, TokenizerConfig, build_index, retrieve, score_query_likelihood, tokenize
from .synth import GenSpec, generate_synthetic_corpus
from .tuner import Qrels, QuerySet, average_precision_over_queries, compare_methods, grid_search, precision

__version__ = "0.1.0"
