"""Daily reddit comment factors and extended Fama-French regressions."""

from .cluster import classify_corpus, grid_search, kmeans, silhouette
from .factors import (class_frequency, frequency_panel, lag_series, mention_frequency,
                      select_buzzwords, squared_frequency, top_ngrams)
from .ingest import (Comment, Corpus, FetchWindow, TickerSpec, chunk_schedule, daily_volume,
                     detect_mentions, fetch_window, normalize_text, split_window)
from .lsi import fit_lsi, project_documents
from .regression import (ModelSpec, ReturnsPanel, Variant, nested_f_test, ols_fit,
                         render_table, run_model_suite, stars)
from .vectorize import (build_vocabulary, inverse_document_frequency, term_frequency,
                        tfidf_matrix, tokenize)

__version__ = "0.1.0"
