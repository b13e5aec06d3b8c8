"""News-topic attribution of abnormal stock trading volume.

Decomposes a news corpus into topics (collapsed-Gibbs LDA), builds daily
per-topic news-volume series, regresses normalized trading volume on them
under nonnegativity and sparsity constraints, and reports how many
trading-volume peaks the news flow explains.
"""

__version__ = "0.1.0"
