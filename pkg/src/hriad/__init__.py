"""hriad: multimodal anomaly detection for human-robot interaction traces.

Fuses per-clip visual feature vectors, temporally max-pooled robot sensor
readings and flattened scene-graph matrices; trains a reconstruction
autoencoder on normal behaviour only; flags anomalies via normalized
reconstruction error against an F1-optimal threshold; and compares
modality configurations with pooled ROC curves.
"""

__version__ = "0.1.0"
