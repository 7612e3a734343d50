"""Gait-disease classification from smartphone accelerometry.

Preprocessing of inertial traces, a small 1-D convolutional network engine,
transfer learning between activity-recognition and gait-disease tasks, and
prediction explanations via layer-wise relevance propagation, wavelet
scalograms, and warped-average epochs.
"""

__version__ = "0.1.0"
