# Copyright 2026 The blockmetric Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Structured sparse bilinear similarity metrics (Diag, block-diagonal, dense)."""

from ._blockmetric import (
    FormatError,
    MetricConfig,
    MetricParams,
    distill_kl,
    evaluate,
    gradcheck,
    init_identity,
    init_random,
    load_checkpoint,
    loss_and_grad,
    metric_attention,
    param_count,
    pre_project,
    read_features,
    save_checkpoint,
    score_matrix,
    synth,
    token_alignment,
    train,
    write_features,
)

__all__ = [
    "FormatError",
    "MetricConfig",
    "MetricParams",
    "distill_kl",
    "evaluate",
    "gradcheck",
    "init_identity",
    "init_random",
    "load_checkpoint",
    "loss_and_grad",
    "metric_attention",
    "param_count",
    "pre_project",
    "read_features",
    "save_checkpoint",
    "score_matrix",
    "synth",
    "token_alignment",
    "train",
    "write_features",
]
