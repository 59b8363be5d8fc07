# Copyright 2026 The KPA Toolkit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Key point analysis: clustering, generation and evaluation of key points."""

import json as _json

from ._core import (  # noqa: F401
    BackendError,
    InputError,
    KpaError,
    StageError,
    UsageError,
    corpus_rouge,
    fractional_ranks,
    hdbscan_labels,
    kmeans_labels,
    optimal_match,
    quality_filter,
    rouge,
    setting_names,
    soft_scores,
    soft_scores_from_matrix,
    spearman,
    textrank,
    tokenize,
)
from . import _core

__all__ = [name for name in dir(_core) if not name.startswith("_")] + ["run", "sweep", "config_hash"]


def _settings(settings):
    return _json.dumps({key: (str(value) if hasattr(value, "__fspath__") else value)
                        for key, value in settings.items()})


def run(**settings):
    """Full pipeline. Keyword names are the CLI flag names with '-' as '_'."""
    return _json.loads(_core._run(_settings({k.replace("_", "-"): v for k, v in settings.items()})))


def sweep(lambda_range, **settings):
    """One row per lambda in "start:stop:step"."""
    return _json.loads(_core._sweep(_settings({k.replace("_", "-"): v for k, v in settings.items()}),
                                    lambda_range))


def config_hash(**settings):
    return _core.config_hash(_settings({k.replace("_", "-"): v for k, v in settings.items()}))
