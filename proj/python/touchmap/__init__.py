# Copyright 2026 The touchmap Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Map impact sounds to a 2-D manifold of image embeddings."""

import json as _json

from ._touchmap import (
    SAMPLE_RATE,
    ConfigError,
    FormatError,
    Model,
    TouchmapError,
    default_config,
    detect,
    embed,
    features,
    neighborhood_preservation,
    read_embedding,
    read_wav,
    run_detect,
    run_reduce,
    run_train,
    segment_features,
    stft,
    synth,
    write_embedding,
    write_wav,
)

__all__ = [
    "SAMPLE_RATE",
    "ConfigError",
    "FormatError",
    "Model",
    "TouchmapError",
    "config_json",
    "default_config",
    "detect",
    "embed",
    "features",
    "neighborhood_preservation",
    "read_embedding",
    "read_wav",
    "run_detect",
    "run_reduce",
    "run_train",
    "segment_features",
    "stft",
    "synth",
    "write_embedding",
    "write_wav",
]


def config_json(overrides=None):
    """Config text for the stage functions; `overrides` is a nested dict of sections."""
    return _json.dumps(overrides or {})
