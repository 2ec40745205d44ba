# Copyright 2026 The esdd Authors
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

"""Environmental sound deepfake benchmark toolkit."""

from esdd._core import (
    Error,
    __version__,
    compute_eer,
    format_percent,
    logmel,
    read_embedding,
    read_manifest,
    read_wav,
    render_prompt,
    rewrite_label,
    run_cli,
    write_embedding,
)

__all__ = [
    "Error",
    "__version__",
    "compute_eer",
    "format_percent",
    "logmel",
    "read_embedding",
    "read_manifest",
    "read_wav",
    "render_prompt",
    "rewrite_label",
    "run_cli",
    "write_embedding",
]
