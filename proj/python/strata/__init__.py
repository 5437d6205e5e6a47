# Copyright 2025-present the strata project
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

"""Python bindings for the strata hierarchical graph retrieval engine."""

import json

from ._strata import INDEX_FORMAT_VERSION, StrataError, count_tokens, run_cli, synthetic_corpus
from ._strata import Index as _NativeIndex

__all__ = [
    "INDEX_FORMAT_VERSION",
    "Index",
    "StrataError",
    "build",
    "count_tokens",
    "run_cli",
    "synthetic_corpus",
]


def build(input_path, out_dir, *, cluster_size=20, tau=3, max_layers=4, seed=0, add_root=False):
    """Builds an index with the mock providers and returns the build summary."""
    args = [
        "build", "--input", str(input_path), "--out", str(out_dir),
        "--cluster-size", str(cluster_size), "--tau", str(tau),
        "--max-layers", str(max_layers), "--seed", str(seed),
    ]
    if add_root:
        args.append("--add-root")
    code, out, err = run_cli(args)
    summary = json.loads(out)
    if code != 0:
        error = summary.get("error", {})
        raise StrataError(error.get("code", "internal_error"), error.get("message", err))
    return summary


class Index:
    """A loaded on-disk index queried with the mock embedder."""

    def __init__(self, path):
        self._native = _NativeIndex(str(path))

    @property
    def manifest(self):
        return json.loads(self._native.manifest_json)

    @property
    def layer_sizes(self):
        return list(self._native.layer_sizes)

    def query(self, text, *, top_n=10, top_c=5, include_relations=True, include_chunks=True,
              strategy="lca", max_hops=4):
        return json.loads(self._native.query_json(
            text, top_n, top_c, include_relations, include_chunks, strategy, max_hops))

    def bench(self, queries, *, top_n=10, top_c=5, include_relations=True, include_chunks=True,
              max_hops=4):
        return json.loads(self._native.bench_json(
            list(queries), top_n, top_c, include_relations, include_chunks, max_hops))
