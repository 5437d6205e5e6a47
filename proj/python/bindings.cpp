// Copyright 2025-present the strata project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "strata/cli.hpp"
#include "strata/error.hpp"
#include "strata/index.hpp"
#include "strata/store.hpp"
#include "strata/synthetic.hpp"

namespace py = pybind11;

namespace {

using strata::Index;

/// Loaded index plus the mock embedder matching its dimension.
class PyIndex {
public:
    explicit PyIndex(const std::string& dir) {
        auto loaded = strata::load_index(dir);
        manifest_ = strata::ToJson(loaded.manifest).dump();
        embedder_ = std::make_unique<strata::MockEmbeddingProvider>(loaded.manifest.dim);
        index_ = Index{std::move(loaded.hierarchy), std::move(loaded.embeddings),
                       std::move(loaded.chunks)};
    }

    std::string Query(const std::string& text, std::size_t top_n, std::size_t top_c,
                      bool include_relations, bool include_chunks, const std::string& strategy,
                      int max_hops) const {
        auto options = Options(top_n, top_c, include_relations, include_chunks, max_hops);
        if (strategy == "flat") {
            options.strategy = strata::Strategy::kFlat;
        } else if (strategy != "lca") {
            throw strata::Error(strata::ErrorCode::kInvalidArgument,
                                "strategy must be 'lca' or 'flat'");
        }
        py::gil_scoped_release release;
        return strata::ToJson(strata::run_query(index_, text, options, *embedder_)).dump();
    }

    std::string Bench(const std::vector<std::string>& queries, std::size_t top_n, std::size_t top_c,
                      bool include_relations, bool include_chunks, int max_hops) const {
        auto options = Options(top_n, top_c, include_relations, include_chunks, max_hops);
        py::gil_scoped_release release;
        return strata::ToJson(strata::run_bench(index_, queries, options, *embedder_)).dump();
    }

    [[nodiscard]] const std::string& manifest() const {
        return manifest_;
    }
    [[nodiscard]] std::vector<std::size_t> layer_sizes() const {
        std::vector<std::size_t> out;
        for (const auto& layer : index_.hierarchy.layers) {
            out.push_back(layer.entity_ids.size());
        }
        return out;
    }

private:
    static strata::QueryOptions Options(std::size_t top_n, std::size_t top_c, bool include_relations,
                                        bool include_chunks, int max_hops) {
        strata::QueryOptions o;
        o.top_n = top_n;
        o.top_c = top_c;
        o.flags = {include_relations, include_chunks};
        o.max_hops = max_hops;
        return o;
    }

    Index index_;
    std::unique_ptr<strata::MockEmbeddingProvider> embedder_;
    std::string manifest_;
};

py::tuple
RunCli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
        py::gil_scoped_release release;
        code = strata::run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

py::tuple
Synthetic(std::uint64_t seed) {
    strata::SyntheticParams params;
    params.seed = seed;
    auto corpus = strata::generate_synthetic(params);
    return py::make_tuple(corpus.jsonl, corpus.queries);
}

}  // namespace

PYBIND11_MODULE(_strata, m) {
    m.doc() = "Hierarchical knowledge-graph retrieval engine (native core).";

    static py::exception<strata::Error> error(m, "StrataError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const strata::Error& e) {
            // args = (code, message)
            auto args = py::make_tuple(std::string(strata::ToString(e.code())), e.what());
            PyErr_SetObject(error.ptr(), args.ptr());
        }
    });

    m.attr("INDEX_FORMAT_VERSION") = strata::kIndexFormatVersion;
    m.def("count_tokens", [](const std::string& s) { return strata::count_tokens(s); },
          py::arg("text"));
    m.def("run_cli", &RunCli, py::arg("args"),
          "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
    m.def("synthetic_corpus", &Synthetic, py::arg("seed") = 7,
          "Returns (jsonl, queries) for the built-in synthetic corpus.");

    py::class_<PyIndex>(m, "Index")
        .def(py::init<const std::string&>(), py::arg("path"))
        .def("query_json", &PyIndex::Query, py::arg("text"), py::arg("top_n") = 10,
             py::arg("top_c") = 5, py::arg("include_relations") = true,
             py::arg("include_chunks") = true, py::arg("strategy") = "lca", py::arg("max_hops") = 4)
        .def("bench_json", &PyIndex::Bench, py::arg("queries"), py::arg("top_n") = 10,
             py::arg("top_c") = 5, py::arg("include_relations") = true,
             py::arg("include_chunks") = true, py::arg("max_hops") = 4)
        .def_property_readonly("manifest_json", &PyIndex::manifest)
        .def_property_readonly("layer_sizes", &PyIndex::layer_sizes);
}
