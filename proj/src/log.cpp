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

#include "strata/log.hpp"

#include <iostream>
#include <mutex>

namespace strata {

namespace {

std::mutex g_log_mutex;

LogSink&
Sink() {
    static LogSink sink = [](const nlohmann::json& event) {
        std::lock_guard lock(g_log_mutex);
        std::cerr << event.dump() << '\n';
    };
    return sink;
}

}  // namespace

LogSink
SetLogSink(LogSink sink) {
    auto previous = std::move(Sink());
    Sink() = sink ? std::move(sink) : LogSink([](const nlohmann::json&) {});
    return previous;
}

void
LogEvent(const nlohmann::json& event) {
    Sink()(event);
}

void
LogWarning(std::string_view message) {
    LogEvent({{"level", "warning"}, {"message", message}});
}

}  // namespace strata
