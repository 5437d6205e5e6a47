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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace strata {

enum class ErrorCode {
    kInvalidArgument,
    kNotFound,
    kProviderUnavailable,
    kGenerationParse,
    kLoad,
    kIntegrity,
    kInternal,
};

std::string_view ToString(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {
    }

    [[nodiscard]] ErrorCode code() const noexcept {
        return code_;
    }

private:
    ErrorCode code_;
};

/// Raised when a generation provider keeps returning text that does not fit
/// the expected output schema. Carries the last raw response.
class GenerationParseError : public Error {
public:
    GenerationParseError(const std::string& message, std::string raw_text)
        : Error(ErrorCode::kGenerationParse, message), raw_text_(std::move(raw_text)) {
    }

    [[nodiscard]] const std::string& raw_text() const noexcept {
        return raw_text_;
    }

private:
    std::string raw_text_;
};

/// Ingest failure tied to a line of the input file (1-based, 0 when not
/// attributable to a single line).
class LoadError : public Error {
public:
    LoadError(const std::string& message, std::size_t line)
        : Error(ErrorCode::kLoad, message), line_(line) {
    }

    [[nodiscard]] std::size_t line() const noexcept {
        return line_;
    }

private:
    std::size_t line_;
};

}  // namespace strata
