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

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "strata/providers.hpp"

namespace strata {

namespace {

// Byte length of the Unicode White_Space code point starting at `pos`, or 0.
std::size_t
WhitespaceLength(std::string_view s, std::size_t pos) {
    auto byte = [&](std::size_t k) -> std::uint8_t {
        return pos + k < s.size() ? static_cast<std::uint8_t>(s[pos + k]) : 0;
    };
    const std::uint8_t b0 = byte(0);
    if ((b0 >= 0x09 && b0 <= 0x0D) || b0 == 0x20) {
        return 1;
    }
    if (b0 == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) {
        return 2;  // U+0085, U+00A0
    }
    if (b0 == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) {
        return 3;  // U+1680
    }
    if (b0 == 0xE2 && byte(1) == 0x80) {
        const std::uint8_t b2 = byte(2);
        if ((b2 >= 0x80 && b2 <= 0x8A) || b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF) {
            return 3;  // U+2000..U+200A, U+2028, U+2029, U+202F
        }
    }
    if (b0 == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) {
        return 3;  // U+205F
    }
    if (b0 == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) {
        return 3;  // U+3000
    }
    return 0;
}

template <typename Fn>
void
ForEachToken(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    std::size_t start = std::string_view::npos;
    while (pos < text.size()) {
        std::size_t ws = WhitespaceLength(text, pos);
        if (ws > 0) {
            if (start != std::string_view::npos) {
                if (!fn(text.substr(start, pos - start))) {
                    return;
                }
                start = std::string_view::npos;
            }
            pos += ws;
        } else {
            if (start == std::string_view::npos) {
                start = pos;
            }
            ++pos;
        }
    }
    if (start != std::string_view::npos) {
        fn(text.substr(start));
    }
}

}  // namespace

std::size_t
count_tokens(std::string_view text) {
    std::size_t count = 0;
    ForEachToken(text, [&](std::string_view) {
        ++count;
        return true;
    });
    return count;
}

std::string
TruncateTokens(std::string_view text, std::size_t budget) {
    if (count_tokens(text) <= budget) {
        return std::string(text);
    }
    std::string out;
    std::size_t taken = 0;
    ForEachToken(text, [&](std::string_view token) {
        if (taken == budget) {
            return false;
        }
        if (taken > 0) {
            out.push_back(' ');
        }
        out.append(token);
        ++taken;
        return true;
    });
    return out;
}

double
Dot(const Embedding& a, const Embedding& b) {
    double sum = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

void
NormalizeInPlace(Embedding& v) {
    double norm = std::sqrt(Dot(v, v));
    if (norm > 0.0) {
        for (auto& x : v) {
            x /= norm;
        }
    }
}

}  // namespace strata
