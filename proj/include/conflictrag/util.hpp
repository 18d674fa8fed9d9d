#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace conflictrag {

/// FNV-1a over the raw bytes. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view text);

/// Deterministic RNG used everywhere randomness is needed. All draws go
/// through explicit arithmetic (no std::*_distribution) so sequences are
/// identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::size_t next_below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[next_below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Lowercase, split on non-alphanumeric, drop empty tokens. Bytes >= 0x80 are
/// kept so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);

/// Crude token estimate used only for budgets and the cost ledger: 4 chars per token.
std::size_t estimate_tokens(std::string_view text);

/// Warning sink for non-fatal degradations (clamped scores, parse fallbacks).
/// Writes to stderr; tests may swap the sink.
void log_warning(const std::string& message);
void set_warning_sink(void (*sink)(const std::string&));

}  // namespace conflictrag
