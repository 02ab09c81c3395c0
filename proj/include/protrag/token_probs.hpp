#pragma once

#include <string>
#include <vector>

namespace protrag {

/// Per-token probabilities of a target continuation under some prompt.
struct TokenProbSequence {
    std::vector<std::string> tokens;
    std::vector<double> probs;

    std::size_t size() const noexcept { return probs.size(); }
    bool empty() const noexcept { return probs.empty(); }

    /// Throws std::invalid_argument on length mismatch or a probability outside [0, 1].
    void validate() const;

    friend bool operator==(const TokenProbSequence&, const TokenProbSequence&) = default;
};

}  // namespace protrag
