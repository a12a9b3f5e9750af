#include "dcm/classify.hpp"

#include "dcm/error.hpp"

#include <algorithm>
#include <string>

namespace dcm {

SampleType classify_trajectory(std::span<const AttemptRecord> attempts, int max_rounds) {
    if (attempts.empty()) throw InputError("cannot classify an empty trajectory");
    if (static_cast<int>(attempts.size()) > max_rounds) {
        throw InputError("trajectory has " + std::to_string(attempts.size()) + " attempts, budget is " +
                         std::to_string(max_rounds));
    }
    for (std::size_t i = 0; i < attempts.size(); ++i) {
        if (attempts[i].round_index != static_cast<int>(i) + 1) {
            throw InputError("trajectory rounds are not contiguous from 1");
        }
    }

    const auto correct = std::count_if(attempts.begin(), attempts.end(), [](const auto& a) { return a.correct; });
    if (correct == static_cast<std::ptrdiff_t>(attempts.size())) return SampleType::A;
    if (correct > 0) return SampleType::B;
    if (static_cast<int>(attempts.size()) < max_rounds) {
        throw IncompleteTrajectory("all " + std::to_string(attempts.size()) + " attempts failed before the " +
                                   std::to_string(max_rounds) + "-round budget was used");
    }
    return SampleType::C;
}

} // namespace dcm
