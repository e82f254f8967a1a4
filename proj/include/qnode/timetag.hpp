#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qnode/povm.hpp"

namespace qnode {

// Photon origin, carried through the chain for diagnostics; analysis code
// must not branch on it (real detectors cannot see it).
enum class TagKind : std::uint8_t { pair = 0, background = 1, dark = 2 };

namespace channel {
inline constexpr std::uint16_t idler = 0;
inline constexpr std::uint16_t signal = 1;
// Heralded autocorrelation topology: signal split onto two detectors.
inline constexpr std::uint16_t signal_a = 1;
inline constexpr std::uint16_t signal_b = 2;
}  // namespace channel

struct TimeTag {
  double time = 0.0;  // seconds from run start
  std::int64_t pair_id = -1;
  std::uint16_t channel = 0;
  SlotLabel slot = SlotLabel::none;
  TagKind kind = TagKind::background;
};

// Amplitudes of a photonic time-bin qubit in the {early, late} basis,
// attached to a tag while it is still a coherent single-photon state.
struct QubitMeta {
  Complex amp_e{1.0, 0.0};
  Complex amp_l{0.0, 0.0};
};

bool is_time_sorted(const std::vector<TimeTag>& tags);

// Throws std::invalid_argument on non-finite or negative times or inputs
// that are not sorted by time.
void validate_tags(const std::vector<TimeTag>& tags);

void sort_by_time(std::vector<TimeTag>& tags);

std::vector<TimeTag> merge_sorted(const std::vector<TimeTag>& a,
                                  const std::vector<TimeTag>& b);

// One line per tag: "<time> <channel>" with 12 significant digits,
// e.g. "1.04200000312e-05 1". Slot labels and pair ids are in-memory
// analysis metadata and are not part of the exchange format.
void write_tags(std::ostream& os, const std::vector<TimeTag>& tags);
std::vector<TimeTag> parse_tags(std::istream& is);

}  // namespace qnode
