#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "qnode/timetag.hpp"

namespace qnode {

struct CoincidenceHistogram {
  double bin_width = 0.0;
  std::vector<double> offsets;        // bin centers, seconds
  std::vector<std::uint64_t> counts;  // pairs with (t_b - t_a) in each bin
};

// Histogram of arrival-time differences t_b - t_a over [min_offset,
// max_offset), cross-channel pairs only; two-pointer sweep.
CoincidenceHistogram coincidence_histogram(const std::vector<TimeTag>& a,
                                           const std::vector<TimeTag>& b,
                                           double bin_width, double min_offset,
                                           double max_offset);

// CSV with header "offset_s,count".
void write_histogram_csv(std::ostream& os, const CoincidenceHistogram& h);

// Pairs with |t_b - t_a - offset| <= window/2.
std::uint64_t count_coincidences(const std::vector<TimeTag>& a,
                                 const std::vector<TimeTag>& b, double window,
                                 double offset);

struct G2Result {
  double value = 0.0;
  double std_error = 0.0;
  bool unbounded = false;  // no accidentals observed, value is a lower bound
};

// Normalized cross-correlation: coincidences in the signal window at
// `offset` divided by the mean over displaced accidental windows.
G2Result g2_cross(const std::vector<TimeTag>& a, const std::vector<TimeTag>& b,
                  double window, double offset,
                  std::span<const double> accidental_offsets);

// Heralded autocorrelation g2_h = N_h12 * N_h / (N_h1 * N_h2), counting
// heralds with partners on either split arm within window around
// herald time + offset.
G2Result heralded_g2(const std::vector<TimeTag>& herald,
                     const std::vector<TimeTag>& s1,
                     const std::vector<TimeTag>& s2, double window,
                     double offset = 0.0);

// 3x3 slot-grid counts indexed [idler][signal] with 0 = early, 1 = central,
// 2 = late.
struct FransonCounts {
  std::array<std::array<double, 3>, 3> cells{};
  double total() const;
};

// Classifies idler/signal coincidences into the slot grid. A pair is a
// coincidence when t_s - t_i - base_offset lands within window/2 of
// k * delay for k in {-2..2}. Tags that both carry analyzer slot labels are
// classified by their labels; otherwise the timing peak k decides via the
// canonical map -2:(l,e) -1:(c,e) 0:(c,c) +1:(e,c) +2:(e,l).
// Throws std::invalid_argument when window >= delay (slots would overlap).
FransonCounts franson_postselect(const std::vector<TimeTag>& idler,
                                 const std::vector<TimeTag>& signal,
                                 double delay, double window,
                                 double base_offset = 0.0);

}  // namespace qnode
