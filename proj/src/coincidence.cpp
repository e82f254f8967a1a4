#include "qnode/coincidence.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace qnode {

namespace {

// Calls fn(i, j) for every pair with t_b[j] - t_a[i] in [lo, hi); both
// streams sorted, pointers advance monotonically.
template <typename Fn>
void sweep_pairs(const std::vector<TimeTag>& a, const std::vector<TimeTag>& b,
                 double lo, double hi, Fn&& fn) {
  size_t begin = 0, end = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double t = a[i].time;
    while (begin < b.size() && b[begin].time < t + lo) ++begin;
    if (end < begin) end = begin;
    while (end < b.size() && b[end].time < t + hi) ++end;
    for (size_t j = begin; j < end; ++j) fn(i, j);
  }
}

// First index in sorted b with time >= x, advancing a cached cursor.
size_t advance_to(const std::vector<TimeTag>& b, size_t& cursor, double x) {
  while (cursor < b.size() && b[cursor].time < x) ++cursor;
  return cursor;
}

int slot_index(SlotLabel slot) {
  switch (slot) {
    case SlotLabel::early:
      return 0;
    case SlotLabel::central:
      return 1;
    case SlotLabel::late:
      return 2;
    case SlotLabel::none:
      break;
  }
  return -1;
}

}  // namespace

CoincidenceHistogram coincidence_histogram(const std::vector<TimeTag>& a,
                                           const std::vector<TimeTag>& b,
                                           double bin_width, double min_offset,
                                           double max_offset) {
  if (!std::isfinite(bin_width) || bin_width <= 0)
    throw std::invalid_argument("histogram: bin_width must be positive");
  if (!(max_offset > min_offset))
    throw std::invalid_argument("histogram: empty offset range");
  validate_tags(a);
  validate_tags(b);
  auto n_bins = static_cast<size_t>(
      std::ceil((max_offset - min_offset) / bin_width - 1e-12));
  if (n_bins == 0) n_bins = 1;
  CoincidenceHistogram h;
  h.bin_width = bin_width;
  h.offsets.resize(n_bins);
  h.counts.assign(n_bins, 0);
  for (size_t k = 0; k < n_bins; ++k)
    h.offsets[k] = min_offset + (static_cast<double>(k) + 0.5) * bin_width;
  double hi = min_offset + static_cast<double>(n_bins) * bin_width;
  sweep_pairs(a, b, min_offset, hi, [&](size_t i, size_t j) {
    double d = b[j].time - a[i].time;
    auto bin = static_cast<size_t>((d - min_offset) / bin_width);
    if (bin >= n_bins) bin = n_bins - 1;
    ++h.counts[bin];
  });
  return h;
}

void write_histogram_csv(std::ostream& os, const CoincidenceHistogram& h) {
  os << "offset_s,count\n";
  char buf[48];
  for (size_t k = 0; k < h.offsets.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.12g", h.offsets[k]);
    os << buf << ',' << h.counts[k] << '\n';
  }
}

std::uint64_t count_coincidences(const std::vector<TimeTag>& a,
                                 const std::vector<TimeTag>& b, double window,
                                 double offset) {
  if (!std::isfinite(window) || window <= 0)
    throw std::invalid_argument("coincidence count: window must be positive");
  validate_tags(a);
  validate_tags(b);
  std::uint64_t n = 0;
  // Half-open [offset - w/2, offset + w/2) keeps bins disjoint when tiled.
  sweep_pairs(a, b, offset - window / 2, offset + window / 2,
              [&](size_t, size_t) { ++n; });
  return n;
}

G2Result g2_cross(const std::vector<TimeTag>& a, const std::vector<TimeTag>& b,
                  double window, double offset,
                  std::span<const double> accidental_offsets) {
  if (accidental_offsets.empty())
    throw std::invalid_argument("g2: need at least one accidental offset");
  double c_sig = static_cast<double>(count_coincidences(a, b, window, offset));
  double acc_total = 0;
  for (double d : accidental_offsets)
    acc_total +=
        static_cast<double>(count_coincidences(a, b, window, offset + d));
  double n_acc = static_cast<double>(accidental_offsets.size());

  G2Result r;
  if (acc_total == 0) {
    r.value = std::numeric_limits<double>::infinity();
    r.std_error = std::numeric_limits<double>::infinity();
    r.unbounded = true;
    return r;
  }
  double mean_acc = acc_total / n_acc;
  r.value = c_sig / mean_acc;
  double rel2 = 1.0 / std::max(c_sig, 1.0) + 1.0 / acc_total;
  r.std_error = std::max(r.value, n_acc / acc_total) * std::sqrt(rel2);
  return r;
}

G2Result heralded_g2(const std::vector<TimeTag>& herald,
                     const std::vector<TimeTag>& s1,
                     const std::vector<TimeTag>& s2, double window,
                     double offset) {
  if (!std::isfinite(window) || window <= 0)
    throw std::invalid_argument("heralded g2: window must be positive");
  validate_tags(herald);
  validate_tags(s1);
  validate_tags(s2);
  std::uint64_t n_h = herald.size();
  std::uint64_t n_h1 = 0, n_h2 = 0, n_h12 = 0;
  size_t lo1 = 0, lo2 = 0;
  for (const auto& h : herald) {
    double wlo = h.time + offset - window / 2;
    double whi = h.time + offset + window / 2;
    size_t i1 = advance_to(s1, lo1, wlo);
    bool hit1 = i1 < s1.size() && s1[i1].time < whi;
    size_t i2 = advance_to(s2, lo2, wlo);
    bool hit2 = i2 < s2.size() && s2[i2].time < whi;
    n_h1 += hit1;
    n_h2 += hit2;
    n_h12 += hit1 && hit2;
  }
  G2Result r;
  if (n_h1 == 0 || n_h2 == 0) {
    r.value = std::numeric_limits<double>::infinity();
    r.std_error = std::numeric_limits<double>::infinity();
    r.unbounded = true;
    return r;
  }
  double nh = static_cast<double>(n_h), nh1 = static_cast<double>(n_h1),
         nh2 = static_cast<double>(n_h2), nh12 = static_cast<double>(n_h12);
  r.value = nh12 * nh / (nh1 * nh2);
  double scale = std::max(r.value, nh / (nh1 * nh2));
  r.std_error = scale * std::sqrt(1.0 / std::max(nh12, 1.0) + 1.0 / nh1 +
                                  1.0 / nh2 + 1.0 / nh);
  return r;
}

double FransonCounts::total() const {
  double n = 0;
  for (const auto& row : cells)
    for (double c : row) n += c;
  return n;
}

FransonCounts franson_postselect(const std::vector<TimeTag>& idler,
                                 const std::vector<TimeTag>& signal,
                                 double delay, double window,
                                 double base_offset) {
  if (!std::isfinite(delay) || delay <= 0)
    throw std::invalid_argument("franson: delay must be positive");
  if (!std::isfinite(window) || window <= 0)
    throw std::invalid_argument("franson: window must be positive");
  if (window >= delay)
    throw std::invalid_argument(
        "franson: window must be smaller than the analyzer delay (slots would "
        "overlap)");
  validate_tags(idler);
  validate_tags(signal);

  static constexpr int kCanonical[5][2] = {
      {2, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 2}};  // k = -2..2 -> (idler, signal)

  FransonCounts out;
  double span = 2 * delay + window / 2;
  sweep_pairs(idler, signal, base_offset - span, base_offset + span,
              [&](size_t i, size_t j) {
                double d = signal[j].time - idler[i].time - base_offset;
                auto k = static_cast<int>(std::llround(d / delay));
                if (k < -2 || k > 2) return;
                if (std::abs(d - k * delay) > window / 2) return;
                int a = slot_index(idler[i].slot);
                int b = slot_index(signal[j].slot);
                if (a >= 0 && b >= 0) {
                  out.cells[static_cast<size_t>(a)][static_cast<size_t>(b)] +=
                      1.0;
                } else {
                  const int* cell = kCanonical[k + 2];
                  out.cells[static_cast<size_t>(cell[0])]
                           [static_cast<size_t>(cell[1])] += 1.0;
                }
              });
  return out;
}

}  // namespace qnode
