#include "qnode/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qnode {

bool is_time_sorted(const std::vector<TimeTag>& tags) {
  for (size_t i = 1; i < tags.size(); ++i)
    if (tags[i].time < tags[i - 1].time) return false;
  return true;
}

void validate_tags(const std::vector<TimeTag>& tags) {
  for (const auto& t : tags) {
    if (!std::isfinite(t.time))
      throw std::invalid_argument("time tag: non-finite time");
    if (t.time < 0) throw std::invalid_argument("time tag: negative time");
  }
  if (!is_time_sorted(tags))
    throw std::invalid_argument("time tags: not sorted by time");
}

void sort_by_time(std::vector<TimeTag>& tags) {
  std::stable_sort(tags.begin(), tags.end(),
                   [](const TimeTag& a, const TimeTag& b) {
                     return a.time < b.time;
                   });
}

std::vector<TimeTag> merge_sorted(const std::vector<TimeTag>& a,
                                  const std::vector<TimeTag>& b) {
  std::vector<TimeTag> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
             [](const TimeTag& x, const TimeTag& y) { return x.time < y.time; });
  return out;
}

void write_tags(std::ostream& os, const std::vector<TimeTag>& tags) {
  validate_tags(tags);
  char buf[64];
  for (const auto& t : tags) {
    std::snprintf(buf, sizeof buf, "%.12g", t.time);
    os << buf << ' ' << t.channel << '\n';
  }
}

std::vector<TimeTag> parse_tags(std::istream& is) {
  std::vector<TimeTag> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TimeTag t;
    unsigned channel = 0;
    if (!(ls >> t.time >> channel))
      throw std::invalid_argument("time tags: malformed line " +
                                  std::to_string(line_no));
    std::string extra;
    if (ls >> extra)
      throw std::invalid_argument("time tags: trailing field on line " +
                                  std::to_string(line_no));
    if (channel > 0xFFFF)
      throw std::invalid_argument("time tags: channel out of range on line " +
                                  std::to_string(line_no));
    t.channel = static_cast<std::uint16_t>(channel);
    out.push_back(t);
  }
  validate_tags(out);
  return out;
}

}  // namespace qnode
