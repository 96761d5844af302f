#include "satirforge/rle.hpp"

#include <limits>
#include <stdexcept>

namespace satirforge {

namespace {

// 13 groups carry 65 payload bits; anything longer cannot be a valid run.
constexpr int kMaxGroups = 13;

void require_sum(const RleMask& m) {
  std::uint64_t sum = 0;
  for (auto r : m.runs) sum += r;
  if (sum != m.pixel_count()) {
    throw MalformedCounts("run lengths sum to " + std::to_string(sum) +
                          ", expected " + std::to_string(m.pixel_count()));
  }
}

}  // namespace

RleMask normalize(RleMask m) {
  if (m.runs.empty()) return m;
  std::vector<std::uint64_t> out;
  out.reserve(m.runs.size());
  out.push_back(m.runs[0]);
  for (std::size_t i = 1; i < m.runs.size(); ++i) {
    const std::uint64_t v = m.runs[i];
    if (v == 0) continue;
    // Parity of the next free slot must match the parity of this run,
    // otherwise a zero-length run was removed and the two neighbours merge.
    if (out.size() % 2 == i % 2) {
      out.push_back(v);
    } else {
      out.back() += v;
    }
  }
  while (out.size() > 1 && out.back() == 0) out.pop_back();
  m.runs = std::move(out);
  return m;
}

bool is_normalized(const RleMask& m) {
  if (m.runs.empty()) return m.pixel_count() == 0;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    if (i > 0 && m.runs[i] == 0) return false;
    sum += m.runs[i];
  }
  return sum == m.pixel_count();
}

RleMask decode_counts_string(std::string_view s, std::uint32_t height,
                             std::uint32_t width) {
  check_dimensions(height, width);
  RleMask m{height, width, {}};
  const std::uint64_t total = m.pixel_count();
  std::vector<std::int64_t> raw;
  raw.reserve(s.size());
  std::uint64_t sum = 0;

  std::size_t p = 0;
  while (p < s.size()) {
    std::uint64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) {
        throw MalformedCounts("counts string ends inside a group sequence");
      }
      const unsigned char ch = static_cast<unsigned char>(s[p]);
      if (ch < 48 || ch > 111) {
        throw MalformedCounts("counts character out of range at offset " +
                              std::to_string(p));
      }
      if (k >= kMaxGroups) {
        throw MalformedCounts("run group sequence too long at offset " +
                              std::to_string(p));
      }
      const std::uint64_t c = ch - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10) && 5 * k < 64) {
        x |= ~std::uint64_t{0} << (5 * k);
      }
    }
    auto delta = static_cast<std::int64_t>(x);
    const std::size_t i = raw.size();
    if (i > 2) delta += raw[i - 2];
    if (delta < 0) {
      throw MalformedCounts("negative run length at run " + std::to_string(i));
    }
    sum += static_cast<std::uint64_t>(delta);
    if (sum > total) {
      throw MalformedCounts("run lengths exceed " + std::to_string(total) +
                            " pixels");
    }
    raw.push_back(delta);
  }
  m.runs.assign(raw.begin(), raw.end());
  require_sum(m);
  return normalize(std::move(m));
}

std::string encode_counts_string(const RleMask& m) {
  if (!m.runs.empty()) require_sum(m);
  std::string out;
  out.reserve(m.runs.size() * 2);
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    auto x = static_cast<std::int64_t>(m.runs[i]);
    if (i > 2) x -= static_cast<std::int64_t>(m.runs[i - 2]);
    bool more = true;
    while (more) {
      auto c = static_cast<char>(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      out.push_back(static_cast<char>(c + 48));
    }
  }
  return out;
}

RleMask rle_from_counts(std::span<const std::int64_t> counts,
                        std::uint32_t height, std::uint32_t width) {
  check_dimensions(height, width);
  RleMask m{height, width, {}};
  m.runs.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) {
      throw MalformedCounts("negative run length at run " + std::to_string(i));
    }
    m.runs.push_back(static_cast<std::uint64_t>(counts[i]));
  }
  require_sum(m);
  return normalize(std::move(m));
}

BitMask rle_to_bitmask(const RleMask& m) {
  BitMask b(m.height, m.width);
  for_each_foreground_segment(m, [&](std::uint32_t col, std::uint32_t r0,
                                     std::uint32_t r1) {
    for (std::uint32_t r = r0; r < r1; ++r) b.set(r, col);
  });
  return b;
}

RleMask bitmask_to_rle(const BitMask& b) {
  RleMask m{b.height(), b.width(), {}};
  std::uint8_t prev = 0;
  std::uint64_t run = 0;
  for (std::uint32_t c = 0; c < b.width(); ++c) {
    for (std::uint32_t r = 0; r < b.height(); ++r) {
      const std::uint8_t v = b.at(r, c) ? 1 : 0;
      if (v != prev) {
        m.runs.push_back(run);
        run = 0;
        prev = v;
      }
      ++run;
    }
  }
  m.runs.push_back(run);
  return m;
}

std::uint64_t rle_area(const RleMask& m) {
  std::uint64_t area = 0;
  for (std::size_t i = 1; i < m.runs.size(); i += 2) area += m.runs[i];
  return area;
}

BBox rle_bbox(const RleMask& m) {
  std::uint32_t min_r = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t min_c = min_r;
  std::uint32_t max_r = 0;
  std::uint32_t max_c = 0;
  bool any = false;
  for_each_foreground_segment(m, [&](std::uint32_t col, std::uint32_t r0,
                                     std::uint32_t r1) {
    any = true;
    min_c = std::min(min_c, col);
    max_c = std::max(max_c, col);
    min_r = std::min(min_r, r0);
    max_r = std::max(max_r, r1 - 1);
  });
  if (!any) return {};
  return {min_c, min_r, max_c - min_c + 1, max_r - min_r + 1};
}

}  // namespace satirforge
