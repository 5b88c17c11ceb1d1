#include "stagelens/patterns.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <tuple>

namespace stagelens {

std::vector<StageSequence> to_stage_sequences(const std::vector<Segment>& segments, const Dataset& dataset) {
  std::vector<std::vector<const Segment*>> by_seq(dataset.sequences.size());
  for (const auto& s : segments) {
    if (!s.stage_id) throw std::invalid_argument("segment without stage id");
    by_seq.at(s.sequence).push_back(&s);
  }
  std::vector<StageSequence> out;
  for (std::size_t i = 0; i < by_seq.size(); ++i) {
    auto& segs = by_seq[i];
    if (segs.empty()) continue;
    std::stable_sort(segs.begin(), segs.end(), [](const Segment* a, const Segment* b) { return a->start < b->start; });
    StageSequence seq;
    seq.user_id = dataset.sequences[i].user_id;
    seq.group = dataset.sequences[i].group;
    for (const Segment* s : segs) seq.stages.push_back(*s->stage_id);
    out.push_back(std::move(seq));
  }
  return out;
}

std::string pattern_key(const std::vector<int>& symbols) {
  std::string key;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i) key.push_back('-');
    key += std::to_string(symbols[i]);
  }
  return key;
}

std::vector<int> parse_pattern_key(std::string_view key) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= key.size()) {
    const std::size_t dash = std::min(key.find('-', pos), key.size());
    int v = 0;
    const auto* first = key.data() + pos;
    const auto* last = key.data() + dash;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (first == last || ec != std::errc{} || ptr != last || v < 1)
      throw std::invalid_argument("malformed pattern key '" + std::string(key) + "'");
    out.push_back(v);
    pos = dash + 1;
  }
  return out;
}

int first_occurrence(const std::vector<int>& sequence, const std::vector<int>& pattern) {
  if (pattern.empty() || pattern.size() > sequence.size()) return -1;
  const auto it = std::search(sequence.begin(), sequence.end(), pattern.begin(), pattern.end());
  return it == sequence.end() ? -1 : static_cast<int>(it - sequence.begin());
}

std::size_t count_occurrences(const std::vector<int>& sequence, const std::vector<int>& pattern) {
  if (pattern.empty() || pattern.size() > sequence.size()) return 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + pattern.size() <= sequence.size(); ++i)
    if (std::equal(pattern.begin(), pattern.end(), sequence.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
  return n;
}

double support(const std::vector<StageSequence>& sequences, const std::vector<int>& pattern, Group group) {
  std::size_t total = 0, hits = 0;
  for (const auto& s : sequences) {
    if (s.group != group) continue;
    ++total;
    if (first_occurrence(s.stages, pattern) >= 0) ++hits;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<StagePattern> mine_patterns(const std::vector<StageSequence>& sequences, double min_support,
                                        int max_len) {
  if (!(min_support > 0.0 && min_support <= 1.0)) throw std::invalid_argument("min_support must be in (0,1]");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");

  std::array<std::size_t, 3> group_size{};
  for (const auto& s : sequences) ++group_size[static_cast<std::size_t>(s.group)];

  struct Tally {
    std::array<std::size_t, 3> hits{};
    std::vector<std::pair<std::size_t, int>> occurrences;
  };
  std::map<std::vector<int>, Tally> tallies;
  for (std::size_t si = 0; si < sequences.size(); ++si) {
    const auto& seq = sequences[si].stages;
    std::map<std::vector<int>, int> first;  // distinct patterns in this sequence
    for (std::size_t i = 0; i < seq.size(); ++i)
      for (std::size_t len = 1; len <= static_cast<std::size_t>(max_len) && i + len <= seq.size(); ++len)
        first.emplace(std::vector<int>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                       seq.begin() + static_cast<std::ptrdiff_t>(i + len)),
                      static_cast<int>(i));
    for (auto& [pattern, offset] : first) {
      auto& t = tallies[pattern];
      ++t.hits[static_cast<std::size_t>(sequences[si].group)];
      t.occurrences.emplace_back(si, offset);
    }
  }

  auto frac = [&](const Tally& t, Group g) {
    const auto n = group_size[static_cast<std::size_t>(g)];
    return n == 0 ? 0.0 : static_cast<double>(t.hits[static_cast<std::size_t>(g)]) / static_cast<double>(n);
  };
  std::vector<StagePattern> out;
  for (auto& [symbols, t] : tallies) {
    StagePattern p;
    p.f_r = frac(t, Group::Recovery);
    p.f_d = frac(t, Group::Deterioration);
    if (p.max_support() < min_support) continue;
    p.symbols = symbols;
    p.f_m = frac(t, Group::Middle);
    p.w = p.f_r - p.f_d;
    p.occurrences = std::move(t.occurrences);
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(), [](const StagePattern& a, const StagePattern& b) {
    return a.symbols.size() < b.symbols.size();
  });
  return out;
}

ImpactResult pattern_impact(const std::vector<int>& pattern, const std::vector<StageSequence>& sequences,
                            const std::vector<StagePattern>& frequent) {
  struct Split {
    std::vector<int> former, latter;
  };
  std::vector<Split> splits;
  for (const auto& s : sequences) {
    if (s.group == Group::Middle) continue;
    const int at = first_occurrence(s.stages, pattern);
    if (at < 0) continue;
    Split sp;
    sp.former.assign(s.stages.begin(), s.stages.begin() + at);
    sp.latter.assign(s.stages.begin() + at + static_cast<std::ptrdiff_t>(pattern.size()), s.stages.end());
    splits.push_back(std::move(sp));
  }
  if (splits.empty()) throw PatternAbsent("pattern absent: " + pattern_key(pattern));
  // Canonical order makes the floating-point sums independent of input order.
  std::sort(splits.begin(), splits.end(), [](const Split& a, const Split& b) {
    return std::tie(a.former, a.latter) < std::tie(b.former, b.latter);
  });

  double mean_former = 0.0, mean_latter = 0.0;
  for (const auto& sp : splits) {
    mean_former += static_cast<double>(sp.former.size());
    mean_latter += static_cast<double>(sp.latter.size());
  }
  mean_former /= static_cast<double>(splits.size());
  mean_latter /= static_cast<double>(splits.size());

  std::map<std::vector<int>, double> weights;
  std::size_t longest = 0;
  for (const auto& p : frequent) {
    weights.emplace(p.symbols, p.w);
    longest = std::max(longest, p.symbols.size());
  }
  // Every occurrence of every frequent pattern, with multiplicity.
  auto decompose = [&](const std::vector<int>& side, double& s_r, double& s_d) {
    for (std::size_t i = 0; i < side.size(); ++i)
      for (std::size_t len = 1; len <= longest && i + len <= side.size(); ++len) {
        const auto it = weights.find(std::vector<int>(side.begin() + static_cast<std::ptrdiff_t>(i),
                                                      side.begin() + static_cast<std::ptrdiff_t>(i + len)));
        if (it == weights.end()) continue;
        if (it->second > 0.0) s_r += it->second;
        else if (it->second < 0.0) s_d -= it->second;
      }
  };

  ImpactResult r;
  r.n_containing = splits.size();
  for (const auto& sp : splits) {
    if (static_cast<double>(sp.former.size()) >= mean_former) {
      ++r.n_former;
      decompose(sp.former, r.s_r_former, r.s_d_former);
    }
    if (static_cast<double>(sp.latter.size()) >= mean_latter) {
      ++r.n_latter;
      decompose(sp.latter, r.s_r_latter, r.s_d_latter);
    }
  }
  auto ratio = [&](double s_r, double s_d) {
    if (s_d <= 0.0) {
      r.degenerate = true;
      s_d = kRatioEpsilon;
    }
    return s_r / s_d;
  };
  r.r_f = ratio(r.s_r_former, r.s_d_former);
  r.r_l = ratio(r.s_r_latter, r.s_d_latter);
  r.d_i = r.r_f - r.r_l;
  return r;
}

std::map<int, double> single_stage_positivity(const std::vector<StageSequence>& sequences, int n_stages) {
  std::map<int, double> out;
  for (int s = 1; s <= n_stages; ++s)
    out[s] = support(sequences, {s}, Group::Recovery) - support(sequences, {s}, Group::Deterioration);
  return out;
}

PatternSortKey parse_sort_key(std::string_view s) {
  if (s == "w" || s == "positivity") return PatternSortKey::Positivity;
  if (s == "impact" || s == "d_i") return PatternSortKey::Impact;
  if (s == "support") return PatternSortKey::Support;
  throw std::invalid_argument("unknown sort key '" + std::string(s) + "'");
}

std::vector<StagePattern> rank_patterns(std::vector<StagePattern> patterns, PatternSortKey key,
                                        const std::set<int>& required, bool descending) {
  std::erase_if(patterns, [&](const StagePattern& p) {
    return !std::all_of(required.begin(), required.end(), [&](int s) {
      return std::find(p.symbols.begin(), p.symbols.end(), s) != p.symbols.end();
    });
  });
  auto value = [key](const StagePattern& p) {
    switch (key) {
      case PatternSortKey::Positivity: return p.w;
      case PatternSortKey::Impact: return p.impact ? std::abs(p.impact->d_i) : 0.0;
      case PatternSortKey::Support: return p.max_support();
    }
    return 0.0;
  };
  std::stable_sort(patterns.begin(), patterns.end(), [&](const StagePattern& a, const StagePattern& b) {
    return descending ? value(a) > value(b) : value(a) < value(b);
  });
  return patterns;
}

}  // namespace stagelens
