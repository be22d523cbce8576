#pragma once

#include <algorithm>
#include <cmath>
#include <map>

#include "fmd/error.hpp"
#include "fmd/rng.hpp"

namespace fmd {

template <class T, class LabelFn>
std::pair<std::vector<T>, std::vector<T>> stratified_split(
    const std::vector<T>& items, double ratio, std::uint64_t seed,
    LabelFn label_of) {
  if (!(ratio > 0.0 && ratio < 1.0)) config_error("split ratio must be in (0,1)");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < items.size(); ++i)
    groups[static_cast<int>(label_of(items[i]))].push_back(i);

  SplitMix64 rng(seed);
  std::vector<char> first(items.size(), 0);
  for (auto& [label, idx] : groups) {
    const std::size_t n = idx.size();
    const auto take = static_cast<std::size_t>(std::llround(ratio * n));
    if (take == 0 || take == n)
      data_error("class " + std::to_string(label) + " has " + std::to_string(n) +
                 " item(s); too few to populate both halves of the split");
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.below(i + 1)]);
    for (std::size_t i = 0; i < take; ++i) first[idx[i]] = 1;
  }
  std::pair<std::vector<T>, std::vector<T>> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    (first[i] ? out.first : out.second).push_back(items[i]);
  return out;
}

}  // namespace fmd
