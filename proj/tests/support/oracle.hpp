#pragma once

// Brute-force reference evaluation of the incremental entity-matching step,
// written independently of the library implementation: plain structs, linear
// scans, its own dot product. Used to cross-check match_entities on random
// instances.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <kgforge/canonical.hpp>

namespace oracle {

struct Item {
  std::string name;
  std::string key;
  std::string label;
  std::vector<double> vec;
  std::set<std::string> prov;
};

struct Decision {
  std::string local_name;
  std::string outcome;  // exact | merged | inserted
  std::string target_key;
  std::optional<double> similarity;
};

struct Output {
  std::vector<std::string> matched;
  std::vector<Decision> decisions;
};

inline double clamped_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
  if (s > 1.0) s = 1.0;
  if (s < -1.0) s = -1.0;
  return s;
}

// One pass of the matching loop over `locals` against the running global
// set: exact key first, then best cosine against every global at or above
// the threshold (first maximum wins), else append as new.
inline Output match(std::vector<Item>& globals, const std::vector<Item>& locals,
                    double threshold) {
  Output out;
  for (const Item& local : locals) {
    int exact_at = -1;
    for (std::size_t g = 0; g < globals.size(); ++g) {
      if (globals[g].key == local.key) {
        exact_at = static_cast<int>(g);
        break;
      }
    }
    if (exact_at >= 0) {
      for (const auto& p : local.prov) globals[exact_at].prov.insert(p);
      out.matched.push_back(local.key);
      out.decisions.push_back({local.name, "exact", local.key, std::nullopt});
      continue;
    }
    double best = -1.0;
    int best_at = -1;
    for (std::size_t g = 0; g < globals.size(); ++g) {
      if (globals[g].vec.empty()) continue;
      double sim = clamped_dot(local.vec, globals[g].vec);
      if (sim > best) {
        best = sim;
        best_at = static_cast<int>(g);
      }
    }
    if (best_at >= 0 && best >= threshold) {
      for (const auto& p : local.prov) globals[best_at].prov.insert(p);
      out.matched.push_back(globals[best_at].key);
      out.decisions.push_back({local.name, "merged", globals[best_at].key, best});
    } else {
      Item fresh = local;
      globals.push_back(fresh);
      out.matched.push_back(local.key);
      out.decisions.push_back({local.name, "inserted", local.key, best});
    }
  }
  return out;
}

}  // namespace oracle
